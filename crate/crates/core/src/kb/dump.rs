//! Streaming reader for the Stack Exchange data-dump `<row .../>` format.
//!
//! Each call to [`RowReader::next`] consumes XML events until the next `row`
//! element, so memory is bounded by a single row regardless of file size.

use std::collections::HashMap;
use std::io::BufRead;
use std::marker::PhantomData;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::{DumpError, IngestStats, SkipReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostType {
    Question,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: i64,
    pub post_type: PostType,
    pub parent_id: Option<i64>,
    pub score: i64,
    pub body: String,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawComment {
    pub id: i64,
    pub post_id: i64,
    pub score: i64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    Posts,
    Comments,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DumpRecord {
    Post(RawPost),
    Comment(RawComment),
}

/// A record type that can be built from the attributes of one dump row.
pub trait FromRow: Sized {
    fn from_row(attrs: &HashMap<String, String>) -> Result<Self, SkipReason>;
}

fn parse_int(attrs: &HashMap<String, String>, key: &'static str) -> Result<Option<i64>, SkipReason> {
    match attrs.get(key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse::<i64>()
            .map(Some)
            .map_err(|_| SkipReason::BadInteger(key)),
    }
}

fn required_int(attrs: &HashMap<String, String>, key: &'static str) -> Result<i64, SkipReason> {
    parse_int(attrs, key)?.ok_or(SkipReason::MissingAttribute(key))
}

/// Splits a `Tags` attribute. Older dumps use `<a><b>`, newer ones `|a|b|`.
pub fn parse_tags(raw: &str) -> Vec<String> {
    raw.split(['<', '>', '|'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl FromRow for RawPost {
    fn from_row(attrs: &HashMap<String, String>) -> Result<Self, SkipReason> {
        let id = required_int(attrs, "Id")?;
        let post_type = match required_int(attrs, "PostTypeId")? {
            1 => PostType::Question,
            2 => PostType::Answer,
            other => return Err(SkipReason::UnsupportedPostType(other)),
        };
        let parent_id = parse_int(attrs, "ParentId")?;
        if post_type == PostType::Answer && parent_id.is_none() {
            return Err(SkipReason::MissingAttribute("ParentId"));
        }
        Ok(RawPost {
            id,
            post_type,
            parent_id: if post_type == PostType::Answer { parent_id } else { None },
            score: parse_int(attrs, "Score")?.unwrap_or(0),
            body: attrs.get("Body").cloned().unwrap_or_default(),
            tags: attrs.get("Tags").map(|t| parse_tags(t)).unwrap_or_default(),
        })
    }
}

impl FromRow for RawComment {
    fn from_row(attrs: &HashMap<String, String>) -> Result<Self, SkipReason> {
        Ok(RawComment {
            id: required_int(attrs, "Id")?,
            post_id: required_int(attrs, "PostId")?,
            // Dumps only expose net upvotes for comments.
            score: parse_int(attrs, "Score")?.unwrap_or(0).max(0),
            text: attrs.get("Text").cloned().unwrap_or_default(),
        })
    }
}

/// Iterator over typed rows of a dump file.
///
/// Yields `Err` once on malformed XML and then stops. Rows that are missing
/// a required attribute are skipped and counted in [`RowReader::stats`].
pub struct RowReader<R: BufRead, T> {
    reader: Reader<R>,
    buf: Vec<u8>,
    depth: usize,
    stats: IngestStats,
    done: bool,
    _marker: PhantomData<T>,
}

impl<R: BufRead, T: FromRow> RowReader<R, T> {
    pub fn new(input: R) -> Self {
        let mut reader = Reader::from_reader(input);
        reader.config_mut().check_end_names = true;
        RowReader {
            reader,
            buf: Vec::new(),
            depth: 0,
            stats: IngestStats::default(),
            done: false,
            _marker: PhantomData,
        }
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    fn fatal(&mut self, message: String) -> Option<Result<T, DumpError>> {
        self.done = true;
        Some(Err(DumpError::Malformed {
            offset: self.reader.error_position().max(self.reader.buffer_position()),
            message,
        }))
    }

    fn collect_attrs(start: &BytesStart<'_>) -> Result<HashMap<String, String>, String> {
        let mut attrs = HashMap::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| e.to_string())?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr.unescape_value().map_err(|e| e.to_string())?;
            attrs.insert(key, value.into_owned());
        }
        Ok(attrs)
    }
}

impl<R: BufRead, T: FromRow> Iterator for RowReader<R, T> {
    type Item = Result<T, DumpError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(ev) => ev,
                Err(e) => return self.fatal(e.to_string()),
            };
            let (start, is_row) = match event {
                Event::Empty(e) => {
                    let is_row = e.name().as_ref() == b"row";
                    (e.into_owned(), is_row)
                }
                Event::Start(e) => {
                    self.depth += 1;
                    let is_row = e.name().as_ref() == b"row";
                    (e.into_owned(), is_row)
                }
                Event::End(_) => {
                    self.depth = self.depth.saturating_sub(1);
                    continue;
                }
                Event::Eof => {
                    if self.depth != 0 {
                        return self.fatal("unexpected end of input inside an open element".into());
                    }
                    self.done = true;
                    return None;
                }
                _ => continue,
            };
            if !is_row {
                continue;
            }
            let attrs = match Self::collect_attrs(&start) {
                Ok(a) => a,
                Err(msg) => return self.fatal(msg),
            };
            self.stats.rows += 1;
            match T::from_row(&attrs) {
                Ok(record) => return Some(Ok(record)),
                Err(reason) => {
                    log::debug!("skipping dump row: {reason}");
                    self.stats.record_skip(reason);
                }
            }
        }
    }
}

pub type PostReader<R> = RowReader<R, RawPost>;
pub type CommentReader<R> = RowReader<R, RawComment>;

/// Untyped entry point: parse a dump of the given kind into [`DumpRecord`]s.
pub fn parse_dump_rows<R: BufRead + 'static>(
    input: R,
    kind: DumpKind,
) -> Box<dyn Iterator<Item = Result<DumpRecord, DumpError>>> {
    match kind {
        DumpKind::Posts => Box::new(PostReader::new(input).map(|r| r.map(DumpRecord::Post))),
        DumpKind::Comments => {
            Box::new(CommentReader::new(input).map(|r| r.map(DumpRecord::Comment)))
        }
    }
}
