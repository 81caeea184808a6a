//! `sosec`: command-line front end for knowledge-base construction, retrieval,
//! revision, analysis and evaluation.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sosec_core::analysis::{Analyzer, CweMap};
use sosec_core::eval::{
    analyze_samples, compute_metrics, dual_tool_filter, filter_supported, load_samples, run_arm, Arm, RunOptions,
    SupportedCwes,
};
use sosec_core::kb::{build_knowledge_base, read_jsonl, write_jsonl, CommentReader, KbOptions, KeywordSet, PostReader};
use sosec_core::retrieval::{Bm25Params, RetrievalIndex};
use sosec_core::revision::{revise, ProviderKind};

use config::{FileConfig, GlobalConfig};

#[derive(Debug, Parser)]
#[command(name = "sosec", version, about = "Security-aware retrieval and revision of generated code")]
struct Cli {
    /// TOML config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for analysis and revision.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Mock,
    Recorded,
    Live,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter a Stack Exchange dump into a knowledge-base JSONL file.
    BuildKb {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long)]
        comments: PathBuf,
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        min_upvote: Option<i64>,
    },
    /// Build a BM25 index over a knowledge base.
    Index {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank knowledge-base entries for a code file.
    Retrieve {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        code: Option<PathBuf>,
        #[arg(short)]
        k: Option<usize>,
    },
    /// Revise a code file with retrieved context and print the revision record.
    Revise {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        code: Option<PathBuf>,
        #[arg(short)]
        k: Option<usize>,
        #[command(flatten)]
        provider: ProviderFlags,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Run one analyzer on a source file and print normalized findings.
    Analyze {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        cwe_map: Option<PathBuf>,
    },
    /// Evaluate experiment arms over a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated arms: prompt_only, cwe_label, revision_only, sosecure.
        #[arg(long, value_delimiter = ',', default_value = "prompt_only,sosecure")]
        arm: Vec<String>,
        #[arg(long, default_value = "prompt_only")]
        baseline: String,
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderFlags,
        #[arg(short)]
        k: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        cwe_map: Option<PathBuf>,
        #[arg(long)]
        supported_cwes: Option<PathBuf>,
        /// Keep samples flagged by only one analyzer.
        #[arg(long)]
        no_dual_filter: bool,
        /// Also write the JSON report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
struct ProviderFlags {
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    #[arg(long)]
    transcript: Option<PathBuf>,
}

/// Bad or missing arguments found after parsing. Exits with status 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| usage(format!("missing required argument {flag}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("\nFor more information, try '--help'.");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(value)?)?,
        Format::Text => write!(out, "{}", text())?,
    }
    Ok(())
}

fn load_index(path: &Path) -> Result<RetrievalIndex> {
    let file = File::open(path).with_context(|| format!("opening index {}", path.display()))?;
    RetrievalIndex::read_from(BufReader::new(file)).with_context(|| format!("loading index {}", path.display()))
}

fn load_cwe_map(path: Option<&Path>) -> Result<Arc<CweMap>> {
    Ok(Arc::new(match path {
        Some(p) => CweMap::load(p).with_context(|| format!("loading CWE map {}", p.display()))?,
        None => CweMap::default_map(),
    }))
}

fn apply_provider_flags(cfg: &mut GlobalConfig, flags: ProviderFlags) {
    if let Some(p) = flags.provider {
        cfg.provider.kind = match p {
            ProviderArg::Mock => ProviderKind::DeterministicMock,
            ProviderArg::Recorded => ProviderKind::RecordedTranscript,
            ProviderArg::Live => ProviderKind::LiveHttp,
        };
    }
    if flags.transcript.is_some() {
        cfg.provider.transcript_path = flags.transcript;
    }
}

#[derive(Serialize)]
struct BuildKbSummary<'a> {
    entries: usize,
    out: &'a Path,
    stats: sosec_core::kb::IngestStats,
}

#[derive(Serialize)]
struct IndexSummary<'a> {
    num_docs: usize,
    avg_doc_len: f64,
    out: &'a Path,
}

#[derive(Serialize)]
struct VersionInfo {
    name: &'static str,
    version: &'static str,
}

fn run(cli: Cli) -> Result<()> {
    let file_cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut cfg = GlobalConfig::from_file(file_cfg);
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let format = cli.format;

    match cli.command {
        Command::Version => {
            let info = VersionInfo { name: "sosec", version: env!("CARGO_PKG_VERSION") };
            emit(format, &info, || format!("sosec {}\n", info.version))
        }
        Command::BuildKb { posts, comments, keywords, out, min_upvote } => {
            let out = require(out.or(cfg.kb_path.clone()), "--out")?;
            if let Some(m) = min_upvote {
                cfg.min_upvote = m;
            }
            let keywords = match keywords.or(cfg.keyword_path.clone()) {
                Some(p) => KeywordSet::load(&p)?,
                None => KeywordSet::default_set(),
            };
            let open = |p: &Path| -> Result<BufReader<File>> {
                Ok(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))
            };
            let mut post_rows = PostReader::new(open(&posts)?);
            let mut comment_rows = CommentReader::new(open(&comments)?);
            let mut build = build_knowledge_base(
                post_rows.by_ref(),
                comment_rows.by_ref(),
                &keywords,
                KbOptions { min_upvote: cfg.min_upvote },
            )?;
            build.stats.merge(post_rows.stats());
            build.stats.merge(comment_rows.stats());
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut writer = BufWriter::new(file);
            write_jsonl(&build.entries, &mut writer)?;
            writer.flush()?;
            let summary = BuildKbSummary { entries: build.entries.len(), out: &out, stats: build.stats };
            emit(format, &summary, || {
                format!(
                    "wrote {} entries to {}\nrows read: {}  skipped: {}  duplicate answers: {}  orphan comments: {}\n",
                    summary.entries,
                    out.display(),
                    summary.stats.rows,
                    summary.stats.skipped,
                    summary.stats.duplicate_answers,
                    summary.stats.orphan_comments
                )
            })
        }
        Command::Index { kb, out } => {
            let kb = require(kb.or(cfg.kb_path.clone()), "--kb")?;
            let out = require(out.or(cfg.index_path.clone()), "--out")?;
            let file = File::open(&kb).with_context(|| format!("opening {}", kb.display()))?;
            let entries = read_jsonl(BufReader::new(file))?;
            let index = RetrievalIndex::build(entries, Bm25Params::default())?;
            let mut writer = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            index.write_to(&mut writer)?;
            writer.flush()?;
            let summary = IndexSummary { num_docs: index.num_docs(), avg_doc_len: index.avg_doc_len(), out: &out };
            emit(format, &summary, || {
                format!("indexed {} documents (avg length {:.2}) into {}\n", summary.num_docs, summary.avg_doc_len, out.display())
            })
        }
        Command::Retrieve { index, code, k } => {
            let index_path = require(index.or(cfg.index_path.clone()), "--index")?;
            let code_path = require(code, "--code")?;
            cfg.k = k.unwrap_or(cfg.k);
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let index = load_index(&index_path)?;
            let code = std::fs::read_to_string(&code_path).with_context(|| format!("reading {}", code_path.display()))?;
            let hits = index.retrieve(&code, cfg.k)?;
            emit(format, &hits, || {
                hits.iter()
                    .map(|h| format!("{}\t{:.4}\t{}\n", h.rank, h.score, h.entry.url))
                    .collect()
            })
        }
        Command::Revise { index, code, k, provider, budget } => {
            apply_provider_flags(&mut cfg, provider);
            cfg.k = k.unwrap_or(cfg.k);
            cfg.budget = budget.unwrap_or(cfg.budget);
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let provider = cfg.provider.build().context("initializing provider")?;
            let code_path = require(code, "--code")?;
            let code = std::fs::read_to_string(&code_path).with_context(|| format!("reading {}", code_path.display()))?;
            let hits = match index.or(cfg.index_path.clone()) {
                Some(p) => load_index(&p)?.retrieve(&code, cfg.k)?,
                None => Vec::new(),
            };
            let sample_id = code_path.file_name().map_or_else(|| "code".into(), |n| n.to_string_lossy().into_owned());
            let record = revise(provider.as_ref(), &sample_id, &code, &hits, cfg.budget)?;
            // The record is always printed as JSON.
            emit(Format::Json, &record, String::new)
        }
        Command::Analyze { file, adapter, cwe_map } => {
            let adapter_cfg = cfg
                .adapter(&adapter)
                .ok_or_else(|| usage(format!("unknown adapter {adapter:?}; define it under [analyzers.{adapter}] in the config")))?;
            let map = load_cwe_map(cwe_map.or(cfg.cwe_map_path.clone()).as_deref())?;
            let findings = Analyzer::new(adapter_cfg, map)?.analyze_file(&file)?;
            emit(format, &findings, || {
                findings
                    .iter()
                    .map(|f| {
                        let cwe = f.cwe.as_ref().map_or("-", |c| c.as_str());
                        format!("{}:{}\t{}\t{}\t{:?}\t{}\n", f.file.display(), f.line, f.rule_id, cwe, f.severity, f.message)
                    })
                    .collect()
            })
        }
        Command::Eval {
            dataset,
            arm,
            baseline,
            index,
            provider,
            k,
            budget,
            cwe_map,
            supported_cwes,
            no_dual_filter,
            out,
        } => {
            apply_provider_flags(&mut cfg, provider);
            cfg.k = k.unwrap_or(cfg.k);
            cfg.budget = budget.unwrap_or(cfg.budget);
            if no_dual_filter {
                cfg.dual_tool_filter = false;
            }
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let arms: Vec<Arm> = arm
                .iter()
                .map(|a| a.trim().parse::<Arm>())
                .collect::<Result<_, _>>()
                .map_err(|e| usage(e.to_string()))?;
            let baseline: Arm = baseline.parse().map_err(|e: sosec_core::eval::EvalError| usage(e.to_string()))?;
            run_eval(&cfg, EvalArgs { dataset, arms, baseline, index, cwe_map, supported_cwes, out }, format)
        }
    }
}

struct EvalArgs {
    dataset: PathBuf,
    arms: Vec<Arm>,
    baseline: Arm,
    index: Option<PathBuf>,
    cwe_map: Option<PathBuf>,
    supported_cwes: Option<PathBuf>,
    out: Option<PathBuf>,
}

fn run_eval(cfg: &GlobalConfig, args: EvalArgs, format: Format) -> Result<()> {
    let samples = load_samples(&args.dataset)?;
    let datasets: std::collections::BTreeSet<_> = samples.iter().map(|s| s.dataset).collect();
    if datasets.len() > 1 {
        return Err(sosec_core::eval::EvalError::MixedDatasets(datasets.into_iter().collect()).into());
    }
    let supported = match args.supported_cwes.or(cfg.supported_cwes_path.clone()) {
        Some(p) => SupportedCwes::load(&p)?,
        None => SupportedCwes::default_set(),
    };
    let map = load_cwe_map(args.cwe_map.or(cfg.cwe_map_path.clone()).as_deref())?;
    let analyzers: Vec<Analyzer> = cfg
        .analyzers
        .values()
        .map(|a| Analyzer::new(a.clone(), map.clone()))
        .collect::<Result<_, _>>()?;
    if analyzers.is_empty() {
        return Err(usage("eval needs at least one analyzer under [analyzers.<name>] in the config"));
    }
    let index = if args.arms.contains(&Arm::Sosecure) {
        let p = args
            .index
            .or(cfg.index_path.clone())
            .ok_or_else(|| usage("the sosecure arm needs --index"))?;
        Some(load_index(&p)?)
    } else {
        None
    };
    let needs_provider = args.arms.iter().any(|a| *a != Arm::PromptOnly);
    let provider = if needs_provider {
        cfg.provider.build().context("initializing provider")?
    } else {
        Box::new(sosec_core::revision::MockProvider::new(Default::default()))
    };

    let total = samples.len();
    let (analyzed, mut excluded) = analyze_samples(samples, &analyzers, cfg.workers)?;
    let analyzed = if cfg.dual_tool_filter { dual_tool_filter(analyzed) } else { analyzed };
    let kept = filter_supported(analyzed, &supported);
    log::info!("{} of {total} samples kept after filtering", kept.len());

    let opts = RunOptions { k: cfg.k, budget: cfg.budget, workers: cfg.workers };
    let mut outcomes = Vec::new();
    for arm in &args.arms {
        let run = run_arm(*arm, &kept, &analyzers, provider.as_ref(), index.as_ref(), &supported, opts)?;
        for (reason, n) in run.excluded {
            *excluded.entry(format!("{arm}: {reason}")).or_insert(0) += n;
        }
        outcomes.extend(run.outcomes);
    }
    let mut report = compute_metrics(&outcomes, args.baseline)?;
    report.excluded = excluded;
    report.notes.push(format!("{} of {total} dataset samples passed the analyzer filters.", kept.len()));

    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    emit(format, &report, || report.to_table())
}
