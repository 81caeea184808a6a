//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or exceeds its time budget.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use sosec_core::analysis::{diff_cwe_sets, normalize_finding, parse_json_report, parse_sarif, CweMap, Finding, ToolKind};
use sosec_core::eval::{compute_metrics, Arm, EvalReport, SampleOutcome};
use sosec_core::kb::{
    build_knowledge_base, CommentReader, EntryComment, IngestStats, KbOptions, KeywordSet, KnowledgeEntry, PostReader,
};
use sosec_core::retrieval::{Bm25Params, RetrievalIndex, DEFAULT_K};
use sosec_core::Cwe;

type Outcome = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn kb_fixtures() -> PathBuf {
    manifest().join("../core/tests/fixtures/kb")
}

fn analysis_fixtures() -> PathBuf {
    manifest().join("../core/tests/fixtures/analysis")
}

// ---------------------------------------------------------------------------
// Metric tables

/// Independent rounding oracle: long division to two decimals plus a sticky
/// remainder bit, then ties-to-even on the decimal string.
fn oracle_percent(num: i64, den: i64) -> String {
    assert!(den > 0);
    let negative = num < 0;
    let n = num.unsigned_abs() * 100;
    let d = den as u64;
    let int_part = n / d;
    let mut rem = n % d;
    let mut digits = Vec::new();
    for _ in 0..2 {
        rem *= 10;
        digits.push(rem / d);
        rem %= d;
    }
    let (tenth, hundredth, sticky) = (digits[0], digits[1], rem != 0);
    let mut tenths = int_part * 10 + tenth;
    let round_up = hundredth > 5 || (hundredth == 5 && (sticky || tenths % 2 == 1));
    if round_up {
        tenths += 1;
    }
    let body = format!("{}.{}", tenths / 10, tenths % 10);
    if negative && tenths != 0 {
        format!("-{body}")
    } else {
        body
    }
}

/// Smallest numerator over `den` that reports as `published`.
fn smallest_count(published: &str, den: i64) -> Option<i64> {
    (0..=den).find(|&n| oracle_percent(n, den) == published)
}

fn cwe(n: u32) -> Cwe {
    Cwe::new(&format!("CWE-{n}")).unwrap()
}

fn outcome(id: String, arm: Arm, before: &[u32], fixed: bool) -> SampleOutcome {
    let b: BTreeSet<Cwe> = before.iter().map(|&n| cwe(n)).collect();
    let a = if fixed { BTreeSet::new() } else { b.clone() };
    SampleOutcome { sample_id: id, arm, diff: diff_cwe_sets(&b, &a), before_cwes: b, after_cwes: a, unchanged: !fixed }
}

/// `den` single-CWE samples, the first `fixed` of which are fixed.
fn single_cwe_arm(arm: Arm, den: usize, fixed: usize) -> Vec<SampleOutcome> {
    (0..den).map(|i| outcome(format!("s{i:03}"), arm, &[78], i < fixed)).collect()
}

/// 40 C samples holding 30 vulnerabilities: 11 samples with two CWEs, 8 with
/// one and 21 with none. The first `changed` samples are rewritten and lose
/// every CWE; the rest are returned untouched.
fn c_arm(arm: Arm, changed: usize) -> Vec<SampleOutcome> {
    (0..40)
        .map(|i| {
            let before: &[u32] = match i {
                0..=10 => &[119, 190],
                11..=18 => &[476],
                _ => &[],
            };
            outcome(format!("c{i:02}"), arm, before, i < changed)
        })
        .collect()
}

fn pct(v: f64) -> String {
    format!("{v:.1}")
}

struct Cell {
    label: &'static str,
    published: &'static str,
    count: i64,
    den: i64,
}

fn check_cells(cells: &[Cell]) -> Outcome {
    for c in cells {
        let oracle = oracle_percent(c.count, c.den);
        ensure(oracle == c.published, || format!("{}: oracle gives {oracle} for {}/{}, published {}", c.label, c.count, c.den, c.published))?;
        if c.count >= 0 {
            let smallest = smallest_count(c.published, c.den);
            ensure(smallest == Some(c.count), || {
                format!("{}: smallest count for {} over {} is {smallest:?}, fixture uses {}", c.label, c.published, c.den, c.count)
            })?;
        }
    }
    Ok(())
}

fn metric_tables() -> Outcome {
    // Per-dataset fix rates, delta vs prompt-only, intro rate of the full pipeline.
    let table1: [(&str, usize, [(Arm, usize, &str); 3], &str); 3] = [
        ("SALLM", 53, [(Arm::PromptOnly, 26, "49.1"), (Arm::CweLabel, 31, "58.5"), (Arm::Sosecure, 38, "71.7")], "22.6"),
        ("LLMSecEval", 23, [(Arm::PromptOnly, 13, "56.5"), (Arm::CweLabel, 16, "69.6"), (Arm::Sosecure, 21, "91.3")], "34.8"),
        ("LMSys", 240, [(Arm::PromptOnly, 90, "37.5"), (Arm::CweLabel, 110, "45.8"), (Arm::Sosecure, 232, "96.7")], "59.2"),
    ];
    for (name, den, arms, delta) in table1 {
        let mut cells: Vec<Cell> = arms
            .iter()
            .map(|&(_, n, p)| Cell { label: name, published: p, count: n as i64, den: den as i64 })
            .collect();
        cells.push(Cell { label: name, published: delta, count: (arms[2].1 - arms[0].1) as i64, den: den as i64 });
        check_cells(&cells)?;

        let outcomes: Vec<SampleOutcome> = arms.iter().flat_map(|&(arm, n, _)| single_cwe_arm(arm, den, n)).collect();
        let report = compute_metrics(&outcomes, Arm::PromptOnly).map_err(|e| e.to_string())?;
        for (arm, _, published) in arms {
            let got = report.per_arm[&arm].fix_rate.map(pct);
            ensure(got.as_deref() == Some(published), || format!("{name} {arm} fix rate {got:?}, published {published}"))?;
        }
        let so = &report.per_arm[&Arm::Sosecure];
        let got_delta = so.delta_fix_vs_baseline.map(pct);
        ensure(got_delta.as_deref() == Some(delta), || format!("{name} delta {got_delta:?}, published +{delta}"))?;
        ensure(pct(so.intro_rate) == "0.0", || format!("{name} intro rate {}", so.intro_rate))?;
    }

    // LMSys ablation, fix and intro rates.
    let table2 = [
        (Arm::PromptOnly, 90, "37.5"),
        (Arm::CweLabel, 110, "45.8"),
        (Arm::RevisionOnly, 99, "41.2"),
        (Arm::Sosecure, 232, "96.7"),
    ];
    check_cells(&table2.map(|(_, n, p)| Cell { label: "LMSys ablation", published: p, count: n, den: 240 }))?;
    let outcomes: Vec<SampleOutcome> =
        table2.iter().flat_map(|&(arm, n, _)| single_cwe_arm(arm, 240, n as usize)).collect();
    let report = compute_metrics(&outcomes, Arm::PromptOnly).map_err(|e| e.to_string())?;
    for (arm, _, published) in table2 {
        let m = &report.per_arm[&arm];
        let got = m.fix_rate.map(pct);
        ensure(got.as_deref() == Some(published), || format!("ablation {arm} fix rate {got:?}, published {published}"))?;
        ensure(pct(m.intro_rate) == "0.0", || format!("ablation {arm} intro rate {}", m.intro_rate))?;
    }

    // C code, fix / intro / no-change.
    let table3 = [(Arm::PromptOnly, 16, 32, "53.3", "80.0"), (Arm::CweLabel, 18, 31, "60.0", "77.5"), (Arm::Sosecure, 22, 29, "73.3", "72.5")];
    for (_, fixed, unchanged, fr, nc) in table3 {
        check_cells(&[
            Cell { label: "C fix", published: fr, count: fixed, den: 30 },
            Cell { label: "C no-change", published: nc, count: unchanged, den: 40 },
        ])?;
    }
    let outcomes: Vec<SampleOutcome> = table3.iter().flat_map(|&(arm, _, unchanged, _, _)| c_arm(arm, 40 - unchanged as usize)).collect();
    let report = compute_metrics(&outcomes, Arm::PromptOnly).map_err(|e| e.to_string())?;
    for (arm, fixed, unchanged, fr, nc) in table3 {
        let m = &report.per_arm[&arm];
        ensure(m.vulns_before == 30 && m.vulns_fixed == fixed as u64 && m.samples_unchanged == unchanged as u64, || {
            format!("C {arm} counts {}/{} fixed, {} unchanged", m.vulns_fixed, m.vulns_before, m.samples_unchanged)
        })?;
        let got = (m.fix_rate.map(pct), pct(m.intro_rate), pct(m.no_change_rate));
        ensure(got == (Some(fr.to_string()), "0.0".into(), nc.to_string()), || format!("C {arm}: {got:?}, published ({fr}, 0.0, {nc})"))?;
    }

    // Aggregation does not depend on outcome order.
    let base = compute_metrics(&outcomes, Arm::PromptOnly).map_err(|e| e.to_string())?;
    let shuffled = Just(outcomes.clone()).prop_shuffle();
    runner(32)
        .run(&shuffled, |perm| {
            let r = compute_metrics(&perm, Arm::PromptOnly).unwrap();
            prop_assert_eq!(&r, &base);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// BM25

const K1: f64 = 1.2;
const B: f64 = 0.75;

fn vocab() -> Vec<String> {
    let mut v = Vec::new();
    for c in "bdfgkmpt".chars() {
        for w in "aeiou".chars() {
            v.push(format!("{c}{w}"));
        }
    }
    v
}

/// Scores every document directly from its token list.
fn brute_force(docs: &[Vec<String>], ids: &[i64], query: &[String], k: usize) -> Vec<(i64, f64)> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let terms: BTreeSet<&String> = query.iter().collect();
    let mut scored: Vec<(i64, f64)> = docs
        .iter()
        .zip(ids)
        .map(|(doc, &id)| {
            let dl = doc.len() as f64;
            let mut s = 0.0;
            for t in &terms {
                let tf = doc.iter().filter(|w| w == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                s += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * dl / avgdl));
            }
            (id, s)
        })
        .filter(|&(_, s)| s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn entry(id: i64, code: String) -> KnowledgeEntry {
    KnowledgeEntry {
        answer_id: id,
        question_id: 0,
        answer_score: 1,
        answer_excerpt: String::new(),
        code_blocks: vec![code],
        comments: vec![],
        tags: vec![],
        url: KnowledgeEntry::answer_url(id),
    }
}

fn bm25_oracle() -> Outcome {
    let words = vocab();
    let nw = words.len();
    let strategy = (
        prop::collection::vec(prop::collection::vec(0..nw, 0..=30), 1..=50),
        prop::collection::vec(0..nw + 4, 1..=8),
        1usize..=12,
        any::<u64>(),
    );
    runner(200)
        .run(&strategy, |(doc_idx, query_idx, k, salt)| {
            let word = |i: usize| if i < nw { words[i].clone() } else { format!("zz{}", "q".repeat(i - nw + 1)) };
            let docs: Vec<Vec<String>> = doc_idx.iter().map(|d| d.iter().map(|&i| word(i)).collect()).collect();
            // Distinct ids in scrambled order so id tie-breaks differ from insertion order.
            let ids: Vec<i64> = (0..docs.len()).map(|i| ((i as u64 * 7919 + salt % 1000) % 1009) as i64 + 1).collect();
            let query: Vec<String> = query_idx.iter().map(|&i| word(i)).collect();
            let entries = docs.iter().zip(&ids).map(|(d, &id)| entry(id, d.join(" "))).collect();
            let index = RetrievalIndex::build(entries, Bm25Params { k1: K1, b: B }).unwrap();
            let hits = index.retrieve(&query.join(" "), k).unwrap();
            let expected = brute_force(&docs, &ids, &query, k);
            let got: Vec<i64> = hits.iter().map(|h| h.entry.answer_id).collect();
            let want: Vec<i64> = expected.iter().map(|e| e.0).collect();
            prop_assert_eq!(&got, &want);
            for (h, (_, s)) in hits.iter().zip(&expected) {
                prop_assert!((h.score - s).abs() <= 1e-9, "score {} vs oracle {}", h.score, s);
            }
            for (i, h) in hits.iter().enumerate() {
                prop_assert_eq!(h.rank, i + 1);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Planted context

const GENERATED_SNIPPET: &str = r#"from flask import Flask, request
import subprocess

app = Flask(__name__)

@app.route("/execute", methods=["POST"])
def execute_command():
    command = request.form.get("command")
    subprocess.call(command, shell=True)
    return "Command executed successfully"

if __name__ == "__main__":
    app.run(debug=False)
"#;

const DISTRACTORS: [&str; 12] = [
    "import subprocess\nresult = subprocess.run(['ls', '-l', {v}], capture_output=True, text=True)\nprint(result.stdout)",
    "from flask import Flask, request\napp = Flask(__name__)\n\n@app.route('/upload', methods=['POST'])\ndef upload():\n    f = request.files['{v}']\n    f.save(secure_filename(f.filename))",
    "cursor.execute('SELECT * FROM users WHERE id = %s', ({v},))\nrows = cursor.fetchall()",
    "with open({v}, 'rb') as fh:\n    data = json.load(fh)",
    "path = os.path.realpath(os.path.join(base_dir, {v}))\nif not path.startswith(base_dir):\n    abort(404)",
    "digest = hashlib.sha256({v}.encode()).hexdigest()",
    "config = yaml.safe_load({v})",
    "response = requests.get({v}, timeout=10)\nresponse.raise_for_status()",
    "proc = subprocess.Popen(['tail', '-f', {v}], stdout=subprocess.PIPE)\nfor line in proc.stdout:\n    print(line)",
    "if __name__ == '__main__':\n    app.run(host='127.0.0.1', port={v})",
    "command = request.form.get('{v}')\nargs = shlex.split(command)\nreturn jsonify(args=args)",
    "token = secrets.token_urlsafe({v})\nsession['csrf'] = token",
];

fn planted_kb() -> (Vec<KnowledgeEntry>, i64) {
    let planted_id = 4242;
    let mut entries = Vec::new();
    for i in 0..99 {
        let template = DISTRACTORS[i % DISTRACTORS.len()];
        let code = template.replace("{v}", &format!("arg{i}"));
        let mut e = entry(5000 + i as i64, code);
        e.answer_excerpt = format!("Answer number {i} with a working example.");
        e.answer_score = (i % 7) as i64;
        entries.push(e);
    }
    let mut planted = entry(
        planted_id,
        "import subprocess\n\nsubprocess.call(command, shell=True)  # risky\nsubprocess.call(shlex.split(command))".into(),
    );
    planted.answer_excerpt = "Avoid passing untrusted strings to a shell.".into();
    planted.comments = vec![EntryComment {
        text: "Using shell=True opens the program to command injection vulnerabilities.".into(),
        score: 27,
    }];
    entries.insert(37, planted);
    (entries, planted_id)
}

fn planted_context() -> Outcome {
    let (entries, planted_id) = planted_kb();
    ensure(entries.len() == 100, || format!("KB has {} entries", entries.len()))?;
    let with_flag = entries.iter().filter(|e| e.code_blocks.iter().any(|c| c.contains("shell=True"))).count();
    ensure(with_flag == 1, || format!("{with_flag} entries contain shell=True"))?;
    let index = RetrievalIndex::build(entries, Bm25Params::default()).map_err(|e| e.to_string())?;
    let hits = index.retrieve(GENERATED_SNIPPET, DEFAULT_K).map_err(|e| e.to_string())?;
    ensure(hits.len() == 5, || format!("{} hits", hits.len()))?;
    ensure(hits[0].entry.answer_id == planted_id, || {
        format!("rank 1 is {} ({:.4}), planted entry not first", hits[0].entry.answer_id, hits[0].score)
    })?;
    ensure(hits[0].entry.comments[0].text.contains("command injection"), || "comment lost".into())
}

// ---------------------------------------------------------------------------
// End-to-end

fn sosec(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sosec")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("sosec {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let kb = dir.path().join("kb.jsonl");
    let idx = dir.path().join("kb.idx");
    let e2e = manifest().join("tests/fixtures/e2e");
    let p = |p: &Path| p.to_str().unwrap().to_string();
    sosec(&[
        "build-kb",
        "--posts",
        &p(&kb_fixtures().join("Posts.xml")),
        "--comments",
        &p(&kb_fixtures().join("Comments.xml")),
        "--out",
        &p(&kb),
    ])?;
    sosec(&["index", "--kb", &p(&kb), "--out", &p(&idx)])?;
    let out = sosec(&[
        "--config",
        &p(&e2e.join("sosec.toml")),
        "--format",
        "json",
        "eval",
        "--dataset",
        &p(&e2e.join("dataset.jsonl")),
        "--arm",
        "sosecure,prompt_only",
        "--index",
        &p(&idx),
    ])?;
    let report: EvalReport = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    ensure(report.counts.samples == 10, || format!("{} samples evaluated", report.counts.samples))?;
    ensure(report.excluded.is_empty(), || format!("excluded: {:?}", report.excluded))?;
    let so = &report.per_arm[&Arm::Sosecure];
    let po = &report.per_arm[&Arm::PromptOnly];
    ensure(so.fix_rate == Some(100.0) && so.intro_rate == 0.0, || {
        format!("sosecure fix {:?} intro {}", so.fix_rate, so.intro_rate)
    })?;
    ensure(po.fix_rate == Some(0.0) && po.no_change_rate == 100.0, || {
        format!("prompt_only fix {:?} no-change {}", po.fix_rate, po.no_change_rate)
    })
}

// ---------------------------------------------------------------------------
// KB gates

fn build_kb(keywords: &KeywordSet) -> Result<(Vec<KnowledgeEntry>, IngestStats), String> {
    let open = |name: &str| {
        std::fs::File::open(kb_fixtures().join(name)).map(std::io::BufReader::new).map_err(|e| e.to_string())
    };
    let mut posts = PostReader::new(open("Posts.xml")?);
    let mut comments = CommentReader::new(open("Comments.xml")?);
    let mut build = build_knowledge_base(posts.by_ref(), comments.by_ref(), keywords, KbOptions::default())
        .map_err(|e| e.to_string())?;
    build.stats.merge(posts.stats());
    build.stats.merge(comments.stats());
    Ok((build.entries, build.stats))
}

fn ids(entries: &[KnowledgeEntry]) -> BTreeSet<i64> {
    entries.iter().map(|e| e.answer_id).collect()
}

fn kb_gates() -> Outcome {
    // 10 keyword + score + code block; 11 endorsed only by a comment; 12 later
    // duplicate row passes where the first did not; 13 SQL injection; 16
    // buffer overflow; 18 keyword only in a comment; 20 long inline code.
    // Dropped: 14 and 19 have no usable code, 15 and 21 lack a keyword in
    // visible text, 17 fails the endorsement gate.
    let expected: Vec<i64> = vec![10, 11, 12, 13, 16, 18, 20, 22];
    let (entries, stats) = build_kb(&KeywordSet::default_set())?;
    let got: Vec<i64> = entries.iter().map(|e| e.answer_id).collect();
    ensure(got == expected, || format!("entries {got:?}, expected {expected:?}"))?;
    let want_stats = IngestStats {
        rows: 29,
        skipped: 4,
        missing_attribute: 2,
        bad_integer: 1,
        unsupported_type: 1,
        duplicate_answers: 1,
        orphan_comments: 1,
    };
    ensure(stats == want_stats, || format!("stats {stats:?}"))?;
    let e12 = &entries[2];
    ensure(e12.answer_score == 2 && e12.code_blocks == vec!["subprocess.run(['ls', path], check=True)".to_string()], || {
        format!("duplicate resolution kept {e12:?}")
    })?;

    let pool: Vec<String> = KeywordSet::default_set().iter().map(String::from).collect();
    let extra = ["flask", "sqlite", "compare prefixes", "list with a comprehension"];
    let pool: Vec<String> = pool.into_iter().chain(extra.iter().map(|s| s.to_string())).collect();
    let np = pool.len();
    let strategy = (prop::collection::btree_set(0..np, 1..12), prop::collection::btree_set(0..np, 0..40));
    runner(50)
        .run(&strategy, |(base, more)| {
            let small: Vec<&str> = base.iter().map(|&i| pool[i].as_str()).collect();
            let large: Vec<&str> = base.union(&more).map(|&i| pool[i].as_str()).collect();
            let (a, _) = build_kb(&KeywordSet::new(small).unwrap()).unwrap();
            let (b, _) = build_kb(&KeywordSet::new(large).unwrap()).unwrap();
            prop_assert!(ids(&a).is_subset(&ids(&b)), "{:?} not within {:?}", ids(&a), ids(&b));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Parsers

fn frozen(name: &str) -> Result<Vec<Finding>, String> {
    let text = std::fs::read_to_string(analysis_fixtures().join(name)).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn parsers() -> Outcome {
    let map = CweMap::default_map();
    let read = |name: &str| std::fs::read(analysis_fixtures().join(name)).map_err(|e| e.to_string());

    let sarif: Vec<Finding> = parse_sarif(&read("codeql_python.sarif")?)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| normalize_finding(ToolKind::AnalyzerB, r, &map))
        .collect();
    let want = frozen("codeql_python.expected.json")?;
    ensure(sarif == want, || format!("SARIF findings differ:\n got {sarif:#?}\nwant {want:#?}"))?;

    let report: Vec<Finding> = parse_json_report(&read("bandit_report.json")?)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| normalize_finding(ToolKind::AnalyzerA, r, &map))
        .collect();
    let want = frozen("bandit_report.expected.json")?;
    ensure(report == want, || format!("JSON report findings differ:\n got {report:#?}\nwant {want:#?}"))?;

    let open = |name: &str| -> Result<std::io::BufReader<std::fs::File>, String> {
        std::fs::File::open(kb_fixtures().join(name)).map(std::io::BufReader::new).map_err(|e| e.to_string())
    };
    let mut posts = PostReader::new(open("skips_posts.xml")?);
    let parsed: Vec<i64> = posts.by_ref().map(|p| p.map(|p| p.id)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure(parsed == vec![1, 2], || format!("posts kept {parsed:?}"))?;
    let want = IngestStats { rows: 10, skipped: 8, missing_attribute: 3, bad_integer: 3, unsupported_type: 2, ..Default::default() };
    ensure(*posts.stats() == want, || format!("post tallies {:?}", posts.stats()))?;

    let mut comments = CommentReader::new(open("skips_comments.xml")?);
    let parsed: Vec<(i64, i64, String)> = comments
        .by_ref()
        .map(|c| c.map(|c| (c.id, c.score, c.text)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(parsed == vec![(1, 4, "use <code>shlex</code>".into()), (5, 0, "downvoted".into())], || format!("comments {parsed:?}"))?;
    let want = IngestStats { rows: 5, skipped: 3, missing_attribute: 2, bad_integer: 1, ..Default::default() };
    ensure(*comments.stats() == want, || format!("comment tallies {:?}", comments.stats()))?;

    let rows: Vec<_> = PostReader::new(open("truncated_posts.xml")?).collect();
    ensure(rows.len() == 2 && rows[0].is_ok() && rows[1].is_err(), || format!("truncated dump gave {rows:?}"))
}

// ---------------------------------------------------------------------------

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 6] = [
    Criterion { name: "metric-table reproduction", budget: Duration::from_secs(1), run: metric_tables },
    Criterion { name: "bm25 oracle equivalence", budget: Duration::from_secs(30), run: bm25_oracle },
    Criterion { name: "planted-context retrieval", budget: Duration::from_secs(5), run: planted_context },
    Criterion { name: "end-to-end offline pipeline", budget: Duration::from_secs(10), run: end_to_end },
    Criterion { name: "kb construction gates", budget: Duration::from_secs(5), run: kb_gates },
    Criterion { name: "parser bit-exactness", budget: Duration::from_secs(2), run: parsers },
];

fn main() {
    let mut failures = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|()| {
            ensure(elapsed <= c.budget, || format!("took {elapsed:.2?}, budget {:?}", c.budget))
        });
        let line = match &result {
            Ok(()) => format!("PASS  {:<30} {elapsed:>10.2?}", c.name),
            Err(msg) => {
                failures += 1;
                format!("FAIL  {:<30} {elapsed:>10.2?}  {msg}", c.name)
            }
        };
        println!("{line}");
    }
    println!("\nacceptance: {} passed, {failures} failed", CRITERIA.len() - failures);
    let _ = std::io::stdout().flush();
    if failures > 0 {
        std::process::exit(1);
    }
}
