use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::metrics::SampleOutcome;
use super::{Arm, CodeSample, EvalError, SupportedCwes};
use crate::analysis::{cwe_set, diff_cwe_sets, AnalysisError, Analyzer, Finding, ToolKind};
use crate::retrieval::{RetrievalIndex, DEFAULT_K};
use crate::revision::{
    build_label_prompt, build_revision_prompt, revise_with_prompt, Provider, RevisionError, RevisionRecord,
    DEFAULT_BUDGET,
};

/// A sample with the findings of every configured analyzer on its original code.
#[derive(Debug, Clone)]
pub struct AnalyzedSample {
    pub sample: CodeSample,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub k: usize,
    pub budget: usize,
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { k: DEFAULT_K, budget: DEFAULT_BUDGET, workers: 4 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ArmRun {
    pub outcomes: Vec<SampleOutcome>,
    pub records: Vec<RevisionRecord>,
    /// Samples dropped by reason.
    pub excluded: BTreeMap<String, u64>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, EvalError> {
    if workers == 0 {
        return Err(EvalError::Config("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::Config(format!("thread pool: {e}")))
}

/// Errors that say the environment is broken rather than the sample.
fn is_fatal(err: &AnalysisError) -> bool {
    matches!(err, AnalysisError::ToolMissing(_) | AnalysisError::Environment(_) | AnalysisError::Config(_))
}

fn analyze_code(analyzers: &[Analyzer], code: &str, ext: &str) -> Result<Vec<Finding>, AnalysisError> {
    let mut all = Vec::new();
    for a in analyzers {
        all.extend(a.analyze_source(code, ext)?);
    }
    Ok(all)
}

/// Runs every analyzer on every sample's original code. Samples whose
/// analysis fails are dropped and counted under `"analysis"`; a missing tool
/// aborts the run.
pub fn analyze_samples(
    samples: Vec<CodeSample>,
    analyzers: &[Analyzer],
    workers: usize,
) -> Result<(Vec<AnalyzedSample>, BTreeMap<String, u64>), EvalError> {
    if analyzers.is_empty() {
        return Err(EvalError::Config("no analyzers configured".into()));
    }
    let results: Vec<(CodeSample, Result<Vec<Finding>, AnalysisError>)> = pool(workers)?.install(|| {
        samples
            .into_par_iter()
            .map(|s| {
                let r = analyze_code(analyzers, &s.code, s.language.extension());
                (s, r)
            })
            .collect()
    });
    let mut out = Vec::new();
    let mut excluded = BTreeMap::new();
    for (sample, r) in results {
        match r {
            Ok(findings) => out.push(AnalyzedSample { sample, findings }),
            Err(e) if is_fatal(&e) => return Err(e.into()),
            Err(e) => {
                log::warn!("sample {}: {e}", sample.sample_id);
                *excluded.entry("analysis".to_string()).or_insert(0) += 1;
            }
        }
    }
    out.sort_by(|a, b| a.sample.sample_id.cmp(&b.sample.sample_id));
    Ok((out, excluded))
}

/// Keeps samples flagged by both analyzers.
pub fn dual_tool_filter(samples: Vec<AnalyzedSample>) -> Vec<AnalyzedSample> {
    samples
        .into_iter()
        .filter(|s| {
            let tools: BTreeSet<ToolKind> = s.findings.iter().map(|f| f.tool).collect();
            tools.contains(&ToolKind::AnalyzerA) && tools.contains(&ToolKind::AnalyzerB)
        })
        .collect()
}

/// Keeps samples with at least one supported CWE among their findings.
pub fn filter_supported(samples: Vec<AnalyzedSample>, supported: &SupportedCwes) -> Vec<AnalyzedSample> {
    samples
        .into_iter()
        .filter(|s| !supported.restrict(&cwe_set(&s.findings)).is_empty())
        .collect()
}

enum SampleError {
    Fatal(EvalError),
    Skip(&'static str, String),
}

fn run_one(
    arm: Arm,
    s: &AnalyzedSample,
    analyzers: &[Analyzer],
    provider: &dyn Provider,
    index: Option<&RetrievalIndex>,
    supported: &SupportedCwes,
    opts: RunOptions,
) -> Result<(SampleOutcome, Option<RevisionRecord>), SampleError> {
    let before = supported.restrict(&cwe_set(&s.findings));
    let id = &s.sample.sample_id;
    let code = &s.sample.code;

    let record = match arm {
        Arm::PromptOnly => None,
        _ => {
            let (prompt, ids) = match arm {
                Arm::CweLabel => {
                    let cwe = s.sample.labeled_cwe.as_ref().expect("labels checked");
                    (build_label_prompt(code, cwe, opts.budget), Vec::new())
                }
                Arm::Sosecure => {
                    let index = index.expect("index checked");
                    let hits = index.retrieve(code, opts.k).map_err(|e| SampleError::Fatal(e.into()))?;
                    let ids = hits.iter().map(|h| h.entry.answer_id).collect();
                    (build_revision_prompt(code, &hits, opts.budget), ids)
                }
                _ => (build_revision_prompt(code, &[], opts.budget), Vec::new()),
            };
            let prompt = prompt.map_err(|e| SampleError::Fatal(e.into()))?;
            match revise_with_prompt(provider, id, &prompt, ids) {
                Ok(r) => Some(r),
                Err(e @ RevisionError::Provider { .. }) => return Err(SampleError::Skip("provider", e.to_string())),
                Err(e) => return Err(SampleError::Fatal(e.into())),
            }
        }
    };

    // An unchanged revision is the original program, so its findings are too.
    let after = match &record {
        Some(r) if r.changed => {
            let findings = analyze_code(analyzers, &r.revised_code, s.sample.language.extension()).map_err(|e| {
                if is_fatal(&e) {
                    SampleError::Fatal(e.into())
                } else {
                    SampleError::Skip("analysis", e.to_string())
                }
            })?;
            supported.restrict(&cwe_set(&findings))
        }
        _ => before.clone(),
    };
    let outcome = SampleOutcome {
        sample_id: id.clone(),
        arm,
        diff: diff_cwe_sets(&before, &after),
        unchanged: record.as_ref().is_none_or(|r| !r.changed),
        before_cwes: before,
        after_cwes: after,
    };
    Ok((outcome, record))
}

/// Runs one experiment arm over analyzed samples. Outcomes are ordered by
/// sample id regardless of worker count.
pub fn run_arm(
    arm: Arm,
    samples: &[AnalyzedSample],
    analyzers: &[Analyzer],
    provider: &dyn Provider,
    index: Option<&RetrievalIndex>,
    supported: &SupportedCwes,
    opts: RunOptions,
) -> Result<ArmRun, EvalError> {
    match arm {
        Arm::Sosecure if index.is_none() => return Err(EvalError::MissingIndex),
        Arm::CweLabel => {
            let missing: Vec<String> = samples
                .iter()
                .filter(|s| s.sample.labeled_cwe.is_none())
                .map(|s| s.sample.sample_id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(EvalError::MissingLabels(missing));
            }
        }
        _ => {}
    }
    if opts.k == 0 {
        return Err(EvalError::Config("k must be at least 1".into()));
    }
    let results: Vec<_> = pool(opts.workers)?.install(|| {
        samples
            .par_iter()
            .map(|s| run_one(arm, s, analyzers, provider, index, supported, opts))
            .collect()
    });
    let mut run = ArmRun::default();
    for r in results {
        match r {
            Ok((outcome, record)) => {
                run.outcomes.push(outcome);
                run.records.extend(record);
            }
            Err(SampleError::Fatal(e)) => return Err(e),
            Err(SampleError::Skip(reason, msg)) => {
                log::warn!("{arm}: {msg}");
                *run.excluded.entry(reason.to_string()).or_insert(0) += 1;
            }
        }
    }
    run.outcomes.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    run.records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(run)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::analysis::{AdapterConfig, CweMap, ReportFormat};
    use crate::eval::{compute_metrics, Dataset, Language};
    use crate::kb::KnowledgeEntry;
    use crate::retrieval::Bm25Params;
    use crate::revision::{MockBehavior, MockProvider};
    use crate::Cwe;

    // Flags any file containing "shell=True" as B602 / command injection.
    const BANDIT_SH: &str = r#"if grep -q 'shell=True' "$0"; then echo '{"results":[{"test_id":"B602","issue_severity":"HIGH","line_number":2}]}'; else echo '{"results":[]}'; fi"#;
    const SARIF_SH: &str = r#"if grep -q 'shell=True' "$0"; then r='[{"ruleId":"py/command-line-injection","level":"error","message":{"text":"x"},"locations":[{"physicalLocation":{"artifactLocation":{"uri":"a.py"},"region":{"startLine":2}}}]}]'; else r='[]'; fi; echo "{\"version\":\"2.1.0\",\"runs\":[{\"tool\":{\"driver\":{\"name\":\"t\"}},\"results\":$r}]}""#;

    fn analyzers() -> Vec<Analyzer> {
        let map = Arc::new(CweMap::default_map());
        let mk = |name: &str, tool, format, script: &str| {
            Analyzer::new(
                AdapterConfig {
                    name: name.into(),
                    tool,
                    format,
                    command: Some(vec!["sh".into(), "-c".into(), script.into(), "{file}".into()]),
                    replay_dir: None,
                    timeout_secs: 30,
                },
                map.clone(),
            )
            .unwrap()
        };
        vec![
            mk("a", ToolKind::AnalyzerA, ReportFormat::JsonReport, BANDIT_SH),
            mk("b", ToolKind::AnalyzerB, ReportFormat::Sarif, SARIF_SH),
        ]
    }

    fn sample(i: usize, code: &str) -> CodeSample {
        CodeSample {
            sample_id: format!("s{i:02}"),
            dataset: Dataset::Custom,
            language: Language::Python,
            prompt: None,
            code: code.into(),
            labeled_cwe: Some(Cwe::new("CWE-78").unwrap()),
        }
    }

    fn corpus() -> Vec<CodeSample> {
        let mut v: Vec<_> = (0..6)
            .map(|i| sample(i, &format!("import subprocess\nsubprocess.call(cmd{i}, shell=True)\n")))
            .collect();
        v.push(sample(6, "print('safe')\n"));
        v
    }

    fn index() -> RetrievalIndex {
        let entry = KnowledgeEntry {
            answer_id: 1,
            question_id: 2,
            answer_score: 10,
            answer_excerpt: "Avoid shell=True.".into(),
            code_blocks: vec!["subprocess.call(shlex.split(cmd))".into()],
            comments: vec![],
            tags: vec![],
            url: KnowledgeEntry::answer_url(1),
        };
        RetrievalIndex::build(vec![entry], Bm25Params::default()).unwrap()
    }

    fn prepared() -> (Vec<Analyzer>, Vec<AnalyzedSample>) {
        let an = analyzers();
        let (analyzed, excluded) = analyze_samples(corpus(), &an, 3).unwrap();
        assert!(excluded.is_empty());
        let kept = filter_supported(dual_tool_filter(analyzed), &SupportedCwes::default_set());
        (an, kept)
    }

    #[test]
    fn filters_drop_clean_sample() {
        let (_, kept) = prepared();
        assert_eq!(kept.len(), 6);
        assert!(kept.iter().all(|s| s.sample.sample_id != "s06"));
    }

    #[test]
    fn sosecure_fixes_everything_prompt_only_nothing() {
        let (an, kept) = prepared();
        let mock = MockProvider::new(MockBehavior::Rewrite);
        let supported = SupportedCwes::default_set();
        let idx = index();
        let opts = RunOptions { workers: 2, ..RunOptions::default() };
        let mut outcomes = run_arm(Arm::PromptOnly, &kept, &an, &mock, None, &supported, opts).unwrap().outcomes;
        let so = run_arm(Arm::Sosecure, &kept, &an, &mock, Some(&idx), &supported, opts).unwrap();
        assert_eq!(so.records.len(), 6);
        assert!(so.records.iter().all(|r| r.retrieved_answer_ids == vec![1]));
        outcomes.extend(so.outcomes);
        let report = compute_metrics(&outcomes, Arm::PromptOnly).unwrap();
        assert_eq!(report.per_arm[&Arm::Sosecure].fix_rate, Some(100.0));
        assert_eq!(report.per_arm[&Arm::Sosecure].intro_rate, 0.0);
        assert_eq!(report.per_arm[&Arm::PromptOnly].fix_rate, Some(0.0));
        assert_eq!(report.per_arm[&Arm::PromptOnly].no_change_rate, 100.0);
        assert_eq!(report.per_arm[&Arm::Sosecure].delta_fix_vs_baseline, Some(100.0));
    }

    #[test]
    fn echo_provider_changes_nothing() {
        let (an, kept) = prepared();
        let echo = MockProvider::new(MockBehavior::Echo);
        let run = run_arm(Arm::RevisionOnly, &kept, &an, &echo, None, &SupportedCwes::default_set(), RunOptions::default())
            .unwrap();
        assert!(run.outcomes.iter().all(|o| o.unchanged && o.diff.fixed.is_empty()));
    }

    #[test]
    fn worker_count_does_not_change_outcomes() {
        let (an, kept) = prepared();
        let mock = MockProvider::new(MockBehavior::Rewrite);
        let s = SupportedCwes::default_set();
        let one = run_arm(Arm::CweLabel, &kept, &an, &mock, None, &s, RunOptions { workers: 1, ..Default::default() }).unwrap();
        let four = run_arm(Arm::CweLabel, &kept, &an, &mock, None, &s, RunOptions { workers: 4, ..Default::default() }).unwrap();
        assert_eq!(one.outcomes, four.outcomes);
        assert!(one.records[0].prompt_text.contains("CWE-78: OS Command Injection"));
    }

    #[test]
    fn precondition_errors() {
        let (an, mut kept) = prepared();
        let mock = MockProvider::new(MockBehavior::Rewrite);
        let s = SupportedCwes::default_set();
        let o = RunOptions::default();
        assert!(matches!(run_arm(Arm::Sosecure, &kept, &an, &mock, None, &s, o), Err(EvalError::MissingIndex)));
        kept[1].sample.labeled_cwe = None;
        match run_arm(Arm::CweLabel, &kept, &an, &mock, None, &s, o) {
            Err(EvalError::MissingLabels(ids)) => assert_eq!(ids, vec!["s01".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(analyze_samples(corpus(), &[], 1), Err(EvalError::Config(_))));
    }

    #[test]
    fn provider_failures_are_tallied() {
        let (an, kept) = prepared();
        let empty = crate::revision::TranscriptProvider::from_records([]);
        let run = run_arm(Arm::RevisionOnly, &kept, &an, &empty, None, &SupportedCwes::default_set(), RunOptions::default())
            .unwrap();
        assert!(run.outcomes.is_empty());
        assert_eq!(run.excluded["provider"], 6);
    }
}
