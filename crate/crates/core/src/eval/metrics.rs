//! Fix, introduction and no-change rates.
//!
//! Fix rate is vulnerability-level: fixed CWEs over all distinct before-CWEs,
//! summed across samples. Introduction and no-change rates are sample-level.
//! Percentages are rounded to one decimal from the exact ratio, with exact
//! ties going to the even tenth (so 99/240 = 41.25% reports as 41.2).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Arm, EvalError};
use crate::analysis::FindingDiff;
use crate::cwe::Cwe;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: String,
    pub arm: Arm,
    pub before_cwes: BTreeSet<Cwe>,
    pub after_cwes: BTreeSet<Cwe>,
    pub diff: FindingDiff,
    pub unchanged: bool,
}

/// Rounds `100 * num / den` to tenths of a percent, returned as an integer
/// count of tenths. Ties round to even.
pub fn percent_tenths(num: i128, den: i128) -> i128 {
    assert!(den > 0, "denominator must be positive");
    let scaled = 1000 * num;
    let q = scaled.div_euclid(den);
    let r = scaled.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + q.rem_euclid(2),
    }
}

pub fn round_percent(num: i128, den: i128) -> f64 {
    percent_tenths(num, den) as f64 / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CweTally {
    pub total: u64,
    pub fixed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    /// Absent when no vulnerabilities were flagged before revision.
    pub fix_rate: Option<f64>,
    pub intro_rate: f64,
    pub no_change_rate: f64,
    pub delta_fix_vs_baseline: Option<f64>,
    pub samples: u64,
    pub vulns_before: u64,
    pub vulns_fixed: u64,
    pub samples_introduced: u64,
    pub samples_unchanged: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub samples: u64,
    pub vulns_before: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub baseline_arm: Arm,
    pub per_arm: BTreeMap<Arm, ArmMetrics>,
    pub per_cwe: BTreeMap<Arm, BTreeMap<Cwe, CweTally>>,
    pub counts: Counts,
    /// Samples dropped because an analyzer or the provider failed, by reason.
    #[serde(default)]
    pub excluded: BTreeMap<String, u64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub const GRANULARITY_NOTE: &str = "Fix and introduction rates count distinct CWEs per sample; repeated findings of one CWE in a sample count once.";

pub fn per_cwe_breakdown<'a, I>(outcomes: I) -> BTreeMap<Cwe, CweTally>
where
    I: IntoIterator<Item = &'a SampleOutcome>,
{
    let mut out: BTreeMap<Cwe, CweTally> = BTreeMap::new();
    for o in outcomes {
        for cwe in &o.before_cwes {
            let tally = out.entry(cwe.clone()).or_insert(CweTally { total: 0, fixed: 0 });
            tally.total += 1;
            if o.diff.fixed.contains(cwe) {
                tally.fixed += 1;
            }
        }
    }
    out
}

struct RawCounts {
    samples: u64,
    vulns_before: u64,
    fixed: u64,
    introduced: u64,
    unchanged: u64,
}

fn raw_counts(outcomes: &[&SampleOutcome]) -> RawCounts {
    RawCounts {
        samples: outcomes.len() as u64,
        vulns_before: outcomes.iter().map(|o| o.before_cwes.len() as u64).sum(),
        fixed: outcomes.iter().map(|o| o.diff.fixed.len() as u64).sum(),
        introduced: outcomes.iter().filter(|o| !o.diff.introduced.is_empty()).count() as u64,
        unchanged: outcomes.iter().filter(|o| o.unchanged).count() as u64,
    }
}

/// Aggregates outcomes of one or more arms. Deltas are taken against
/// `baseline_arm` when it is present and has a defined fix rate.
pub fn compute_metrics(outcomes: &[SampleOutcome], baseline_arm: Arm) -> Result<EvalReport, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::NoOutcomes);
    }
    let mut by_arm: BTreeMap<Arm, Vec<&SampleOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_arm.entry(o.arm).or_default().push(o);
    }
    for list in by_arm.values_mut() {
        list.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    }
    let counts: BTreeMap<Arm, RawCounts> = by_arm.iter().map(|(&arm, list)| (arm, raw_counts(list))).collect();
    let baseline = counts.get(&baseline_arm).filter(|c| c.vulns_before > 0);

    let mut per_arm = BTreeMap::new();
    let mut per_cwe = BTreeMap::new();
    for (&arm, c) in &counts {
        let fix_rate = (c.vulns_before > 0).then(|| round_percent(c.fixed.into(), c.vulns_before.into()));
        let delta = match (c.vulns_before > 0, baseline) {
            (true, Some(b)) => {
                let num = i128::from(c.fixed) * i128::from(b.vulns_before)
                    - i128::from(b.fixed) * i128::from(c.vulns_before);
                let den = i128::from(c.vulns_before) * i128::from(b.vulns_before);
                Some(round_percent(num, den))
            }
            _ => None,
        };
        per_arm.insert(
            arm,
            ArmMetrics {
                fix_rate,
                intro_rate: round_percent(c.introduced.into(), c.samples.into()),
                no_change_rate: round_percent(c.unchanged.into(), c.samples.into()),
                delta_fix_vs_baseline: delta,
                samples: c.samples,
                vulns_before: c.vulns_before,
                vulns_fixed: c.fixed,
                samples_introduced: c.introduced,
                samples_unchanged: c.unchanged,
            },
        );
        per_cwe.insert(arm, per_cwe_breakdown(by_arm[&arm].iter().copied()));
    }
    let headline = counts.get(&baseline_arm).or_else(|| counts.values().next()).expect("non-empty");
    Ok(EvalReport {
        baseline_arm,
        per_arm,
        per_cwe,
        counts: Counts { samples: headline.samples, vulns_before: headline.vulns_before },
        excluded: BTreeMap::new(),
        notes: vec![GRANULARITY_NOTE.to_string()],
    })
}

fn fmt_pct(v: Option<f64>, signed: bool) -> String {
    match v {
        None => "n/a".into(),
        Some(x) if signed => format!("{x:+.1}%"),
        Some(x) => format!("{x:.1}%"),
    }
}

impl EvalReport {
    /// Aligned plain-text table: arm, fix rate, delta, intro rate, no-change rate.
    pub fn to_table(&self) -> String {
        let header = ["arm", "fix_rate", "delta_fix", "intro_rate", "no_change_rate"];
        let mut rows: Vec<[String; 5]> = vec![header.map(String::from)];
        for (arm, m) in &self.per_arm {
            rows.push([
                arm.as_str().to_string(),
                fmt_pct(m.fix_rate, false),
                if *arm == self.baseline_arm { "-".into() } else { fmt_pct(m.delta_fix_vs_baseline, true) },
                fmt_pct(Some(m.intro_rate), false),
                fmt_pct(Some(m.no_change_rate), false),
            ]);
        }
        let widths: Vec<usize> = (0..5).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, cell)| if i == 0 { format!("{cell:<w$}", w = widths[i]) } else { format!("{cell:>w$}", w = widths[i]) })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        let _ = writeln!(out, "\nsamples: {}  vulnerabilities before revision: {}", self.counts.samples, self.counts.vulns_before);
        for (reason, n) in &self.excluded {
            let _ = writeln!(out, "excluded ({reason}): {n}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}
