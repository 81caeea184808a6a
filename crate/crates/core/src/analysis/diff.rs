use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::finding::Finding;
use crate::cwe::Cwe;

/// Before/after comparison at the granularity of distinct CWEs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingDiff {
    pub fixed: BTreeSet<Cwe>,
    pub persisted: BTreeSet<Cwe>,
    pub introduced: BTreeSet<Cwe>,
}

/// Distinct CWEs among findings; unmapped findings are ignored.
pub fn cwe_set(findings: &[Finding]) -> BTreeSet<Cwe> {
    findings.iter().filter_map(|f| f.cwe.clone()).collect()
}

pub fn diff_cwe_sets(before: &BTreeSet<Cwe>, after: &BTreeSet<Cwe>) -> FindingDiff {
    FindingDiff {
        fixed: before.difference(after).cloned().collect(),
        persisted: before.intersection(after).cloned().collect(),
        introduced: after.difference(before).cloned().collect(),
    }
}

pub fn diff_findings(before: &[Finding], after: &[Finding]) -> FindingDiff {
    diff_cwe_sets(&cwe_set(before), &cwe_set(after))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{Severity, ToolKind};
    use proptest::prelude::*;

    fn finding(cwe: Option<&str>) -> Finding {
        Finding {
            tool: ToolKind::AnalyzerA,
            rule_id: "r".into(),
            cwe: cwe.map(|c| Cwe::new(c).unwrap()),
            severity: Severity::Medium,
            message: String::new(),
            file: "f.py".into(),
            line: 1,
        }
    }

    fn set(cwes: &[&str]) -> BTreeSet<Cwe> {
        cwes.iter().map(|c| Cwe::new(c).unwrap()).collect()
    }

    #[test]
    fn full_fix() {
        let d = diff_findings(&[finding(Some("CWE-78"))], &[]);
        assert_eq!(d.fixed, set(&["CWE-78"]));
        assert!(d.introduced.is_empty());
    }

    #[test]
    fn persisted() {
        let d = diff_findings(&[finding(Some("CWE-78"))], &[finding(Some("CWE-78"))]);
        assert_eq!(d.persisted, set(&["CWE-78"]));
        assert!(d.fixed.is_empty());
    }

    #[test]
    fn swap() {
        let d = diff_findings(&[finding(Some("CWE-78"))], &[finding(Some("CWE-89"))]);
        assert_eq!(d.fixed, set(&["CWE-78"]));
        assert_eq!(d.introduced, set(&["CWE-89"]));
    }

    #[test]
    fn duplicates_and_unmapped_collapse() {
        let before = [finding(Some("CWE-78")), finding(Some("CWE-78")), finding(None)];
        assert_eq!(cwe_set(&before), set(&["CWE-78"]));
    }

    fn cwe_sets() -> impl Strategy<Value = BTreeSet<Cwe>> {
        prop::collection::btree_set(1u32..40, 0..10)
            .prop_map(|nums| nums.into_iter().map(|n| Cwe::new(&format!("CWE-{n}")).unwrap()).collect())
    }

    proptest! {
        #[test]
        fn set_identities(before in cwe_sets(), after in cwe_sets()) {
            let d = diff_cwe_sets(&before, &after);
            prop_assert!(d.fixed.is_disjoint(&d.persisted));
            let fp: BTreeSet<Cwe> = d.fixed.union(&d.persisted).cloned().collect();
            prop_assert!(d.introduced.is_disjoint(&fp));
            prop_assert_eq!(&fp, &before);
            let pi: BTreeSet<Cwe> = d.persisted.union(&d.introduced).cloned().collect();
            prop_assert_eq!(&pi, &after);
        }

        #[test]
        fn swap_symmetry(before in cwe_sets(), after in cwe_sets()) {
            let forward = diff_cwe_sets(&before, &after);
            let backward = diff_cwe_sets(&after, &before);
            prop_assert_eq!(forward.fixed, backward.introduced);
            prop_assert_eq!(forward.introduced, backward.fixed);
            prop_assert_eq!(forward.persisted, backward.persisted);
        }
    }
}
