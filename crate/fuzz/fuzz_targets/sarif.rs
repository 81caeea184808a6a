#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::analysis::parse_sarif;

fuzz_target!(|data: &[u8]| {
    if let Ok(findings) = parse_sarif(data) {
        assert!(findings.iter().all(|f| !f.rule_id.is_empty()));
    }
});
