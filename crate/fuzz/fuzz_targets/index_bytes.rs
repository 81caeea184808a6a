#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::retrieval::RetrievalIndex;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = RetrievalIndex::from_bytes(data) {
        if let Ok(hits) = index.retrieve("subprocess shell=True", 5) {
            assert!(hits.len() <= 5);
            assert!(hits.iter().all(|h| h.score.is_finite()));
        }
    }
});
