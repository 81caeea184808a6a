#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::kb::CommentReader;

fuzz_target!(|data: &[u8]| {
    for row in CommentReader::new(data) {
        if let Ok(c) = row {
            assert!(c.score >= 0);
        } else {
            break;
        }
    }
});
