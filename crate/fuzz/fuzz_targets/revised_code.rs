#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::revision::{extract_revised_code, is_unchanged};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(code) = extract_revised_code(text) {
            assert!(is_unchanged(&code, &code));
        }
    }
});
