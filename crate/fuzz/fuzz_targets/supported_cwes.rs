#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::eval::SupportedCwes;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(set) = SupportedCwes::parse(text) {
            assert!(!set.is_empty());
        }
    }
});
