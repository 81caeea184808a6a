#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::retrieval::tokenize_code;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let tokens = tokenize_code(text);
        assert!(tokens.iter().all(|t| !t.as_str().is_empty()));
        assert_eq!(tokens, tokenize_code(text));
    }
});
