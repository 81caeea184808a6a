#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::kb::{extract_code_blocks, strip_html};

fuzz_target!(|data: &[u8]| {
    if let Ok(html) = std::str::from_utf8(data) {
        for block in extract_code_blocks(html) {
            assert_eq!(block.trim(), block);
        }
        let _ = strip_html(html);
    }
});
