#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::kb::PostReader;

fuzz_target!(|data: &[u8]| {
    let mut reader = PostReader::new(data);
    let mut ok = 0u64;
    for row in reader.by_ref() {
        match row {
            Ok(post) => {
                ok += 1;
                let _ = sosec_core::kb::extract_code_blocks(&post.body);
            }
            Err(_) => break,
        }
    }
    assert!(reader.stats().rows >= ok);
});
