#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::revision::TranscriptProvider;

fuzz_target!(|data: &[u8]| {
    let _ = TranscriptProvider::parse(data);
});
