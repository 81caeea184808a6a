#![no_main]

use libfuzzer_sys::fuzz_target;
use sosec_core::eval::parse_samples;

fuzz_target!(|data: &[u8]| {
    let _ = parse_samples(data);
});
