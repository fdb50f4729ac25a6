#![no_main]

use libfuzzer_sys::fuzz_target;
use valasp_core::emit::parse_ground_output;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_ground_output(text);
    }
});
