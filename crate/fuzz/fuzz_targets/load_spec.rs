#![no_main]

use libfuzzer_sys::fuzz_target;
use valasp_core::emit::export_text;
use valasp_core::spec::load_spec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = load_spec(text) {
        let _ = export_text(&spec);
    }
});
