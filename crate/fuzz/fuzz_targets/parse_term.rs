#![no_main]

use libfuzzer_sys::fuzz_target;
use valasp_core::term::parse_term;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_term(text) {
        let rendered = t.to_string();
        assert_eq!(parse_term(&rendered).as_ref(), Ok(&t), "{rendered}");
    }
});
