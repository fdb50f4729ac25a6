#![no_main]

use libfuzzer_sys::fuzz_target;
use valasp_core::term::parse_facts;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(facts) = parse_facts(text) {
        let rendered: String = facts.iter().map(|f| format!("{f}.\n")).collect();
        assert_eq!(parse_facts(&rendered), Ok(facts));
    }
});
