//! Replays the fuzz corpus seeds through the fuzz targets' invariants.

use std::path::PathBuf;

use valasp_core::datalog::parse_program;
use valasp_core::emit::{export_text, parse_ground_output};
use valasp_core::script::parse_script;
use valasp_core::spec::load_spec;
use valasp_core::term::{parse_facts, parse_term};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.display().to_string(), std::fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn term_seeds_round_trip() {
    for (name, text) in seeds("parse_term") {
        let t = parse_term(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_term(&t.to_string()), Ok(t), "{name}");
    }
}

#[test]
fn fact_seeds_round_trip() {
    for (name, text) in seeds("parse_facts") {
        let facts = parse_facts(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let rendered: String = facts.iter().map(|f| format!("{f}.\n")).collect();
        assert_eq!(parse_facts(&rendered), Ok(facts), "{name}");
    }
}

#[test]
fn program_spec_script_and_output_seeds_parse() {
    for (name, text) in seeds("parse_program") {
        parse_program(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in seeds("load_spec") {
        let spec = load_spec(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        export_text(&spec);
    }
    for (name, text) in seeds("parse_script") {
        parse_script(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in seeds("ground_output") {
        let result = parse_ground_output(&text);
        if name.ends_with("brace_order") {
            assert!(result.is_err(), "{name}");
        } else {
            result.unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
