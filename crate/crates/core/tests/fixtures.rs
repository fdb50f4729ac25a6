mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Duration;

use valasp_core::datalog::{evaluate, parse_program};
use valasp_core::emit::{export_text, export_validators, ground_with_external, GrounderBridgeConfig};
use valasp_core::report::{RuleKind, Verdict};
use valasp_core::spec::{check_spec, load_spec};
use valasp_core::term::{parse_facts, Fact, GroundTerm};
use valasp_core::validate::{run, run_input, Input, Mode, RunOptions};

use common::*;

const SPECS: [&str; 11] = [
    "income.yaml",
    "bday.yaml",
    "ordered_triple.yaml",
    "video.yaml",
    "video_overflow.yaml",
    "solitaire.yaml",
    "qsr.yaml",
    "knight.yaml",
    "poset.yaml",
    "connected.yaml",
    "budget.yaml",
];

fn clingo() -> Option<GrounderBridgeConfig> {
    let ok = Command::new("python3")
        .args(["-c", "import clingo"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    ok.then(|| GrounderBridgeConfig {
        command: ["python3", "-m", "clingo", "--mode=gringo", "--text"].map(String::from).to_vec(),
        timeout: Duration::from_secs(60),
    })
}

fn atoms(text: &str) -> BTreeSet<Fact> {
    evaluate(&parse_program(text).unwrap(), Vec::new()).unwrap()
}

#[test]
fn every_fixture_spec_is_clean() {
    for name in SPECS {
        let spec = spec(name);
        assert!(check_spec(&spec).is_empty(), "{name}");
    }
}

#[test]
fn valid_fixtures_pass() {
    for (spec_name, data) in [
        ("income.yaml", "income_valid.lp"),
        ("bday.yaml", "bday_valid.lp"),
        ("video.yaml", "video_valid.lp"),
        ("solitaire.yaml", "solitaire.lp"),
        ("qsr.yaml", "qsr_valid.lp"),
        ("knight.yaml", "knight.lp"),
        ("poset.yaml", "poset_valid.lp"),
        ("connected.yaml", "connected_valid.lp"),
    ] {
        let r = run_input(&spec(spec_name), Input::Program(&fixture(data)), &RunOptions::default()).report;
        assert!(r.is_valid(), "{spec_name} on {data}: {}", r.to_text());
    }
}

#[test]
fn example_diagnostics() {
    let video = spec("video.yaml");
    let movie = Fact::new(
        "user",
        vec![num(1), GroundTerm::string("Movie"), num(720), num(10), num(10), num(3000)],
    );
    let r = run(&video, vec![movie], &RunOptions::default());
    assert_eq!(r.diagnostics[0].rule, RuleKind::Enum);

    let hook = Fact::new(
        "user",
        vec![num(1), GroundTerm::string("Video"), num(720), num(10), num(10), num(8625)],
    );
    let r = run(&video, vec![hook], &RunOptions::default());
    assert_eq!(r.diagnostics[0].rule, RuleKind::HookFail);
    assert!(r.diagnostics[0].message.contains("divisible by 50"));

    let triple = spec("ordered_triple.yaml");
    let r = run(&triple, vec![fact("ordered_triple", &[1, 3, 2])], &RunOptions::default());
    assert_eq!(r.diagnostics[0].message, "Expected second < third");

    let qsr = spec("qsr.yaml");
    let r = run(&qsr, parse_facts("label(2,1,rp).").unwrap(), &RunOptions::default());
    assert_eq!(r.diagnostics[0].rule, RuleKind::Having);
    let r = run(&qsr, parse_facts("label(1,2,rx).").unwrap(), &RunOptions::default());
    assert_eq!(r.diagnostics[0].message, "field l: field value: Should be one of [req, rp, rpi, rd, rdi, ro, roi, rm, rmi, rs, rsi, rf, rfi], but received rx");
    let r = run(&qsr, parse_facts("label(1,50,rp).").unwrap(), &RunOptions::default());
    assert_eq!(r.diagnostics[0].rule, RuleKind::Max);
}

#[test]
fn poset_and_connected_messages() {
    let r = run(&spec("poset.yaml"), parse_facts("r(1,1). r(2,2). r(1,2).").unwrap(), &RunOptions::default());
    assert_eq!(r.diagnostics[0].message, "Lost symmetry on (1,2)");
    let r = run(
        &spec("connected.yaml"),
        parse_facts("node(1). node(2). node(3). edge(1,2). edge(2,1).").unwrap(),
        &RunOptions::default(),
    );
    assert_eq!(r.diagnostics[0].message, "Unconnected node 3");
}

#[test]
fn budget_example() {
    let spec = spec("budget.yaml");
    let outcome = run_input(&spec, Input::Program(&fixture("budget.lp")), &RunOptions { fail_fast: false, ..RunOptions::default() });
    assert!(outcome.atoms.contains(&fact("residual_budget", &[1_500_000_000, 1])));
    assert!(outcome.atoms.contains(&fact("residual_budget", &[1_999_999_900, 2])));
    assert_eq!(outcome.report.diagnostics.len(), 1);
    assert_eq!(outcome.report.diagnostics[0].rule, RuleKind::SumPos);
    let r = run(&spec, parse_facts("init_budget(1,5). budget_spent(1,9).").unwrap(), &RunOptions::default());
    assert_eq!(r.diagnostics[0].rule, RuleKind::Min);
}

#[test]
fn export_counts() {
    let count = |text: &str| {
        let program = parse_program(text).unwrap();
        let constraints = program.rules.iter().filter(|r| r.is_constraint()).count();
        (constraints, program.rules.len() - constraints)
    };
    assert_eq!(count(&export_text(&spec("bday.yaml"))), (2, 0));
    assert_eq!(count(&export_text(&spec("budget.yaml"))), (1, 1));
    assert_eq!(count(&export_text(&spec("knight.yaml"))), (2, 8));
    let income = export_text(&spec("income.yaml"));
    assert!(income.contains(":- income(X1,X2), @valasp_validate_income(income(X1,X2)) != 1."));

    let dir = tempdir();
    let path = dir.join("empty.lp");
    export_validators(&load_spec("").unwrap(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
    assert!(export_validators(&spec("bday.yaml"), &dir.join("missing/dir/out.lp")).is_err());
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("valasp-fixtures-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn builtin_solitaire_board() {
    let model = atoms(&fixture("solitaire.lp"));
    let locations: Vec<&Fact> = model.iter().filter(|f| f.predicate == "location").collect();
    assert_eq!(locations.len(), 33);
    assert_eq!(model.iter().filter(|f| f.predicate == "range").count(), 7);
}

#[test]
fn bridge_matches_builtin() {
    let Some(config) = clingo() else {
        eprintln!("skipping: python clingo module not available");
        return;
    };
    assert!(ground_with_external("", &config).unwrap().is_empty());

    let solitaire = fixture("solitaire.lp");
    assert_eq!(ground_with_external(&solitaire, &config).unwrap(), atoms(&solitaire));

    let poset_rules = load_spec(&fixture("poset.yaml")).unwrap().asp.unwrap();
    for data in ["r(1,1). r(1,2).", "r(a,a). r(b,b). r(a,b). r(b,a).", "r(1,2). r(2,3)."] {
        let text = format!("{data}\n{poset_rules}");
        assert_eq!(ground_with_external(&text, &config).unwrap(), atoms(&text), "{data}");
    }

    let budget = spec("budget.yaml");
    let text = format!("{}\n{}", fixture("budget.lp"), budget.asp.as_deref().unwrap());
    let grounded = ground_with_external(&text, &config).unwrap();
    assert!(grounded.contains(&fact("residual_budget", &[1_500_000_000, 1])));

    let options = RunOptions { mode: Mode::Bridge(config), ..RunOptions::default() };
    let r = run_input(&spec("solitaire.yaml"), Input::Program(&solitaire), &options).report;
    assert!(r.is_valid(), "{}", r.to_text());
    let bad = format!("{solitaire}\nlocation(1,1).");
    let r = run_input(&spec("solitaire.yaml"), Input::Program(&bad), &options).report;
    assert_eq!(r.diagnostics[0].message, "Invalid position");
}

#[test]
fn bridge_failure_is_a_grounding_error() {
    let options = RunOptions {
        mode: Mode::Bridge(GrounderBridgeConfig::from_command_line("sh -c 'echo nope >&2; exit 1'").unwrap()),
        ..RunOptions::default()
    };
    let r = run_input(&spec("income.yaml"), Input::Program("income(\"a\",1)."), &options).report;
    assert_eq!(r.verdict, Verdict::SpecError);
    assert_eq!(r.diagnostics[0].rule, RuleKind::GroundingError);
    assert!(r.diagnostics[0].message.contains("nope"));
}
