//! Constraint validators as ASP text, the export file, and the bridge to an
//! external grounder in text-output mode.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::script::class_name;
use crate::spec::ValidationSpec;
use crate::term::{parse_term, Fact, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidatorKind {
    /// Arity 1: the argument itself is passed to the @-term.
    Forward,
    /// Arity 2 or more: the whole atom is passed.
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintValidator {
    pub kind: ValidatorKind,
    pub symbol: String,
    pub arity: usize,
    pub text: String,
}

impl ConstraintValidator {
    pub fn new(symbol: &str, arity: usize) -> ConstraintValidator {
        let vars: Vec<String> = (1..=arity).map(|i| format!("X{i}")).collect();
        let atom = format!("{symbol}({})", vars.join(","));
        let (kind, arg) = if arity == 1 {
            (ValidatorKind::Forward, vars[0].clone())
        } else {
            (ValidatorKind::Implicit, atom.clone())
        };
        ConstraintValidator {
            kind,
            symbol: symbol.to_string(),
            arity,
            text: format!(":- {atom}, @valasp_validate_{symbol}({arg}) != 1."),
        }
    }
}

/// One validator per definition, in specification order.
pub fn emit_constraint_validators(spec: &ValidationSpec) -> Vec<ConstraintValidator> {
    spec.definitions.values().map(|d| ConstraintValidator::new(&d.symbol, d.arity())).collect()
}

/// The export file: a comment per validator naming its class, the
/// constraints, then the auxiliary rules. Empty for an empty specification.
pub fn export_text(spec: &ValidationSpec) -> String {
    let validators = emit_constraint_validators(spec);
    let mut out = String::new();
    for v in &validators {
        out.push_str(&format!("% @valasp_validate_{} checks class {}\n", v.symbol, class_name(&v.symbol)));
    }
    for v in &validators {
        out.push_str(&v.text);
        out.push('\n');
    }
    if let Some(asp) = spec.asp.as_deref().map(str::trim).filter(|a| !a.is_empty()) {
        out.push_str(asp);
        out.push('\n');
    }
    out
}

pub fn export_validators(spec: &ValidationSpec, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, export_text(spec))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrounderBridgeConfig {
    /// Program and arguments; the program text goes to standard input.
    pub command: Vec<String>,
    pub timeout: Duration,
}

impl GrounderBridgeConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

    /// Splits a shell-style command line.
    pub fn from_command_line(line: &str) -> Option<GrounderBridgeConfig> {
        let command = shlex::split(line).filter(|c| !c.is_empty())?;
        Some(GrounderBridgeConfig { command, timeout: Self::DEFAULT_TIMEOUT })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot start grounder `{command}`: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("grounder timed out after {0:?}")]
    Timeout(Duration),
    #[error("grounder exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("cannot read grounder output: {0}")]
    Output(#[from] ParseError),
    #[error("grounder I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Grounds `program_text` with the external command and returns every atom
/// the output makes derivable.
pub fn ground_with_external(program_text: &str, config: &GrounderBridgeConfig) -> Result<BTreeSet<Fact>, BridgeError> {
    let Some((program, args)) = config.command.split_first() else {
        return Err(BridgeError::Spawn {
            command: String::new(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
        });
    };
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| BridgeError::Spawn { command: config.command.join(" "), source })?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let text = program_text.to_string();
    let writer = thread::spawn(move || {
        // a grounder that exits early closes the pipe; its status reports why
        let _ = stdin.write_all(text.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let status = match child.wait_timeout(config.timeout)? {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(BridgeError::Timeout(config.timeout));
        }
    };
    let _ = writer.join();
    let out = out_reader.join().expect("reader thread")?;
    let err = err_reader.join().expect("reader thread");
    if !status.success() {
        return Err(BridgeError::Failed {
            status: status.to_string(),
            stderr: String::from_utf8_lossy(&err).trim().to_string(),
        });
    }
    Ok(parse_ground_output(&String::from_utf8_lossy(&out))?)
}

/// Splits ground text into statements at top-level periods.
fn statements(text: &str) -> Vec<(usize, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut start, mut depth, mut i) = (0, 0i32, 0);
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'%' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                if text[start..i].trim_start().starts_with('%') {
                    start = i;
                }
            }
            b'(' | b'{' | b'[' => depth += 1,
            b')' | b'}' | b']' => depth -= 1,
            b'.' if depth == 0 && bytes.get(i + 1) != Some(&b'.') => {
                out.push((start, &text[start..i]));
                start = i + 1;
            }
            b'.' if bytes.get(i + 1) == Some(&b'.') => i += 1,
            _ => {}
        }
        i += 1;
    }
    if !text[start..].trim().is_empty() {
        out.push((start, &text[start..]));
    }
    out
}

/// Splits at top-level occurrences of any of `seps`.
fn split_top<'a>(s: &'a str, seps: &[u8]) -> Vec<&'a str> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let (mut start, mut depth, mut i) = (0, 0i32, 0);
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'(' | b'{' | b'[' => depth += 1,
            b')' | b'}' | b']' => depth -= 1,
            c if depth == 0 && seps.contains(&c) => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    out.push(&s[start..]);
    out
}

fn head_of(stmt: &str) -> Option<&str> {
    let bytes = stmt.as_bytes();
    let (mut depth, mut i) = (0i32, 0);
    while i + 1 < bytes.len() {
        match bytes[i] {
            b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'(' | b'{' | b'[' => depth += 1,
            b')' | b'}' | b']' => depth -= 1,
            b':' if depth == 0 && bytes[i + 1] == b'-' => return Some(&stmt[..i]),
            _ => {}
        }
        i += 1;
    }
    None
}

/// Reads a grounder's text output. Facts and the heads of fully ground
/// rules (including choice and disjunctive heads) become atoms; integrity
/// and weak constraints, directives and comments are ignored.
pub fn parse_ground_output(text: &str) -> Result<BTreeSet<Fact>, ParseError> {
    let mut atoms = BTreeSet::new();
    for (offset, raw) in statements(text) {
        let stmt = raw.trim();
        if stmt.is_empty() || stmt.starts_with('#') || stmt.starts_with(":-") || stmt.starts_with(":~") {
            continue;
        }
        if stmt.starts_with('[') {
            // weight annotation trailing a weak constraint
            continue;
        }
        let head = head_of(stmt).unwrap_or(stmt).trim();
        let elements: Vec<&str> = if let Some(open) = head.find('{') {
            let close = head[open..]
                .rfind('}')
                .map(|i| open + i)
                .ok_or_else(|| ParseError::at(text, offset, "unbalanced choice braces"))?;
            split_top(&head[open + 1..close], b";")
        } else {
            split_top(head, b";|")
        };
        for element in elements {
            let atom = split_top(element, b":")[0].trim();
            if atom.is_empty() || atom.starts_with("not ") {
                continue;
            }
            let lead = raw.len() - raw.trim_start().len();
            let term = parse_term(atom).map_err(|e| ParseError::at(text, offset + lead, e.message))?;
            let fact = Fact::from_term(term)
                .ok_or_else(|| ParseError::at(text, offset + lead, format!("`{atom}` is not an atom")))?;
            atoms.insert(fact);
        }
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::load_spec;

    #[test]
    fn templates() {
        assert_eq!(ConstraintValidator::new("range", 1).text, ":- range(X1), @valasp_validate_range(X1) != 1.");
        let b = ConstraintValidator::new("bday", 2);
        assert_eq!(b.kind, ValidatorKind::Implicit);
        assert_eq!(b.text, ":- bday(X1,X2), @valasp_validate_bday(bday(X1,X2)) != 1.");
        assert!(emit_constraint_validators(&ValidationSpec::default()).is_empty());
        assert_eq!(export_text(&ValidationSpec::default()), "");
    }

    #[test]
    fn export_contents() {
        let spec = load_spec(
            "valasp:\n  asp: |\n    residual_budget(B-B',R) :- init_budget(R,B), budget_spent(R,B').\nresidual_budget:\n  value: Integer\n  id_res: Integer\n",
        )
        .unwrap();
        let text = export_text(&spec);
        assert!(text.contains("checks class Residual_budget"));
        assert!(text.contains(":- residual_budget(X1,X2), @valasp_validate_residual_budget(residual_budget(X1,X2)) != 1."));
        assert!(text.trim_end().ends_with("budget_spent(R,B')."));
    }

    #[test]
    fn ground_output_dialect() {
        let text = "range(1).\np(\"a.b\").\n{c(1);c(2)}.\nd:-c(1).\ne;f:-d.\n:-c(2).\n#show.\n% note. here\n0{g(1):c(1)}1.\n";
        let atoms: Vec<String> = parse_ground_output(text).unwrap().iter().map(|f| f.to_string()).collect();
        assert_eq!(atoms, ["c(1)", "c(2)", "d", "e", "f", "g(1)", "p(\"a.b\")", "range(1)"]);
        assert!(parse_ground_output("").unwrap().is_empty());
        assert!(parse_ground_output("p(.\n").is_err());
        assert!(parse_ground_output("5.\n").is_err());
        assert!(parse_ground_output("a;b}:-c({1}).\n").is_err());
    }

    #[test]
    fn command_lines() {
        let c = GrounderBridgeConfig::from_command_line("python3 -m clingo --mode=gringo --text").unwrap();
        assert_eq!(c.command.len(), 5);
        assert!(GrounderBridgeConfig::from_command_line("  ").is_none());
    }

    #[test]
    fn bridge_failures() {
        let missing = GrounderBridgeConfig { command: vec!["/nonexistent/grounder".into()], timeout: Duration::from_secs(5) };
        assert!(matches!(ground_with_external("a.", &missing), Err(BridgeError::Spawn { .. })));
        let failing = GrounderBridgeConfig::from_command_line("sh -c 'echo boom >&2; exit 3'").unwrap();
        match ground_with_external("a.", &failing) {
            Err(BridgeError::Failed { stderr, .. }) => assert_eq!(stderr, "boom"),
            other => panic!("{other:?}"),
        }
        let slow = GrounderBridgeConfig { timeout: Duration::from_millis(200), ..GrounderBridgeConfig::from_command_line("sleep 5").unwrap() };
        assert!(matches!(ground_with_external("a.", &slow), Err(BridgeError::Timeout(_))));
        let echo = GrounderBridgeConfig::from_command_line("cat").unwrap();
        let atoms = ground_with_external("a(1). b :- a(1).", &echo).unwrap();
        assert_eq!(atoms.len(), 2);
    }
}
