use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use valasp_core::datalog::parse_program;
use valasp_core::emit::{export_text, GrounderBridgeConfig};
use valasp_core::report::{RuleKind, Stats, ValidationReport, Verdict};
use valasp_core::spec::{load_spec, SpecError, ValidationSpec};
use valasp_core::term::parse_facts;
use valasp_core::validate::{run_input, Input, Mode, ReportFormat, RunOptions};

const EXIT_VALID: u8 = 0;
const EXIT_INVALID: u8 = 1;
const EXIT_SPEC: u8 = 2;
const EXIT_IO: u8 = 3;

/// Validate ASP data against a YAML specification.
#[derive(Parser)]
#[command(name = "valasp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Builtin,
    Bridge,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate facts or a program. Without --spec the first path is the specification.
    Validate {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "builtin")]
        mode: ModeArg,
        /// Grounder command line for bridge mode; reads ground text on stdin.
        #[arg(long, env = "VALASP_GROUNDER")]
        grounder_cmd: Option<String>,
        /// Grounder timeout in seconds.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
        /// Report every violation instead of stopping at the first.
        #[arg(long)]
        all_errors: bool,
        /// Print only the report, not the validated atoms.
        #[arg(long)]
        valid_only: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        /// Input files, concatenated in order; `-` reads standard input.
        paths: Vec<String>,
    },
    /// Write the constraint validators and auxiliary rules as an ASP file.
    Compile {
        #[arg(long)]
        spec: Option<PathBuf>,
        /// `SPEC [OUT]`, or just `OUT` with --spec; no output path writes to stdout.
        paths: Vec<PathBuf>,
    },
    /// Check a specification without validating data.
    CheckSpec {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        path: Option<PathBuf>,
    },
}

fn fail_io(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("valasp: {msg}");
    ExitCode::from(EXIT_IO)
}

fn read_path(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn read_input(path: &str) -> Result<String, String> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| format!("cannot read standard input: {e}"))?;
        Ok(s)
    } else {
        read_path(Path::new(path))
    }
}

fn render(report: &ValidationReport, format: FormatArg) -> String {
    match format {
        FormatArg::Text => report.to_text(),
        FormatArg::Json => report.to_json_lines(),
    }
}

fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

/// Loads a specification, printing its diagnostics on failure.
fn spec_or_exit(path: &Path, format: FormatArg) -> Result<ValidationSpec, ExitCode> {
    let text = read_path(path).map_err(fail_io)?;
    load_spec(&text).map_err(|SpecError { diagnostics }| {
        emit(&render(&ValidationReport::new(diagnostics, Stats::default()), format));
        ExitCode::from(EXIT_SPEC)
    })
}

fn exit_for(report: &ValidationReport) -> ExitCode {
    ExitCode::from(match report.verdict {
        Verdict::Valid => EXIT_VALID,
        Verdict::Invalid => EXIT_INVALID,
        Verdict::SpecError if report.diagnostics.iter().any(|d| d.rule == RuleKind::GroundingError) => EXIT_IO,
        Verdict::SpecError => EXIT_SPEC,
    })
}

#[allow(clippy::too_many_arguments)]
fn validate(
    spec: Option<PathBuf>,
    mode: ModeArg,
    grounder_cmd: Option<String>,
    timeout: u64,
    all_errors: bool,
    valid_only: bool,
    format: FormatArg,
    mut paths: Vec<String>,
) -> ExitCode {
    let spec_path = match spec {
        Some(p) => p,
        None if !paths.is_empty() => PathBuf::from(paths.remove(0)),
        None => return fail_io("no specification given"),
    };
    let spec = match spec_or_exit(&spec_path, format) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mut text = String::new();
    for p in &paths {
        match read_input(p) {
            Ok(t) => {
                text.push_str(&t);
                if !t.ends_with('\n') {
                    text.push('\n');
                }
            }
            Err(e) => return fail_io(e),
        }
    }
    let mode = match mode {
        ModeArg::Builtin => Mode::Builtin,
        ModeArg::Bridge => {
            let Some(cmd) = grounder_cmd else {
                return fail_io("bridge mode needs --grounder-cmd or VALASP_GROUNDER");
            };
            let Some(mut config) = GrounderBridgeConfig::from_command_line(&cmd) else {
                return fail_io(format!("cannot parse grounder command `{cmd}`"));
            };
            config.timeout = std::time::Duration::from_secs(timeout);
            Mode::Bridge(config)
        }
    };
    let input = match mode {
        Mode::Bridge(_) => Input::Program(&text),
        Mode::Builtin => match parse_facts(&text) {
            Ok(facts) => Input::Facts(facts),
            Err(_) => match parse_program(&text) {
                Ok(_) => Input::Program(&text),
                Err(e) => return fail_io(format!("cannot parse input: {e}")),
            },
        },
    };
    let options = RunOptions {
        mode,
        fail_fast: !all_errors,
        valid_only,
        report_format: match format {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Json => ReportFormat::Json,
        },
    };
    let outcome = run_input(&spec, input, &options);
    let mut out = String::new();
    if matches!(format, FormatArg::Text) && outcome.report.is_valid() {
        for atom in &outcome.atoms {
            out.push_str(&format!("{atom}.\n"));
        }
    }
    out.push_str(&render(&outcome.report, format));
    emit(&out);
    exit_for(&outcome.report)
}

fn compile(spec: Option<PathBuf>, mut paths: Vec<PathBuf>) -> ExitCode {
    let spec_path = match spec {
        Some(p) => p,
        None if !paths.is_empty() => paths.remove(0),
        None => return fail_io("no specification given"),
    };
    if paths.len() > 1 {
        return fail_io("compile takes at most one output path");
    }
    let spec = match spec_or_exit(&spec_path, FormatArg::Text) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let text = export_text(&spec);
    match paths.first() {
        Some(out) => match std::fs::write(out, text) {
            Ok(()) => ExitCode::from(EXIT_VALID),
            Err(e) => fail_io(format!("cannot write {}: {e}", out.display())),
        },
        None => {
            emit(&text);
            ExitCode::from(EXIT_VALID)
        }
    }
}

fn check_spec(spec: Option<PathBuf>, path: Option<PathBuf>, format: FormatArg) -> ExitCode {
    let Some(spec_path) = spec.or(path) else {
        return fail_io("no specification given");
    };
    match spec_or_exit(&spec_path, format) {
        Ok(_) => {
            emit(&render(&ValidationReport::new(Vec::new(), Stats::default()), format));
            ExitCode::from(EXIT_VALID)
        }
        Err(code) => code,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_VALID };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Validate { spec, mode, grounder_cmd, timeout, all_errors, valid_only, format, paths } => {
            validate(spec, mode, grounder_cmd, timeout, all_errors, valid_only, format, paths)
        }
        Command::Compile { spec, paths } => compile(spec, paths),
        Command::CheckSpec { spec, format, path } => check_spec(spec, path, format),
    }
}
