//! Diagnostics, reports and their text and JSON-lines renderings.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    SpecLoad,
    Before,
    Instance,
    After,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::SpecLoad => "spec-load",
            Phase::Before => "before",
            Phase::Instance => "instance",
            Phase::After => "after",
        }
    }
}

/// Machine-readable violation kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    WrongArity,
    WrongKind,
    Enum,
    Min,
    Max,
    Pattern,
    Having,
    HookFail,
    Count,
    SumPos,
    SumNeg,
    /// A hook or rule could not be evaluated (division by zero, unknown name).
    EvalError,
    /// The external grounder failed or produced unreadable output.
    GroundingError,
    /// The specification itself is malformed.
    InvalidSpec,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::WrongArity => "wrong-arity",
            RuleKind::WrongKind => "wrong-kind",
            RuleKind::Enum => "enum",
            RuleKind::Min => "min",
            RuleKind::Max => "max",
            RuleKind::Pattern => "pattern",
            RuleKind::Having => "having",
            RuleKind::HookFail => "hook-fail",
            RuleKind::Count => "count",
            RuleKind::SumPos => "sum-pos",
            RuleKind::SumNeg => "sum-neg",
            RuleKind::EvalError => "eval-error",
            RuleKind::GroundingError => "grounding-error",
            RuleKind::InvalidSpec => "invalid-spec",
        }
    }

    /// Kinds that make the verdict `spec-error` rather than `invalid`.
    pub fn is_spec_error(self) -> bool {
        matches!(self, RuleKind::EvalError | RuleKind::GroundingError | RuleKind::InvalidSpec)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Diagnostic {
    pub phase: Phase,
    pub symbol: String,
    /// Arity of the definition; 0 for spec-wide diagnostics.
    pub arity: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    pub rule: RuleKind,
    pub message: String,
}

impl Diagnostic {
    pub fn spec(symbol: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            phase: Phase::SpecLoad,
            symbol: symbol.into(),
            arity: 0,
            instance: None,
            rule: RuleKind::InvalidSpec,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.arity > 0 {
            write!(f, "{}/{}", self.symbol, self.arity)?;
        } else {
            f.write_str(&self.symbol)?;
        }
        write!(f, ": {}: {}", self.rule, self.message)?;
        if let Some(i) = &self.instance {
            write!(f, " [{i}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Valid,
    Invalid,
    SpecError,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
            Verdict::SpecError => "spec-error",
        }
    }

    pub fn of(diagnostics: &[Diagnostic]) -> Verdict {
        if diagnostics.is_empty() {
            Verdict::Valid
        } else if diagnostics.iter().any(|d| d.rule.is_spec_error()) {
            Verdict::SpecError
        } else {
            Verdict::Invalid
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    /// Instances checked per symbol.
    pub instances: BTreeMap<String, usize>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: Stats,
}

impl ValidationReport {
    pub fn new(diagnostics: Vec<Diagnostic>, stats: Stats) -> Self {
        ValidationReport { verdict: Verdict::of(&diagnostics), diagnostics, stats }
    }

    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }

    /// One diagnostic per line, then a verdict line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            out.push_str(&d.to_string());
            out.push('\n');
        }
        let checked: usize = self.stats.instances.values().sum();
        out.push_str(&format!(
            "{}: {} diagnostic(s), {} instance(s) checked\n",
            self.verdict.as_str(),
            self.diagnostics.len(),
            checked
        ));
        out
    }

    /// One JSON record per diagnostic followed by a summary record.
    /// Wall time is left out so equal runs give byte-identical output.
    pub fn to_json_lines(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            verdict: Verdict,
            diagnostics: usize,
            instances: &'a BTreeMap<String, usize>,
        }
        let mut out = String::new();
        for d in &self.diagnostics {
            out.push_str(&serde_json::to_string(d).expect("diagnostics serialize"));
            out.push('\n');
        }
        let summary = Summary {
            verdict: self.verdict,
            diagnostics: self.diagnostics.len(),
            instances: &self.stats.instances,
        };
        out.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag() -> Diagnostic {
        Diagnostic {
            phase: Phase::Instance,
            symbol: "income".into(),
            arity: 2,
            instance: Some("income(\"A\",-5)".into()),
            rule: RuleKind::Min,
            message: "Should be >= 0, but received -5".into(),
        }
    }

    #[test]
    fn text_line_format() {
        assert_eq!(
            diag().to_string(),
            "income/2: min: Should be >= 0, but received -5 [income(\"A\",-5)]"
        );
        assert_eq!(Diagnostic::spec("bday", "oops").to_string(), "bday: invalid-spec: oops");
    }

    #[test]
    fn verdicts() {
        assert_eq!(Verdict::of(&[]), Verdict::Valid);
        assert_eq!(Verdict::of(&[diag()]), Verdict::Invalid);
        assert_eq!(Verdict::of(&[diag(), Diagnostic::spec("x", "y")]), Verdict::SpecError);
    }

    #[test]
    fn json_lines() {
        let r = ValidationReport::new(vec![diag()], Stats::default());
        let text = r.to_json_lines();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["rule"], "min");
        assert_eq!(v["phase"], "instance");
        let s: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(s["verdict"], "invalid");
    }
}
