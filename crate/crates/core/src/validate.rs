//! Applies a specification to a set of ground atoms: prelude, before hooks,
//! instance collection, per-instance checks, then aggregate facets and
//! after hooks.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use regex::Regex;

use crate::datalog::{evaluate, parse_program, Program};
use crate::emit::{ground_with_external, GrounderBridgeConfig};
use crate::report::{Diagnostic, Phase, RuleKind, Stats, ValidationReport};
use crate::script::{
    cmp_text, parse_script, run_class_hook, run_instance_hook, run_prelude, ClassStore, Consts,
    HookError, Instance, Script, Value,
};
use crate::spec::{check_spec, Bounds, FieldDecl, FieldType, Primitive, UserDefinition, ValidationSpec};
use crate::term::{Fact, GroundTerm};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Mode {
    /// Rules are evaluated by the bundled Datalog engine.
    #[default]
    Builtin,
    /// Rules are grounded by an external program.
    Bridge(GrounderBridgeConfig),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: Mode,
    pub fail_fast: bool,
    /// Only validate; do not hand the atom set back for output.
    pub valid_only: bool,
    pub report_format: ReportFormat,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { mode: Mode::Builtin, fail_fast: true, valid_only: false, report_format: ReportFormat::Text }
    }
}

/// What the run is applied to.
#[derive(Debug, Clone)]
pub enum Input<'a> {
    Facts(Vec<Fact>),
    /// Program text; may contain rules.
    Program(&'a str),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ValidationReport,
    /// The instance set that was validated; empty when grounding failed or
    /// `valid_only` was set.
    pub atoms: BTreeSet<Fact>,
}

/// Two's-complement wrap into 32 bits, the value a 32-bit grounder would
/// report for `n`.
pub fn wrap32(n: &BigInt) -> i32 {
    let modulus = BigInt::from(1u64 << 32);
    let mut r = n.mod_floor(&modulus);
    if r >= BigInt::from(1u64 << 31) {
        r -= modulus;
    }
    r.to_i32().expect("value in 32-bit range")
}

/// Per-symbol aggregates collected while checking instances.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccumulatorStore {
    /// Distinct top-level atoms checked and accepted, per symbol.
    pub count: BTreeMap<String, usize>,
    /// Sum of strictly positive values per (symbol, field).
    pub sum_pos: BTreeMap<(String, String), BigInt>,
    /// Sum of strictly negative values per (symbol, field).
    pub sum_neg: BTreeMap<(String, String), BigInt>,
}

struct Prepared {
    def: UserDefinition,
    before: Option<Script>,
    after_init: Option<Script>,
    after_grounding: Option<Script>,
    patterns: Vec<Option<Regex>>,
    /// `after_grounding` reads `self`, so accepted instances are kept.
    sweep: bool,
}

impl Prepared {
    fn new(def: &UserDefinition) -> Result<Prepared, Diagnostic> {
        let parse = |key: &str, text: &Option<String>| -> Result<Option<Script>, Diagnostic> {
            text.as_deref()
                .map(parse_script)
                .transpose()
                .map_err(|e| Diagnostic::spec(&def.symbol, format!("at `{}.valasp.{key}`: {e}", def.symbol)))
        };
        let after_grounding = parse("after_grounding", &def.after_grounding)?;
        let patterns = def
            .fields
            .iter()
            .map(|f| {
                f.facets.pattern.as_ref().map(|p| {
                    Regex::new(&format!("^(?:{p})$")).map_err(|e| {
                        Diagnostic::spec(&def.symbol, format!("at `{}.{}.pattern`: {e}", def.symbol, f.name))
                    })
                })
                .transpose()
            })
            .collect::<Result<_, _>>()?;
        Ok(Prepared {
            before: parse("before_grounding", &def.before_grounding)?,
            after_init: parse("after_init", &def.after_init)?,
            sweep: after_grounding.as_ref().is_some_and(Script::uses_self),
            after_grounding,
            patterns,
            def: def.clone(),
        })
    }
}

/// A failed check inside one instance.
struct Failure {
    rule: RuleKind,
    message: String,
}

impl Failure {
    fn new(rule: RuleKind, message: impl Into<String>) -> Failure {
        Failure { rule, message: message.into() }
    }

    fn in_field(self, field: &str) -> Failure {
        Failure { rule: self.rule, message: format!("field {field}: {}", self.message) }
    }
}

fn hook_failure(e: HookError) -> Failure {
    match e {
        HookError::Fail(m) => Failure::new(RuleKind::HookFail, m),
        HookError::Eval(m) => Failure::new(RuleKind::EvalError, m),
    }
}

fn value_of(t: &GroundTerm) -> Value {
    match t {
        GroundTerm::Number(n) => Value::Int(n.clone()),
        GroundTerm::Str(s) => Value::Str(s.clone()),
        other => Value::Term(other.clone()),
    }
}

fn render_enum(values: &[GroundTerm]) -> String {
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn within(bounds: &Bounds, n: &BigInt) -> bool {
    bounds.min.as_ref().is_none_or(|lo| n >= lo) && bounds.max.as_ref().is_none_or(|hi| n <= hi)
}

fn render_bounds(b: &Bounds) -> String {
    let side = |v: &Option<BigInt>, open: &str| v.as_ref().map_or(open.to_string(), |n| n.to_string());
    format!("[{}, {}]", side(&b.min, "-inf"), side(&b.max, "+inf"))
}

/// One validation run: owns the class store, prelude constants and
/// accumulators.
pub struct Session {
    defs: IndexMap<String, Prepared>,
    prelude: Option<Script>,
    store: ClassStore,
    consts: Consts,
    acc: AccumulatorStore,
    kept: BTreeMap<String, Vec<Instance>>,
}

impl Session {
    /// Prepares a session; fails with spec diagnostics if the specification
    /// does not pass [`check_spec`].
    pub fn new(spec: &ValidationSpec) -> Result<Session, Vec<Diagnostic>> {
        let diags = check_spec(spec);
        if !diags.is_empty() {
            return Err(diags);
        }
        let prelude = match spec.prelude.as_deref().map(parse_script).transpose() {
            Ok(p) => p,
            Err(e) => return Err(vec![Diagnostic::spec("valasp", format!("at `valasp.script`: {e}"))]),
        };
        let mut defs = IndexMap::new();
        for (name, def) in &spec.definitions {
            defs.insert(name.clone(), Prepared::new(def).map_err(|d| vec![d])?);
        }
        let store = ClassStore::new(spec.definitions.keys().map(String::as_str));
        Ok(Session { defs, prelude, store, consts: Consts::new(), acc: AccumulatorStore::default(), kept: BTreeMap::new() })
    }

    pub fn accumulators(&self) -> &AccumulatorStore {
        &self.acc
    }

    pub fn class_store(&self) -> &ClassStore {
        &self.store
    }

    fn diag(&self, phase: Phase, symbol: &str, instance: Option<&Fact>, f: Failure) -> Diagnostic {
        Diagnostic {
            phase,
            symbol: symbol.to_string(),
            arity: self.defs.get(symbol).map_or(0, |p| p.def.arity()),
            instance: instance.map(|i| i.to_string()),
            rule: f.rule,
            message: f.message,
        }
    }

    /// Step 1: runs the global script; its assignments become constants.
    pub fn prelude(&mut self) -> Vec<Diagnostic> {
        let Some(script) = &self.prelude else { return Vec::new() };
        match run_prelude(script, &mut self.store) {
            Ok(consts) => {
                self.consts = consts;
                Vec::new()
            }
            Err(e) => vec![self.diag(Phase::Before, "valasp", None, hook_failure(e))],
        }
    }

    /// Step 2: runs `before_grounding` for `symbol`.
    pub fn before(&mut self, symbol: &str) -> Vec<Diagnostic> {
        let Some(script) = self.defs.get(symbol).and_then(|p| p.before.as_ref()) else { return Vec::new() };
        match run_class_hook(script, &mut self.store, &self.consts, symbol, None) {
            Ok(()) => Vec::new(),
            Err(e) => vec![self.diag(Phase::Before, symbol, None, hook_failure(e))],
        }
    }

    /// Step 4 for one atom: arity, field kinds, facets, `having`, then
    /// `after_init`. Accepted atoms update the accumulators; a failure is
    /// reported once, against `fact`.
    pub fn check_instance(&mut self, symbol: &str, fact: &Fact) -> Vec<Diagnostic> {
        let Some(prepared) = self.defs.get(symbol) else {
            return vec![self.diag(
                Phase::Instance,
                symbol,
                Some(fact),
                Failure::new(RuleKind::InvalidSpec, format!("no definition for `{symbol}`")),
            )];
        };
        let keep = prepared.sweep;
        match self.check(symbol, &fact.args, keep) {
            Ok(instance) => {
                self.account(symbol, &fact.args);
                if let Some(i) = instance {
                    self.kept.entry(symbol.to_string()).or_default().push(i);
                }
                Vec::new()
            }
            Err(f) => vec![self.diag(Phase::Instance, symbol, Some(fact), f)],
        }
    }

    fn account(&mut self, symbol: &str, args: &[GroundTerm]) {
        *self.acc.count.entry(symbol.to_string()).or_default() += 1;
        let def = &self.defs[symbol].def;
        for (field, arg) in def.fields.iter().zip(args) {
            let fc = &field.facets;
            if fc.sum_pos.is_none() && fc.sum_neg.is_none() {
                continue;
            }
            let Some(n) = arg.as_number() else { continue };
            let key = (symbol.to_string(), field.name.clone());
            if fc.sum_pos.is_some() {
                let s = self.acc.sum_pos.entry(key.clone()).or_default();
                if n.is_positive() {
                    *s += n;
                }
            }
            if fc.sum_neg.is_some() {
                let s = self.acc.sum_neg.entry(key).or_default();
                if n.is_negative() {
                    *s += n;
                }
            }
        }
    }

    /// Checks `args` against `symbol`; builds the hook instance only when
    /// something will read it.
    fn check(&mut self, symbol: &str, args: &[GroundTerm], want: bool) -> Result<Option<Instance>, Failure> {
        let prepared = &self.defs[symbol];
        let arity = prepared.def.arity();
        if args.len() != arity {
            return Err(Failure::new(
                RuleKind::WrongArity,
                format!("{symbol} expects {arity} argument{}, found {}", if arity == 1 { "" } else { "s" }, args.len()),
            ));
        }
        let build = want || prepared.after_init.is_some();
        let fields: Vec<FieldDecl> = prepared.def.fields.clone();
        let mut values = IndexMap::new();
        for (i, (field, arg)) in fields.iter().zip(args).enumerate() {
            let v = self.check_field(symbol, i, field, arg, build).map_err(|f| f.in_field(&field.name))?;
            if let Some(v) = v {
                values.insert(field.name.clone(), v);
            }
        }
        let prepared = &self.defs[symbol];
        for h in &prepared.def.having {
            let lhs = &args[prepared.def.field(&h.lhs).expect("checked field").position];
            let rhs = &args[prepared.def.field(&h.rhs).expect("checked field").position];
            if !h.op.holds(lhs.cmp(rhs)) {
                return Err(Failure::new(RuleKind::Having, format!("Expected {} {} {}", h.lhs, cmp_text(h.op), h.rhs)));
            }
        }
        if !build {
            return Ok(None);
        }
        let mut instance = Instance {
            symbol: symbol.to_string(),
            term: GroundTerm::func(symbol, args.to_vec()),
            fields: values,
        };
        if let Some(script) = &prepared.after_init {
            run_instance_hook(script, &mut self.store, &self.consts, &mut instance).map_err(hook_failure)?;
        }
        Ok(Some(instance))
    }

    fn check_field(
        &mut self,
        symbol: &str,
        index: usize,
        field: &FieldDecl,
        arg: &GroundTerm,
        build: bool,
    ) -> Result<Option<Value>, Failure> {
        let fc = &field.facets;
        let wrong_kind = |expected: &str| {
            Failure::new(RuleKind::WrongKind, format!("expected {expected}, found {} {arg}", arg.kind_name()))
        };
        match &field.ty {
            FieldType::User(t) => {
                let nested_arity = self.defs[t.as_str()].def.arity();
                let nested_args = if nested_arity == 1 {
                    std::slice::from_ref(arg)
                } else {
                    match arg {
                        GroundTerm::Func { name, args } if name == t => args.as_slice(),
                        _ => return Err(wrong_kind(&format!("{t}(...)"))),
                    }
                };
                let inst = self.check(t, nested_args, build)?;
                return Ok(inst.map(|i| Value::Instance(Box::new(i))));
            }
            FieldType::Primitive(p) => {
                let text = match (p, arg) {
                    (Primitive::Integer, GroundTerm::Number(n)) => {
                        if let Some(lo) = &fc.min {
                            if n < lo {
                                return Err(Failure::new(RuleKind::Min, format!("Should be >= {lo}, but received {n}")));
                            }
                        }
                        if let Some(hi) = &fc.max {
                            if n > hi {
                                return Err(Failure::new(RuleKind::Max, format!("Should be <= {hi}, but received {n}")));
                            }
                        }
                        None
                    }
                    (Primitive::Integer, _) => return Err(wrong_kind("an integer")),
                    (Primitive::String, GroundTerm::Str(s)) => Some(s.as_str()),
                    (Primitive::String, _) => return Err(wrong_kind("a string")),
                    (Primitive::Alpha, GroundTerm::Const(c)) => Some(c.as_str()),
                    (Primitive::Alpha, _) => return Err(wrong_kind("a constant")),
                    (Primitive::Any, _) => None,
                };
                if let Some(values) = &fc.enum_values {
                    if !values.contains(arg) {
                        return Err(Failure::new(
                            RuleKind::Enum,
                            format!("Should be one of {}, but received {arg}", render_enum(values)),
                        ));
                    }
                }
                if let Some(text) = text {
                    let len = BigInt::from(text.chars().count());
                    if let Some(lo) = &fc.min {
                        if &len < lo {
                            return Err(Failure::new(RuleKind::Min, format!("Length should be >= {lo}, but received {len}")));
                        }
                    }
                    if let Some(hi) = &fc.max {
                        if &len > hi {
                            return Err(Failure::new(RuleKind::Max, format!("Length should be <= {hi}, but received {len}")));
                        }
                    }
                    if let Some(re) = &self.defs[symbol].patterns[index] {
                        if !re.is_match(text) {
                            let p = fc.pattern.as_deref().unwrap_or_default();
                            return Err(Failure::new(RuleKind::Pattern, format!("Should match `{p}`, but received {arg}")));
                        }
                    }
                }
            }
        }
        Ok(build.then(|| value_of(arg)))
    }

    /// Step 5 for one symbol: `count`, `sum+`, `sum-`, then `after_grounding`.
    pub fn finalize(&mut self, symbol: &str) -> Vec<Diagnostic> {
        let mut out: Vec<Failure> = Vec::new();
        let Some(prepared) = self.defs.get(symbol) else { return Vec::new() };
        let def = &prepared.def;
        let count = BigInt::from(self.acc.count.get(symbol).copied().unwrap_or(0));
        for field in &def.fields {
            let fc = &field.facets;
            let key = (symbol.to_string(), field.name.clone());
            if let Some(b) = &fc.count {
                if !within(b, &count) {
                    out.push(Failure::new(
                        RuleKind::Count,
                        format!("Expected the number of {symbol} atoms in {}, but found {count}", render_bounds(b)),
                    ));
                }
            }
            if let Some(b) = &fc.sum_pos {
                let s = self.acc.sum_pos.get(&key).cloned().unwrap_or_default();
                if !within(b, &s) {
                    out.push(Failure::new(
                        RuleKind::SumPos,
                        format!("Sum of positive values of {} is {s}, outside {}", field.name, render_bounds(b)),
                    ));
                }
            }
            if let Some(b) = &fc.sum_neg {
                let s = self.acc.sum_neg.get(&key).cloned().unwrap_or_else(BigInt::zero);
                if !within(b, &s) {
                    out.push(Failure::new(
                        RuleKind::SumNeg,
                        format!("Sum of negative values of {} is {s}, outside {}", field.name, render_bounds(b)),
                    ));
                }
            }
        }
        let mut diags: Vec<Diagnostic> = out.into_iter().map(|f| self.diag(Phase::After, symbol, None, f)).collect();
        if !diags.is_empty() {
            return diags;
        }
        let prepared = &self.defs[symbol];
        let Some(script) = &prepared.after_grounding else { return diags };
        if prepared.sweep {
            let mut kept = self.kept.remove(symbol).unwrap_or_default();
            for inst in kept.iter_mut() {
                if let Err(e) = run_class_hook(script, &mut self.store, &self.consts, symbol, Some(inst)) {
                    let fact = Fact::from_term(inst.term.clone());
                    let mut d = self.diag(Phase::After, symbol, None, hook_failure(e));
                    d.instance = fact.map(|f| f.to_string());
                    diags.push(d);
                    break;
                }
            }
            self.kept.insert(symbol.to_string(), kept);
        } else if let Err(e) = run_class_hook(script, &mut self.store, &self.consts, symbol, None) {
            diags.push(self.diag(Phase::After, symbol, None, hook_failure(e)));
        }
        diags
    }
}

fn grounding_error(message: String) -> Diagnostic {
    Diagnostic {
        phase: Phase::Before,
        symbol: "valasp".into(),
        arity: 0,
        instance: None,
        rule: RuleKind::GroundingError,
        message,
    }
}

fn render_facts(facts: &[Fact]) -> String {
    let mut out = String::with_capacity(facts.len() * 16);
    for f in facts {
        out.push_str(&f.to_string());
        out.push_str(".\n");
    }
    out
}

/// Step 3: the instance set.
fn instances(spec: &ValidationSpec, input: Input<'_>, mode: &Mode) -> Result<BTreeSet<Fact>, Diagnostic> {
    let aux = spec.asp.as_deref().unwrap_or("");
    match mode {
        Mode::Bridge(config) => {
            let text = match input {
                Input::Facts(facts) => render_facts(&facts),
                Input::Program(p) => p.to_string(),
            };
            ground_with_external(&format!("{text}\n{aux}\n"), config).map_err(|e| grounding_error(e.to_string()))
        }
        Mode::Builtin => {
            let mut program = match spec.asp.as_deref() {
                Some(a) => parse_program(a).map_err(|e| grounding_error(format!("in `valasp.asp`: {e}")))?,
                None => Program::default(),
            };
            let facts = match input {
                Input::Facts(facts) => facts,
                Input::Program(text) => {
                    program.extend(parse_program(text).map_err(|e| grounding_error(format!("in input: {e}")))?);
                    Vec::new()
                }
            };
            if program.rules.is_empty() {
                return Ok(facts.into_iter().collect());
            }
            evaluate(&program, facts).map_err(|e| Diagnostic { rule: RuleKind::EvalError, ..grounding_error(e.to_string()) })
        }
    }
}

/// Applies `spec` to ground facts.
pub fn run(spec: &ValidationSpec, facts: impl IntoIterator<Item = Fact>, options: &RunOptions) -> ValidationReport {
    run_input(spec, Input::Facts(facts.into_iter().collect()), options).report
}

/// Applies `spec` to facts or a program, following the five steps in order.
/// Fail-fast mode stops at the first diagnostic.
pub fn run_input(spec: &ValidationSpec, input: Input<'_>, options: &RunOptions) -> Outcome {
    let started = Instant::now();
    let mut stats = Stats::default();
    let finish = |diags: Vec<Diagnostic>, mut stats: Stats, atoms: BTreeSet<Fact>| {
        stats.wall_time = started.elapsed();
        Outcome { report: ValidationReport::new(diags, stats), atoms }
    };
    let mut session = match Session::new(spec) {
        Ok(s) => s,
        Err(d) => return finish(d, stats, BTreeSet::new()),
    };
    let mut diags = Vec::new();
    let stop = |diags: &Vec<Diagnostic>| options.fail_fast && !diags.is_empty();

    diags.extend(session.prelude());
    if !stop(&diags) {
        for symbol in spec.definitions.keys() {
            diags.extend(session.before(symbol));
            if stop(&diags) {
                break;
            }
        }
    }
    if stop(&diags) || diags.iter().any(|d| d.rule.is_spec_error()) {
        diags.truncate(if options.fail_fast { 1 } else { diags.len() });
        return finish(diags, stats, BTreeSet::new());
    }

    let atoms = match instances(spec, input, &options.mode) {
        Ok(a) => a,
        Err(d) => {
            diags.push(d);
            return finish(diags, stats, BTreeSet::new());
        }
    };

    let mut symbols: Vec<&String> = spec.definitions.keys().collect();
    symbols.sort();
    'outer: for symbol in symbols {
        let arity = spec.definitions[symbol].arity();
        let start = Fact::new(symbol.clone(), Vec::new());
        let mut checked = 0;
        for fact in atoms.range(start..).take_while(|f| f.predicate == *symbol) {
            if fact.arity() != arity {
                continue;
            }
            checked += 1;
            diags.extend(session.check_instance(symbol, fact));
            if stop(&diags) {
                stats.instances.insert(symbol.clone(), checked);
                break 'outer;
            }
        }
        stats.instances.insert(symbol.clone(), checked);
    }
    if !stop(&diags) {
        for symbol in spec.definitions.keys() {
            diags.extend(session.finalize(symbol));
            if stop(&diags) {
                break;
            }
        }
    }
    if options.fail_fast {
        diags.truncate(1);
    }
    let atoms = if options.valid_only { BTreeSet::new() } else { atoms };
    finish(diags, stats, atoms)
}
