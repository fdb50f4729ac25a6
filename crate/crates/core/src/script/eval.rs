//! Evaluation of hook scripts against an instance and a class store.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use super::parse::parse_expr;
use super::{ArithOp, Expr, FPart, Relation, Script, Stmt, StmtKind, Target};
use crate::term::GroundTerm;

const MAX_EXPONENT: u32 = 65_536;

/// Prelude constants, visible to every hook by name.
pub type Consts = IndexMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub symbol: String,
    pub term: GroundTerm,
    /// Declared fields in order, then attributes assigned by hooks.
    pub fields: IndexMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    None,
    Bool(bool),
    Int(BigInt),
    Str(String),
    Term(GroundTerm),
    Instance(Box<Instance>),
    List(Vec<Value>),
    Class(String),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::None => "None",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "str",
            Value::Term(_) => "term",
            Value::Instance(_) => "instance",
            Value::List(_) => "list",
            Value::Class(_) => "class",
        }
    }

    fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(n) => !n.is_zero(),
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.is_empty(),
            Value::Term(_) | Value::Instance(_) | Value::Class(_) => true,
        }
    }

    fn as_term(&self) -> Option<GroundTerm> {
        match self {
            Value::Int(n) => Some(GroundTerm::Number(n.clone())),
            Value::Str(s) => Some(GroundTerm::Str(s.clone())),
            Value::Term(t) => Some(t.clone()),
            Value::Instance(i) => Some(i.term.clone()),
            _ => None,
        }
    }

    fn repr(&self) -> String {
        match self {
            Value::Str(s) => format!("'{s}'"),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::None => f.write_str("None"),
            Value::Bool(true) => f.write_str("True"),
            Value::Bool(false) => f.write_str("False"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => f.write_str(s),
            Value::Term(t) => write!(f, "{t}"),
            Value::Instance(i) => write!(f, "{}", i.term),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&v.repr())?;
                }
                f.write_str("]")
            }
            Value::Class(c) => f.write_str(&class_name(c)),
        }
    }
}

/// `Fail` means the data is invalid; `Eval` means the hook itself is broken.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HookError {
    #[error("{0}")]
    Fail(String),
    #[error("{0}")]
    Eval(String),
}

/// Class-level attributes per symbol, shared by all hooks of one run.
#[derive(Debug, Clone, Default)]
pub struct ClassStore {
    attrs: HashMap<String, IndexMap<String, Value>>,
    classes: HashMap<String, String>,
}

/// Capitalizes the first lowercase letter: `income` -> `Income`,
/// `__in_range` -> `__In_range`.
pub fn class_name(symbol: &str) -> String {
    let mut done = false;
    symbol
        .chars()
        .map(|c| {
            if !done && c.is_ascii_lowercase() {
                done = true;
                c.to_ascii_uppercase()
            } else {
                c
            }
        })
        .collect()
}

impl ClassStore {
    pub fn new<'a>(symbols: impl IntoIterator<Item = &'a str>) -> Self {
        let classes = symbols.into_iter().map(|s| (class_name(s), s.to_string())).collect();
        ClassStore { attrs: HashMap::new(), classes }
    }

    pub fn get(&self, symbol: &str, name: &str) -> Option<&Value> {
        self.attrs.get(symbol)?.get(name)
    }

    pub fn set(&mut self, symbol: &str, name: &str, value: Value) {
        self.attrs.entry(symbol.to_string()).or_default().insert(name.to_string(), value);
    }

    pub fn get_mut(&mut self, symbol: &str, name: &str) -> Option<&mut Value> {
        self.attrs.get_mut(symbol)?.get_mut(name)
    }
}

struct Scope<'a> {
    store: &'a mut ClassStore,
    consts: &'a Consts,
    own: Option<&'a str>,
    this: Option<&'a mut Instance>,
    locals: HashMap<String, Value>,
    line: usize,
}

type R<T> = Result<T, HookError>;

fn eval_err<T>(line: usize, msg: impl fmt::Display) -> R<T> {
    Err(HookError::Eval(format!("line {line}: {msg}")))
}

impl Scope<'_> {
    fn err<T>(&self, msg: impl fmt::Display) -> R<T> {
        eval_err(self.line, msg)
    }

    fn exec_block(&mut self, stmts: &[Stmt]) -> R<()> {
        for s in stmts {
            self.exec(s)?;
        }
        Ok(())
    }

    fn exec(&mut self, stmt: &Stmt) -> R<()> {
        self.line = stmt.line;
        match &stmt.kind {
            StmtKind::Import | StmtKind::Pass => Ok(()),
            StmtKind::Assign(t, e) => {
                let v = self.eval(e)?;
                self.assign(t, v)
            }
            StmtKind::Update(t, op, e) => {
                let rhs = self.eval(e)?;
                let cur = self.read_target(t)?;
                let v = self.arith(*op, cur, rhs)?;
                self.assign(t, v)
            }
            StmtKind::If(arms, other) => {
                for (cond, body) in arms {
                    if self.eval(cond)?.truthy() {
                        return self.exec_block(body);
                    }
                    self.line = stmt.line;
                }
                match other {
                    Some(body) => self.exec_block(body),
                    None => Ok(()),
                }
            }
            StmtKind::For(var, iter, body) => {
                let items = match self.eval(iter)? {
                    Value::List(items) => items,
                    Value::Term(GroundTerm::Tuple(args) | GroundTerm::Func { args, .. }) => {
                        args.into_iter().map(Value::Term).collect()
                    }
                    other => return self.err(format!("cannot iterate over {}", other.type_name())),
                };
                for item in items {
                    self.locals.insert(var.clone(), item);
                    self.exec_block(body)?;
                }
                Ok(())
            }
            StmtKind::Fail(msg) => {
                let text = match msg {
                    Some(e) => self.eval(e)?.to_string(),
                    None => "validation failed".to_string(),
                };
                Err(HookError::Fail(text))
            }
            StmtKind::Expr(e) => self.eval(e).map(|_| ()),
        }
    }

    fn read_target(&mut self, t: &Target) -> R<Value> {
        match t {
            Target::Local(n) => self.name(n),
            Target::Field(f) => match self.this.as_deref().and_then(|i| i.fields.get(f)) {
                Some(v) => Ok(v.clone()),
                None => self.err(format!("`self.{f}` is not set")),
            },
            Target::Class(n) => {
                let own = self.own_class()?;
                match self.store.get(own, n) {
                    Some(v) => Ok(v.clone()),
                    None => self.err(format!("class attribute `{}.{n}` is not set", class_name(own))),
                }
            }
        }
    }

    fn own_class(&self) -> R<&str> {
        match self.own {
            Some(s) => Ok(s),
            None => self.err("`cls` is not available in the prelude"),
        }
    }

    fn assign(&mut self, t: &Target, v: Value) -> R<()> {
        match t {
            Target::Local(n) => {
                self.locals.insert(n.clone(), v);
            }
            Target::Field(f) => match self.this.as_deref_mut() {
                Some(i) => {
                    i.fields.insert(f.clone(), v);
                }
                None => return self.err("`self` is not available here"),
            },
            Target::Class(n) => {
                let own = self.own_class()?.to_string();
                self.store.set(&own, n, v);
            }
        }
        Ok(())
    }

    fn name(&self, n: &str) -> R<Value> {
        if let Some(v) = self.locals.get(n) {
            return Ok(v.clone());
        }
        match n {
            "self" => {
                return match self.this.as_deref() {
                    Some(i) => Ok(Value::Instance(Box::new(i.clone()))),
                    None => self.err("`self` is not available here"),
                }
            }
            "cls" => return Ok(Value::Class(self.own_class()?.to_string())),
            _ => {}
        }
        if let Some(v) = self.consts.get(n) {
            return Ok(v.clone());
        }
        if let Some(sym) = self.store.classes.get(n) {
            return Ok(Value::Class(sym.clone()));
        }
        self.err(format!("unknown name `{n}`"))
    }

    fn eval(&mut self, e: &Expr) -> R<Value> {
        Ok(match e {
            Expr::Int(n) => Value::Int(n.clone()),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::None => Value::None,
            Expr::Format(parts) => {
                let mut out = String::new();
                for p in parts {
                    match p {
                        FPart::Lit(s) => out.push_str(s),
                        FPart::Expr(e) => out.push_str(&self.eval(e)?.to_string()),
                    }
                }
                Value::Str(out)
            }
            Expr::List(items) => {
                Value::List(items.iter().map(|i| self.eval(i)).collect::<R<_>>()?)
            }
            Expr::Name(n) => self.name(n)?,
            Expr::Attr(obj, field) => {
                // `self.f` reads the live instance without cloning it
                if matches!(&**obj, Expr::Name(n) if n == "self" && !self.locals.contains_key("self")) {
                    if let Some(i) = self.this.as_deref() {
                        if field == "__class__" {
                            return Ok(Value::Class(i.symbol.clone()));
                        }
                        return match i.fields.get(field) {
                            Some(v) => Ok(v.clone()),
                            None => self.err(format!("`{}` has no field `{field}`", class_name(&i.symbol))),
                        };
                    }
                }
                let v = self.eval(obj)?;
                self.attr(v, field)?
            }
            Expr::Call(callee, args) => self.call(callee, args)?,
            Expr::Index(obj, idx) => {
                let (obj, idx) = (self.eval(obj)?, self.eval(idx)?);
                self.index(obj, idx)?
            }
            Expr::Neg(a) => match self.eval(a)? {
                Value::Int(n) => Value::Int(-n),
                other => return self.err(format!("bad operand type for unary -: {}", other.type_name())),
            },
            Expr::Arith(op, a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                self.arith(*op, a, b)?
            }
            Expr::Compare(first, rest) => {
                let mut left = self.eval(first)?;
                for (rel, e) in rest {
                    let right = self.eval(e)?;
                    if !self.relation(*rel, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            Expr::And(a, b) => {
                let a = self.eval(a)?;
                if !a.truthy() {
                    a
                } else {
                    self.eval(b)?
                }
            }
            Expr::Or(a, b) => {
                let a = self.eval(a)?;
                if a.truthy() {
                    a
                } else {
                    self.eval(b)?
                }
            }
            Expr::Not(a) => Value::Bool(!self.eval(a)?.truthy()),
        })
    }

    fn attr(&self, v: Value, field: &str) -> R<Value> {
        match v {
            Value::Instance(i) => {
                if field == "__class__" {
                    return Ok(Value::Class(i.symbol));
                }
                match i.fields.get(field) {
                    Some(v) => Ok(v.clone()),
                    None => self.err(format!("`{}` has no field `{field}`", class_name(&i.symbol))),
                }
            }
            Value::Class(sym) => match self.store.get(&sym, field) {
                Some(v) => Ok(v.clone()),
                None => self.err(format!("class attribute `{}.{field}` is not set", class_name(&sym))),
            },
            other => self.err(format!("{} has no attribute `{field}`", other.type_name())),
        }
    }

    fn index(&self, obj: Value, idx: Value) -> R<Value> {
        let Value::Int(i) = idx else {
            return self.err(format!("index must be an int, not {}", idx.type_name()));
        };
        let items: Vec<Value> = match obj {
            Value::List(items) => items,
            Value::Str(s) => s.chars().map(|c| Value::Str(c.to_string())).collect(),
            Value::Term(GroundTerm::Tuple(args) | GroundTerm::Func { args, .. }) => {
                args.into_iter().map(Value::Term).collect()
            }
            other => return self.err(format!("{} is not indexable", other.type_name())),
        };
        let len = BigInt::from(items.len());
        let pos = if i.is_negative() { &len + &i } else { i.clone() };
        match pos.to_usize().filter(|p| *p < items.len()) {
            Some(p) => Ok(items[p].clone()),
            None => self.err(format!("index {i} out of range")),
        }
    }

    fn arith(&self, op: ArithOp, a: Value, b: Value) -> R<Value> {
        match (op, a, b) {
            (_, Value::Int(x), Value::Int(y)) => Ok(Value::Int(self.int_op(op, &x, &y)?)),
            (ArithOp::Add, Value::Str(x), Value::Str(y)) => Ok(Value::Str(x + &y)),
            (ArithOp::Add, Value::List(mut x), Value::List(y)) => {
                x.extend(y);
                Ok(Value::List(x))
            }
            (op, a, b) => self.err(format!(
                "unsupported operand types for {op}: {} and {}",
                a.type_name(),
                b.type_name()
            )),
        }
    }

    fn int_op(&self, op: ArithOp, x: &BigInt, y: &BigInt) -> R<BigInt> {
        Ok(match op {
            ArithOp::Add => x + y,
            ArithOp::Sub => x - y,
            ArithOp::Mul => x * y,
            ArithOp::FloorDiv | ArithOp::Mod if y.is_zero() => {
                return self.err("integer division or modulo by zero")
            }
            ArithOp::FloorDiv => x.div_floor(y),
            ArithOp::Mod => x.mod_floor(y),
            ArithOp::Pow => {
                if y.is_negative() {
                    return self.err("negative exponent");
                }
                match y.to_u32().filter(|e| *e <= MAX_EXPONENT) {
                    Some(e) => num_traits::pow::Pow::pow(x, e),
                    None => return self.err("exponent too large"),
                }
            }
        })
    }

    fn relation(&self, rel: Relation, a: &Value, b: &Value) -> R<bool> {
        match rel {
            Relation::In | Relation::NotIn => {
                let found = match b {
                    Value::List(items) => items.iter().any(|i| values_equal(a, i)),
                    Value::Str(s) => match a {
                        Value::Str(needle) => s.contains(needle.as_str()),
                        _ => return self.err(format!("`in <str>` requires str, not {}", a.type_name())),
                    },
                    other => return self.err(format!("{} is not a container", other.type_name())),
                };
                Ok(found == (rel == Relation::In))
            }
            Relation::Cmp(op) => {
                use crate::datalog::CmpOp::*;
                if matches!(op, Eq | Ne) {
                    return Ok(values_equal(a, b) == (op == Eq));
                }
                Ok(op.holds(self.order(a, b)?))
            }
        }
    }

    fn order(&self, a: &Value, b: &Value) -> R<Ordering> {
        match (a, b) {
            (Value::Int(x), Value::Int(y)) => Ok(x.cmp(y)),
            (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
            _ => match (a.as_term(), b.as_term()) {
                (Some(x), Some(y)) => Ok(x.cmp(&y)),
                _ => self.err(format!("cannot order {} and {}", a.type_name(), b.type_name())),
            },
        }
    }

    fn call(&mut self, callee: &Expr, args: &[Expr]) -> R<Value> {
        if let Expr::Attr(obj, method) = callee {
            if method == "append" {
                let [arg] = args else {
                    return self.err("append() takes exactly one argument");
                };
                let v = self.eval(arg)?;
                return self.append(obj, v);
            }
            if matches!(&**obj, Expr::Name(n) if n == "datetime") && (method == "datetime" || method == "date") {
                return self.builtin("valid_date", args);
            }
        }
        if let Expr::Name(n) = callee {
            if !self.locals.contains_key(n) {
                return self.builtin(n, args);
            }
        }
        self.err("only builtin functions and list.append can be called")
    }

    fn append(&mut self, obj: &Expr, v: Value) -> R<Value> {
        let slot: &mut Value = match obj {
            Expr::Name(n) if self.locals.contains_key(n) => self.locals.get_mut(n).unwrap(),
            Expr::Attr(inner, name) => {
                let owner = self.eval(inner)?;
                match owner {
                    Value::Class(sym) => match self.store.get_mut(&sym, name) {
                        Some(slot) => slot,
                        None => {
                            return self.err(format!(
                                "class attribute `{}.{name}` is not set",
                                class_name(&sym)
                            ))
                        }
                    },
                    _ if matches!(&**inner, Expr::Name(s) if s == "self") => {
                        let line = self.line;
                        match self.this.as_deref_mut().and_then(|i| i.fields.get_mut(name)) {
                            Some(slot) => slot,
                            None => return eval_err(line, format!("`self.{name}` is not set")),
                        }
                    }
                    other => return self.err(format!("{} has no list attribute `{name}`", other.type_name())),
                }
            }
            _ => return self.err("append() needs a local list or a class attribute"),
        };
        match slot {
            Value::List(items) => {
                items.push(v);
                Ok(Value::None)
            }
            other => {
                let t = other.type_name();
                eval_err(self.line, format!("cannot append to {t}"))
            }
        }
    }

    fn builtin(&mut self, name: &str, args: &[Expr]) -> R<Value> {
        let vals: Vec<Value> = args.iter().map(|a| self.eval(a)).collect::<R<_>>()?;
        let arity = |n: usize| -> R<()> {
            if vals.len() == n {
                Ok(())
            } else {
                eval_err(self.line, format!("{name}() takes {n} argument(s), {} given", vals.len()))
            }
        };
        match name {
            "valid_date" => {
                arity(3)?;
                let nums: Vec<&BigInt> = vals
                    .iter()
                    .map(|v| match v {
                        Value::Int(n) => Ok(n),
                        other => eval_err(self.line, format!("valid_date() expects ints, got {}", other.type_name())),
                    })
                    .collect::<R<_>>()?;
                if valid_date(nums[0], nums[1], nums[2]) {
                    Ok(Value::Bool(true))
                } else {
                    Err(HookError::Fail(format!(
                        "no such calendar date: year {}, month {}, day {}",
                        nums[0], nums[1], nums[2]
                    )))
                }
            }
            "len" => {
                arity(1)?;
                let n = match &vals[0] {
                    Value::Str(s) => s.chars().count(),
                    Value::List(l) => l.len(),
                    Value::Term(GroundTerm::Tuple(a) | GroundTerm::Func { args: a, .. }) => a.len(),
                    other => return self.err(format!("{} has no len()", other.type_name())),
                };
                Ok(Value::Int(n.into()))
            }
            "match" => {
                arity(2)?;
                let (Value::Str(text), Value::Str(pat)) = (&vals[0], &vals[1]) else {
                    return self.err("match() expects two strings");
                };
                match regex::Regex::new(&format!("^(?:{pat})$")) {
                    Ok(re) => Ok(Value::Bool(re.is_match(text))),
                    Err(e) => self.err(format!("bad pattern: {e}")),
                }
            }
            "append_snapshot" => {
                arity(0)?;
                let Some(this) = self.this.as_deref() else {
                    return self.err("append_snapshot() needs `self`");
                };
                let snap = Value::Instance(Box::new(this.clone()));
                let own = self.own_class()?.to_string();
                match self.store.get_mut(&own, "snapshots") {
                    Some(Value::List(items)) => items.push(snap),
                    Some(_) => return self.err("`cls.snapshots` is not a list"),
                    None => self.store.set(&own, "snapshots", Value::List(vec![snap])),
                }
                Ok(Value::None)
            }
            "str" => {
                arity(1)?;
                Ok(Value::Str(vals[0].to_string()))
            }
            "abs" => {
                arity(1)?;
                match &vals[0] {
                    Value::Int(n) => Ok(Value::Int(n.abs())),
                    other => self.err(format!("bad operand type for abs(): {}", other.type_name())),
                }
            }
            _ => self.err(format!("unknown function `{name}`")),
        }
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::List(x), Value::List(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_equal(p, q))
        }
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::None, Value::None) => true,
        (Value::Class(x), Value::Class(y)) => x == y,
        _ => match (a.as_term(), b.as_term()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

/// Proleptic Gregorian calendar check with year in 1..=9999.
pub fn valid_date(year: &BigInt, month: &BigInt, day: &BigInt) -> bool {
    let (Some(y), Some(m), Some(d)) = (year.to_i64(), month.to_i64(), day.to_i64()) else {
        return false;
    };
    if !(1..=9999).contains(&y) || !(1..=12).contains(&m) {
        return false;
    }
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let days = match m {
        2 if leap => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    };
    (1..=days).contains(&d)
}

fn run(
    script: &Script,
    store: &mut ClassStore,
    consts: &Consts,
    own: Option<&str>,
    this: Option<&mut Instance>,
) -> Result<HashMap<String, Value>, HookError> {
    let mut scope = Scope { store, consts, own, this, locals: HashMap::new(), line: 1 };
    scope.exec_block(&script.stmts)?;
    Ok(scope.locals)
}

/// Runs the global prelude; its top-level assignments become constants.
pub fn run_prelude(script: &Script, store: &mut ClassStore) -> Result<Consts, HookError> {
    let empty = Consts::new();
    let locals = run(script, store, &empty, None, None)?;
    let mut names: Vec<_> = locals.into_iter().collect();
    names.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(names.into_iter().collect())
}

/// Runs an `after_init` (or `having`) script on one instance.
pub fn run_instance_hook(
    script: &Script,
    store: &mut ClassStore,
    consts: &Consts,
    instance: &mut Instance,
) -> Result<(), HookError> {
    let symbol = instance.symbol.clone();
    run(script, store, consts, Some(&symbol), Some(instance)).map(|_| ())
}

/// Runs a `before_grounding` or `after_grounding` script for `symbol`,
/// optionally bound to one stored instance as `self`.
pub fn run_class_hook(
    script: &Script,
    store: &mut ClassStore,
    consts: &Consts,
    symbol: &str,
    this: Option<&mut Instance>,
) -> Result<(), HookError> {
    run(script, store, consts, Some(symbol), this).map(|_| ())
}

/// Evaluates a constant integer expression such as `2**31-1`.
pub fn eval_const(text: &str) -> Result<BigInt, String> {
    let expr = parse_expr(text).map_err(|e| e.to_string())?;
    let mut store = ClassStore::default();
    let consts = Consts::new();
    let mut scope = Scope { store: &mut store, consts: &consts, own: None, this: None, locals: HashMap::new(), line: 1 };
    match scope.eval(&expr) {
        Ok(Value::Int(n)) => Ok(n),
        Ok(other) => Err(format!("expected an integer, found {}", other.type_name())),
        Err(e) => Err(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_script;
    use super::*;

    fn int(n: i64) -> Value {
        Value::Int(n.into())
    }

    fn instance(symbol: &str, fields: &[(&str, Value)]) -> Instance {
        let args = fields.iter().map(|(_, v)| v.as_term().unwrap()).collect();
        Instance {
            symbol: symbol.into(),
            term: GroundTerm::func(symbol, args),
            fields: fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    fn on(src: &str, inst: &mut Instance) -> Result<(), HookError> {
        let mut store = ClassStore::new([inst.symbol.as_str()]);
        run_instance_hook(&parse_script(src).unwrap(), &mut store, &Consts::new(), inst)
    }

    #[test]
    fn date_script() {
        let src = "valid_date(self.year, self.month, self.day)";
        let mut ok = instance("date", &[("year", int(1982)), ("month", int(12)), ("day", int(3))]);
        assert_eq!(on(src, &mut ok), Ok(()));
        let mut bad = instance("date", &[("year", int(2019)), ("month", int(2)), ("day", int(30))]);
        match on(src, &mut bad) {
            Err(HookError::Fail(m)) => assert!(m.starts_with("no such calendar date"), "{m}"),
            other => panic!("{other:?}"),
        }
        let mut alias = instance("date", &[("year", int(2020)), ("month", int(2)), ("day", int(29))]);
        assert_eq!(on("datetime.datetime(self.year, self.month, self.day)", &mut alias), Ok(()));
    }

    #[test]
    fn divisible_by_fifty() {
        let src = "if self.maxbitrate % 50 != 0: fail(f'maxbitrate {self.maxbitrate} is not divisible by 50')";
        let mut i = instance("user", &[("maxbitrate", int(8725))]);
        assert_eq!(on(src, &mut i), Err(HookError::Fail("maxbitrate 8725 is not divisible by 50".into())));
        let mut i = instance("user", &[("maxbitrate", int(8600))]);
        assert_eq!(on(src, &mut i), Ok(()));
    }

    #[test]
    fn floor_semantics() {
        assert_eq!(eval_const("-7 // 2"), Ok((-4).into()));
        assert_eq!(eval_const("-7 % 2"), Ok(1.into()));
        assert_eq!(eval_const("2**31-1"), Ok(2147483647.into()));
        assert_eq!(eval_const("-2**31"), Ok((-2147483648i64).into()));
        assert!(eval_const("1 // 0").unwrap_err().contains("zero"));
        assert!(eval_const("'a'").is_err());
    }

    #[test]
    fn accumulators_and_sweep() {
        let mut store = ClassStore::new(["income"]);
        let consts = Consts::new();
        let before = parse_script("cls.sum_positive_of_amount = 0").unwrap();
        run_class_hook(&before, &mut store, &consts, "income", None).unwrap();
        let init = parse_script("if self.amount > 0:\n    self.__class__.sum_positive_of_amount += self.amount\n").unwrap();
        for _ in 0..2 {
            let mut i = instance("income", &[("company", Value::Str("A".into())), ("amount", int(1_500_000_000))]);
            run_instance_hook(&init, &mut store, &consts, &mut i).unwrap();
        }
        assert_eq!(store.get("income", "sum_positive_of_amount"), Some(&int(3_000_000_000)));
        let after = parse_script(
            "if cls.sum_positive_of_amount > 2147483647:\n    raise ValueError('sum of amount in income may exceed 2147483647')\n",
        )
        .unwrap();
        assert_eq!(
            run_class_hook(&after, &mut store, &consts, "income", None),
            Err(HookError::Fail("sum of amount in income may exceed 2147483647".into()))
        );
    }

    #[test]
    fn knight_bound_sweep() {
        let mut store = ClassStore::new(["size", "__in_range"]);
        let consts = Consts::new();
        let mut size = instance("size", &[("value", int(8))]);
        run_instance_hook(
            &parse_script("if self.value % 2 != 0:\n    raise ValueError('Size must be an even number')\nself.__class__.value = self.value\n").unwrap(),
            &mut store, &consts, &mut size,
        )
        .unwrap();
        run_class_hook(&parse_script("cls.post_check = []").unwrap(), &mut store, &consts, "__in_range", None).unwrap();
        let mv = GroundTerm::func("givenmove", vec![GroundTerm::number(9), GroundTerm::number(5), GroundTerm::number(8), GroundTerm::number(7)]);
        let mut el = Instance {
            symbol: "__in_range".into(),
            term: GroundTerm::func("__in_range", vec![GroundTerm::number(9), mv.clone()]),
            fields: [("x".to_string(), int(9)), ("source".to_string(), Value::Term(mv))].into_iter().collect(),
        };
        run_instance_hook(&parse_script("self.__class__.post_check.append(self)").unwrap(), &mut store, &consts, &mut el).unwrap();
        let after = parse_script(
            "for el in cls.post_check:\n  if el.x > Size.value:\n    raise ValueError(f'Value out of bound in {el.source}: {el.x}')\n",
        )
        .unwrap();
        assert_eq!(
            run_class_hook(&after, &mut store, &consts, "__in_range", None),
            Err(HookError::Fail("Value out of bound in givenmove(9,5,8,7): 9".into()))
        );
    }

    #[test]
    fn having_script_uses_term_order() {
        let s = Script::having("x", crate::datalog::CmpOp::Lt, "y");
        let mut ok = instance("label", &[("x", int(1)), ("y", int(2))]);
        assert_eq!(on_script(&s, &mut ok), Ok(()));
        let mut bad = instance("label", &[("x", int(3)), ("y", int(2))]);
        assert_eq!(on_script(&s, &mut bad), Err(HookError::Fail("Expected x < y".into())));
        let node = |n: i64| {
            Value::Instance(Box::new(instance("node", &[("value", int(n))])))
        };
        let mut nested = instance("label", &[("x", node(4)), ("y", node(10))]);
        assert_eq!(on_script(&s, &mut nested), Ok(()));
        let eq = Script::having("a", crate::datalog::CmpOp::Eq, "a");
        let mut any = instance("p", &[("a", Value::Term(GroundTerm::string("z")))]);
        assert_eq!(on_script(&eq, &mut any), Ok(()));
    }

    fn on_script(s: &Script, inst: &mut Instance) -> Result<(), HookError> {
        let mut store = ClassStore::new([inst.symbol.as_str()]);
        run_instance_hook(s, &mut store, &Consts::new(), inst)
    }

    #[test]
    fn eval_errors_are_distinct_from_failures() {
        let mut i = instance("p", &[("a", int(1))]);
        assert!(matches!(on("x = self.a // 0", &mut i), Err(HookError::Eval(m)) if m.contains("line 1")));
        assert!(matches!(on("y = nope", &mut i), Err(HookError::Eval(m)) if m.contains("unknown name `nope`")));
        assert!(matches!(on("y = self.b", &mut i), Err(HookError::Eval(_))));
        assert!(matches!(on("y = 'a' + 1", &mut i), Err(HookError::Eval(_))));
        assert!(matches!(on("cls.missing += 1", &mut i), Err(HookError::Eval(_))));
    }

    #[test]
    fn builtins() {
        let mut i = instance("p", &[("s", Value::Str("abc".into()))]);
        assert_eq!(on("if len(self.s) != 3: fail('len')", &mut i), Ok(()));
        assert_eq!(on("if not match(self.s, '[a-c]+'): fail('match')", &mut i), Ok(()));
        assert_eq!(on("if match(self.s, 'b'): fail('anchored')", &mut i), Ok(()));
        assert_eq!(on("if self.s not in ['abc', 'd']: fail('in')", &mut i), Ok(()));
        assert_eq!(on("if str(abs(-3)) + 'x' != '3x': fail('str')", &mut i), Ok(()));
        assert_eq!(on("xs = [1]\nxs.append(2)\nif len(xs) != 2 or xs[-1] != 2: fail('append')", &mut i), Ok(()));
        assert_eq!(on("fail(f'{[1, \"a\"]} {True} {None}')", &mut i), Err(HookError::Fail("[1, 'a'] True None".into())));
    }

    #[test]
    fn snapshots() {
        let mut store = ClassStore::new(["p"]);
        let consts = Consts::new();
        let s = parse_script("append_snapshot()").unwrap();
        for n in 0..3 {
            let mut i = instance("p", &[("a", int(n))]);
            run_instance_hook(&s, &mut store, &consts, &mut i).unwrap();
        }
        let Some(Value::List(items)) = store.get("p", "snapshots") else { panic!() };
        assert_eq!(items.len(), 3);
    }

    #[test]
    fn prelude_defines_constants() {
        let mut store = ClassStore::default();
        let consts = run_prelude(&parse_script("import datetime\nLIMIT = 2**31 - 1\n").unwrap(), &mut store).unwrap();
        assert_eq!(consts.get("LIMIT"), Some(&int(2147483647)));
        let mut i = instance("p", &[("a", int(5))]);
        let script = parse_script("if self.a > LIMIT: fail('big')").unwrap();
        assert_eq!(run_instance_hook(&script, &mut store, &consts, &mut i), Ok(()));
    }

    #[test]
    fn class_name_rule() {
        assert_eq!(class_name("income"), "Income");
        assert_eq!(class_name("__in_range"), "__In_range");
        assert_eq!(class_name("ordered_triple"), "Ordered_triple");
    }
}
