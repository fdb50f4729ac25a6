//! Bottom-up evaluation of the stratified, normal fragment of ASP.
//!
//! Covers what auxiliary validation programs need: facts, normal rules,
//! default negation, comparisons, arithmetic, intervals in heads, and
//! `#count`/`#sum`/`#sum+`/`#min`/`#max` aggregates. Integrity constraints
//! are parsed and kept but derive nothing. Disjunction, choice rules, weak
//! constraints and optimization statements are rejected; programs using
//! them have to go through an external grounder.

mod eval;
mod parse;
mod stratify;

use std::fmt;

use num_bigint::BigInt;

use crate::term::{write_quoted, ParseError};

pub use eval::{evaluate, EvalError};
pub use parse::parse_program;
pub use stratify::{stratify, Strata};

/// Predicate signature `name/arity`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: String,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        PredKey {
            name: name.into(),
            arity,
        }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "\\",
            BinOp::Pow => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator with its operands swapped (`a < b` iff `b > a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

/// A possibly non-ground term. Variables are indices into the owning
/// rule's variable table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(usize),
    Anon,
    Number(BigInt),
    Str(String),
    Const(String),
    Func(String, Vec<Term>),
    Tuple(Vec<Term>),
    Binary(BinOp, Box<Term>, Box<Term>),
    Neg(Box<Term>),
    Interval(Box<Term>, Box<Term>),
    /// `@name(args)`; parsed so validator constraints re-read, never evaluated.
    External(String, Vec<Term>),
}

impl Term {
    pub(crate) fn visit_vars(&self, f: &mut impl FnMut(usize, bool)) {
        self.visit_vars_inner(false, f)
    }

    // `computed` is true below arithmetic, where a variable cannot be bound by matching
    fn visit_vars_inner(&self, computed: bool, f: &mut impl FnMut(usize, bool)) {
        match self {
            Term::Var(v) => f(*v, computed),
            Term::Func(_, args) | Term::Tuple(args) => {
                args.iter().for_each(|a| a.visit_vars_inner(computed, f))
            }
            Term::External(_, args) => args.iter().for_each(|a| a.visit_vars_inner(true, f)),
            Term::Binary(_, a, b) | Term::Interval(a, b) => {
                a.visit_vars_inner(true, f);
                b.visit_vars_inner(true, f);
            }
            Term::Neg(a) => a.visit_vars_inner(true, f),
            Term::Anon | Term::Number(_) | Term::Str(_) | Term::Const(_) => {}
        }
    }

    pub(crate) fn has_interval(&self) -> bool {
        match self {
            Term::Interval(..) => true,
            Term::Func(_, args) | Term::Tuple(args) | Term::External(_, args) => {
                args.iter().any(Term::has_interval)
            }
            Term::Binary(_, a, b) => a.has_interval() || b.has_interval(),
            Term::Neg(a) => a.has_interval(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn key(&self) -> PredKey {
        PredKey::new(self.predicate.clone(), self.args.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFunc {
    Count,
    Sum,
    SumPlus,
    Min,
    Max,
}

impl AggFunc {
    fn keyword(self) -> &'static str {
        match self {
            AggFunc::Count => "#count",
            AggFunc::Sum => "#sum",
            AggFunc::SumPlus => "#sum+",
            AggFunc::Min => "#min",
            AggFunc::Max => "#max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggElement {
    pub terms: Vec<Term>,
    pub condition: Vec<Literal>,
}

/// `#f{elements} op guard`; a guard written on the left is normalised to
/// the right by flipping the operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregate {
    pub func: AggFunc,
    pub elements: Vec<AggElement>,
    pub guard: Option<(CmpOp, Term)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Cmp(Term, CmpOp, Term),
    Agg(Aggregate),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    /// `None` for integrity constraints.
    pub head: Option<Atom>,
    pub body: Vec<Literal>,
    pub var_names: Vec<String>,
    /// 1-based source line of the rule.
    pub line: usize,
}

impl Rule {
    pub fn is_fact(&self) -> bool {
        self.head.is_some() && self.body.is_empty()
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_none()
    }
}

/// A parsed program. Constraints are kept for re-rendering only.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    /// Rules with a head (facts and normal rules).
    pub fn derivation_rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.head.is_some())
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.head.is_none())
    }

    pub fn extend(&mut self, other: Program) {
        self.rules.extend(other.rules);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("unsupported construct on line {line}: {construct}")]
    Unsupported { line: usize, construct: String },
    #[error("unsafe variable {variable} in rule on line {line}: {rule}")]
    Unsafe {
        line: usize,
        variable: String,
        rule: String,
    },
    #[error("program is not stratified: cycle through negation or aggregation among {}", cycle.join(", "))]
    NotStratified { cycle: Vec<String> },
}

fn write_list<T>(
    f: &mut fmt::Formatter<'_>,
    items: &[T],
    sep: &str,
    vars: &[String],
    write: impl Fn(&mut fmt::Formatter<'_>, &T, &[String]) -> fmt::Result,
) -> fmt::Result {
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write(f, it, vars)?;
    }
    Ok(())
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term, vars: &[String]) -> fmt::Result {
    match t {
        Term::Var(v) => f.write_str(vars.get(*v).map_or("_V", String::as_str)),
        Term::Anon => f.write_str("_"),
        Term::Number(n) => write!(f, "{n}"),
        Term::Str(s) => write_quoted(f, s),
        Term::Const(c) => f.write_str(c),
        Term::Func(name, args) => {
            write!(f, "{name}(")?;
            write_list(f, args, ",", vars, write_term)?;
            f.write_str(")")
        }
        Term::External(name, args) => {
            write!(f, "@{name}(")?;
            write_list(f, args, ",", vars, write_term)?;
            f.write_str(")")
        }
        Term::Tuple(args) => {
            f.write_str("(")?;
            write_list(f, args, ",", vars, write_term)?;
            if args.len() == 1 {
                f.write_str(",")?;
            }
            f.write_str(")")
        }
        Term::Binary(op, a, b) => {
            f.write_str("(")?;
            write_term(f, a, vars)?;
            f.write_str(op.symbol())?;
            write_term(f, b, vars)?;
            f.write_str(")")
        }
        Term::Neg(a) => {
            f.write_str("-")?;
            write_term(f, a, vars)
        }
        Term::Interval(a, b) => {
            write_term(f, a, vars)?;
            f.write_str("..")?;
            write_term(f, b, vars)
        }
    }
}

fn write_atom(f: &mut fmt::Formatter<'_>, a: &Atom, vars: &[String]) -> fmt::Result {
    f.write_str(&a.predicate)?;
    if !a.args.is_empty() {
        f.write_str("(")?;
        write_list(f, &a.args, ",", vars, write_term)?;
        f.write_str(")")?;
    }
    Ok(())
}

fn write_literal(f: &mut fmt::Formatter<'_>, l: &Literal, vars: &[String]) -> fmt::Result {
    match l {
        Literal::Pos(a) => write_atom(f, a, vars),
        Literal::Neg(a) => {
            f.write_str("not ")?;
            write_atom(f, a, vars)
        }
        Literal::Cmp(a, op, b) => {
            write_term(f, a, vars)?;
            write!(f, " {} ", op.symbol())?;
            write_term(f, b, vars)
        }
        Literal::Agg(agg) => {
            f.write_str(agg.func.keyword())?;
            f.write_str("{")?;
            write_list(f, &agg.elements, "; ", vars, |f, e, vars| {
                write_list(f, &e.terms, ",", vars, write_term)?;
                if !e.condition.is_empty() {
                    f.write_str(" : ")?;
                    write_list(f, &e.condition, ", ", vars, write_literal)?;
                }
                Ok(())
            })?;
            f.write_str("}")?;
            if let Some((op, t)) = &agg.guard {
                write!(f, " {} ", op.symbol())?;
                write_term(f, t, vars)?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(h) = &self.head {
            write_atom(f, h, &self.var_names)?;
            if !self.body.is_empty() {
                f.write_str(" ")?;
            }
        }
        if !self.body.is_empty() {
            f.write_str(":- ")?;
            write_list(f, &self.body, ", ", &self.var_names, write_literal)?;
        }
        f.write_str(".")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
