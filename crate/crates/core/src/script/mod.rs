//! The hook language: a small indentation-based statement language for
//! `having`, `after_init`, `before_grounding`, `after_grounding` and the
//! global prelude.

mod eval;
mod lex;
mod parse;

use std::fmt;

use num_bigint::BigInt;

use crate::datalog::CmpOp;

pub use eval::{
    class_name, eval_const, run_class_hook, run_instance_hook, run_prelude, valid_date, ClassStore, Consts,
    HookError, Instance, Value,
};
pub use parse::parse_script;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ScriptParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    FloorDiv,
    Mod,
    Pow,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::FloorDiv => "//",
            ArithOp::Mod => "%",
            ArithOp::Pow => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Cmp(CmpOp),
    In,
    NotIn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FPart {
    Lit(String),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(BigInt),
    Str(String),
    Format(Vec<FPart>),
    Bool(bool),
    None,
    List(Vec<Expr>),
    Name(String),
    Attr(Box<Expr>, String),
    Call(Box<Expr>, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    /// Chained comparison `a < b < c`.
    Compare(Box<Expr>, Vec<(Relation, Expr)>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    fn mentions_self(&self) -> bool {
        match self {
            Expr::Name(n) => n == "self",
            Expr::Format(parts) => parts.iter().any(|p| match p {
                FPart::Expr(e) => e.mentions_self(),
                FPart::Lit(_) => false,
            }),
            Expr::List(items) => items.iter().any(Expr::mentions_self),
            Expr::Attr(e, _) | Expr::Neg(e) | Expr::Not(e) => e.mentions_self(),
            Expr::Call(f, args) => f.mentions_self() || args.iter().any(Expr::mentions_self),
            Expr::Index(a, b) | Expr::Arith(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.mentions_self() || b.mentions_self()
            }
            Expr::Compare(first, rest) => {
                first.mentions_self() || rest.iter().any(|(_, e)| e.mentions_self())
            }
            Expr::Int(_) | Expr::Str(_) | Expr::Bool(_) | Expr::None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Local(String),
    /// `self.NAME`
    Field(String),
    /// `cls.NAME` or `self.__class__.NAME`
    Class(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Import,
    Pass,
    Assign(Target, Expr),
    Update(Target, ArithOp, Expr),
    If(Vec<(Expr, Vec<Stmt>)>, Option<Vec<Stmt>>),
    For(String, Expr, Vec<Stmt>),
    Fail(Option<Expr>),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub line: usize,
    pub kind: StmtKind,
}

impl Stmt {
    fn mentions_self(&self) -> bool {
        let target = |t: &Target| matches!(t, Target::Field(_));
        match &self.kind {
            StmtKind::Import | StmtKind::Pass | StmtKind::Fail(None) => false,
            StmtKind::Assign(t, e) | StmtKind::Update(t, _, e) => target(t) || e.mentions_self(),
            StmtKind::If(arms, other) => {
                arms.iter()
                    .any(|(c, b)| c.mentions_self() || b.iter().any(Stmt::mentions_self))
                    || other.iter().flatten().any(Stmt::mentions_self)
            }
            StmtKind::For(_, e, body) => e.mentions_self() || body.iter().any(Stmt::mentions_self),
            StmtKind::Fail(Some(e)) | StmtKind::Expr(e) => e.mentions_self(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub stmts: Vec<Stmt>,
}

impl Script {
    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    /// True when the script reads or writes `self`; such after-grounding
    /// hooks run once per stored instance.
    pub fn uses_self(&self) -> bool {
        self.stmts.iter().any(Stmt::mentions_self)
    }

    /// `if not (self.lhs op self.rhs): fail("Expected lhs op rhs")`
    pub fn having(lhs: &str, op: CmpOp, rhs: &str) -> Script {
        let field = |f: &str| Expr::Attr(Box::new(Expr::Name("self".into())), f.into());
        let cond = Expr::Not(Box::new(Expr::Compare(
            Box::new(field(lhs)),
            vec![(Relation::Cmp(op), field(rhs))],
        )));
        let fail = Stmt {
            line: 1,
            kind: StmtKind::Fail(Some(Expr::Str(format!(
                "Expected {lhs} {} {rhs}",
                cmp_text(op)
            )))),
        };
        Script {
            stmts: vec![Stmt {
                line: 1,
                kind: StmtKind::If(vec![(cond, vec![fail])], None),
            }],
        }
    }
}

/// Comparison operator as written in hook text (`==` rather than `=`).
pub fn cmp_text(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "==",
        op => op.symbol(),
    }
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
