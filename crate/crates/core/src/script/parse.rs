//! Recursive-descent parser for hook scripts.

use crate::datalog::CmpOp;

use super::lex::{tokenize, Tok, Token};
use super::{ArithOp, Expr, FPart, Relation, Script, ScriptParseError, Stmt, StmtKind, Target};

const MAX_DEPTH: usize = 100;

/// Parses hook text. Positions in errors are relative to the text given.
pub fn parse_script(text: &str) -> Result<Script, ScriptParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let mut stmts = Vec::new();
    while p.peek() != &Tok::Eof {
        if p.peek() == &Tok::Indent {
            return Err(p.error("unexpected indent"));
        }
        stmts.extend(p.statement()?);
    }
    Ok(Script { stmts })
}

/// Parses a single expression (facet bounds such as `2**31-1`).
pub(super) fn parse_expr(text: &str) -> Result<Expr, ScriptParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let e = p.expr()?;
    p.eat(&Tok::Newline);
    if p.peek() != &Tok::Eof {
        return Err(p.error(format!("unexpected {} after expression", describe(p.peek()))));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("`{n}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Str(_) | Tok::FStr(_) => "string".into(),
        Tok::Op(op) => format!("`{op}`"),
        Tok::Newline => "end of line".into(),
        Tok::Indent => "indent".into(),
        Tok::Dedent => "dedent".into(),
        Tok::Eof => "end of script".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ScriptParseError {
        let t = &self.toks[self.pos];
        ScriptParseError { line: t.line, column: t.column, message: message.into() }
    }

    fn expected(&self, what: &str) -> ScriptParseError {
        self.error(format!("expected {what}, found {}", describe(self.peek())))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op) && {
            self.bump();
            true
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), ScriptParseError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{op}`")))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn name(&mut self) -> Result<String, ScriptParseError> {
        match self.peek().clone() {
            Tok::Name(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.expected("a name")),
        }
    }

    fn enter(&mut self) -> Result<(), ScriptParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        Ok(())
    }

    fn statement(&mut self) -> Result<Vec<Stmt>, ScriptParseError> {
        let line = self.line();
        if self.is_keyword("if") {
            self.bump();
            return Ok(vec![self.if_rest(line)?]);
        }
        if self.is_keyword("for") {
            self.bump();
            let var = self.name()?;
            if !self.is_keyword("in") {
                return Err(self.expected("`in`"));
            }
            self.bump();
            let iter = self.expr()?;
            self.expect_op(":")?;
            let body = self.suite()?;
            return Ok(vec![Stmt { line, kind: StmtKind::For(var, iter, body) }]);
        }
        if self.is_keyword("elif") || self.is_keyword("else") {
            return Err(self.error("`elif`/`else` without a matching `if`"));
        }
        let stmts = self.simple_line()?;
        Ok(stmts)
    }

    fn if_rest(&mut self, line: usize) -> Result<Stmt, ScriptParseError> {
        let mut arms = Vec::new();
        let cond = self.expr()?;
        self.expect_op(":")?;
        arms.push((cond, self.suite()?));
        let mut other = None;
        loop {
            if self.is_keyword("elif") {
                self.bump();
                let cond = self.expr()?;
                self.expect_op(":")?;
                arms.push((cond, self.suite()?));
            } else if self.is_keyword("else") {
                self.bump();
                self.expect_op(":")?;
                other = Some(self.suite()?);
                break;
            } else {
                break;
            }
        }
        Ok(Stmt { line, kind: StmtKind::If(arms, other) })
    }

    fn suite(&mut self) -> Result<Vec<Stmt>, ScriptParseError> {
        if self.eat(&Tok::Newline) {
            if !self.eat(&Tok::Indent) {
                return Err(self.expected("an indented block"));
            }
            let mut body = Vec::new();
            while !self.eat(&Tok::Dedent) {
                if self.peek() == &Tok::Eof {
                    break;
                }
                body.extend(self.statement()?);
            }
            Ok(body)
        } else {
            self.simple_line()
        }
    }

    fn simple_line(&mut self) -> Result<Vec<Stmt>, ScriptParseError> {
        let mut out = vec![self.simple()?];
        while self.eat_op(";") {
            if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                break;
            }
            out.push(self.simple()?);
        }
        if !self.eat(&Tok::Newline) && self.peek() != &Tok::Eof {
            return Err(self.expected("end of line"));
        }
        Ok(out)
    }

    fn simple(&mut self) -> Result<Stmt, ScriptParseError> {
        let line = self.line();
        let kind = if self.is_keyword("import") {
            self.bump();
            self.name()?;
            while self.eat_op(".") {
                self.name()?;
            }
            StmtKind::Import
        } else if self.is_keyword("pass") {
            self.bump();
            StmtKind::Pass
        } else if self.is_keyword("fail") && self.peek_at(1) == &Tok::Op("(") {
            self.bump();
            self.bump();
            let msg = self.message_arg()?;
            self.expect_op(")")?;
            StmtKind::Fail(msg)
        } else if self.is_keyword("raise") {
            self.bump();
            self.name()?;
            let mut msg = None;
            if self.eat_op("(") {
                msg = self.message_arg()?;
                self.expect_op(")")?;
            }
            StmtKind::Fail(msg)
        } else {
            let e = self.expr()?;
            let aug = [("+=", ArithOp::Add), ("-=", ArithOp::Sub), ("*=", ArithOp::Mul), ("//=", ArithOp::FloorDiv), ("%=", ArithOp::Mod), ("**=", ArithOp::Pow)];
            if self.eat_op("=") {
                let target = self.target(&e)?;
                StmtKind::Assign(target, self.expr()?)
            } else if let Some((_, op)) = aug.iter().find(|(s, _)| matches!(self.peek(), Tok::Op(o) if o == s)) {
                self.bump();
                let target = self.target(&e)?;
                StmtKind::Update(target, *op, self.expr()?)
            } else {
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { line, kind })
    }

    /// A plain string literal handed to `fail` interpolates `{expr}` too.
    fn message_arg(&mut self) -> Result<Option<Expr>, ScriptParseError> {
        if self.peek() == &Tok::Op(")") {
            return Ok(None);
        }
        if let (Tok::Str(s), Tok::Op(")")) = (self.peek().clone(), self.peek_at(1)) {
            let (line, column) = (self.line(), self.toks[self.pos].column);
            self.bump();
            return Ok(Some(self.format(&s, line, column)?));
        }
        Ok(Some(self.expr()?))
    }

    fn target(&self, e: &Expr) -> Result<Target, ScriptParseError> {
        let is_name = |e: &Expr, n: &str| matches!(e, Expr::Name(x) if x == n);
        match e {
            Expr::Name(n) if !matches!(n.as_str(), "self" | "cls" | "True" | "False" | "None") => {
                Ok(Target::Local(n.clone()))
            }
            Expr::Attr(obj, f) if is_name(obj, "self") => Ok(Target::Field(f.clone())),
            Expr::Attr(obj, f) if is_name(obj, "cls") => Ok(Target::Class(f.clone())),
            Expr::Attr(obj, f)
                if matches!(&**obj, Expr::Attr(inner, c) if c == "__class__" && is_name(inner, "self")) =>
            {
                Ok(Target::Class(f.clone()))
            }
            _ => Err(self.error(
                "can only assign to a local name, `self.NAME`, `cls.NAME` or `self.__class__.NAME`",
            )),
        }
    }

    fn format(&self, raw: &str, line: usize, column: usize) -> Result<Expr, ScriptParseError> {
        let mut parts = Vec::new();
        let mut lit = String::new();
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        let err = |m: &str| ScriptParseError { line, column, message: m.into() };
        while i < chars.len() {
            match chars[i] {
                '{' if chars.get(i + 1) == Some(&'{') => {
                    lit.push('{');
                    i += 2;
                }
                '}' if chars.get(i + 1) == Some(&'}') => {
                    lit.push('}');
                    i += 2;
                }
                '{' => {
                    let close = chars[i..]
                        .iter()
                        .position(|c| *c == '}')
                        .ok_or_else(|| err("unclosed `{` in message"))?;
                    let inner: String = chars[i + 1..i + close].iter().collect();
                    let e = parse_expr(&inner).map_err(|e| ScriptParseError {
                        line,
                        column,
                        message: format!("in interpolation `{{{inner}}}`: {}", e.message),
                    })?;
                    if !lit.is_empty() {
                        parts.push(FPart::Lit(std::mem::take(&mut lit)));
                    }
                    parts.push(FPart::Expr(e));
                    i += close + 1;
                }
                '}' => return Err(err("single `}` in message")),
                c => {
                    lit.push(c);
                    i += 1;
                }
            }
        }
        if parts.is_empty() {
            return Ok(Expr::Str(lit));
        }
        if !lit.is_empty() {
            parts.push(FPart::Lit(lit));
        }
        Ok(Expr::Format(parts))
    }

    fn expr(&mut self) -> Result<Expr, ScriptParseError> {
        self.enter()?;
        let mut e = self.and_expr()?;
        while self.is_keyword("or") {
            self.bump();
            e = Expr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        self.depth -= 1;
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, ScriptParseError> {
        let mut e = self.not_expr()?;
        while self.is_keyword("and") {
            self.bump();
            e = Expr::And(Box::new(e), Box::new(self.not_expr()?));
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, ScriptParseError> {
        if self.is_keyword("not") {
            self.bump();
            self.enter()?;
            let e = Expr::Not(Box::new(self.not_expr()?));
            self.depth -= 1;
            return Ok(e);
        }
        self.comparison()
    }

    fn relation(&mut self) -> Option<Relation> {
        let rel = match self.peek() {
            Tok::Op("==") => Relation::Cmp(CmpOp::Eq),
            Tok::Op("!=") => Relation::Cmp(CmpOp::Ne),
            Tok::Op("<") => Relation::Cmp(CmpOp::Lt),
            Tok::Op("<=") => Relation::Cmp(CmpOp::Le),
            Tok::Op(">") => Relation::Cmp(CmpOp::Gt),
            Tok::Op(">=") => Relation::Cmp(CmpOp::Ge),
            Tok::Name(n) if n == "in" => Relation::In,
            Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                self.bump();
                Relation::NotIn
            }
            _ => return None,
        };
        self.bump();
        Some(rel)
    }

    fn comparison(&mut self) -> Result<Expr, ScriptParseError> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        while let Some(rel) = self.relation() {
            rest.push((rel, self.arith()?));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Expr::Compare(Box::new(first), rest))
        }
    }

    fn arith(&mut self) -> Result<Expr, ScriptParseError> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => ArithOp::Add,
                Tok::Op("-") => ArithOp::Sub,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::Arith(op, Box::new(e), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ScriptParseError> {
        let mut e = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => ArithOp::Mul,
                Tok::Op("//") => ArithOp::FloorDiv,
                Tok::Op("%") => ArithOp::Mod,
                Tok::Op("/") => {
                    return Err(self.error("`/` is not supported; use `//` for integer division"))
                }
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::Arith(op, Box::new(e), Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<Expr, ScriptParseError> {
        self.enter()?;
        let e = if self.eat_op("-") {
            match self.factor()? {
                Expr::Int(n) => Expr::Int(-n),
                e => Expr::Neg(Box::new(e)),
            }
        } else if self.eat_op("+") {
            self.factor()?
        } else {
            let base = self.postfix()?;
            if self.eat_op("**") {
                Expr::Arith(ArithOp::Pow, Box::new(base), Box::new(self.factor()?))
            } else {
                base
            }
        };
        self.depth -= 1;
        Ok(e)
    }

    fn postfix(&mut self) -> Result<Expr, ScriptParseError> {
        let mut e = self.atom()?;
        loop {
            if self.eat_op(".") {
                e = Expr::Attr(Box::new(e), self.name()?);
            } else if self.eat_op("(") {
                let args = self.list_items(")")?;
                e = Expr::Call(Box::new(e), args);
            } else if self.eat_op("[") {
                let idx = self.expr()?;
                self.expect_op("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else {
                return Ok(e);
            }
        }
    }

    fn list_items(&mut self, close: &str) -> Result<Vec<Expr>, ScriptParseError> {
        let mut items = Vec::new();
        if self.eat_op(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if self.eat_op(",") {
                if self.eat_op(close) {
                    return Ok(items);
                }
                continue;
            }
            self.expect_op(close)?;
            return Ok(items);
        }
    }

    fn atom(&mut self) -> Result<Expr, ScriptParseError> {
        let (line, column) = (self.line(), self.toks[self.pos].column);
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::FStr(s) => {
                self.bump();
                self.format(&s, line, column)
            }
            Tok::Name(n) => {
                let e = match n.as_str() {
                    "True" => Expr::Bool(true),
                    "False" => Expr::Bool(false),
                    "None" => Expr::None,
                    "if" | "elif" | "else" | "for" | "in" | "and" | "or" | "not" | "import"
                    | "raise" | "pass" => return Err(self.expected("an expression")),
                    _ => Expr::Name(n),
                };
                self.bump();
                Ok(e)
            }
            Tok::Op("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_op(")")?;
                Ok(e)
            }
            Tok::Op("[") => {
                self.bump();
                Ok(Expr::List(self.list_items("]")?))
            }
            _ => Err(self.expected("an expression")),
        }
    }
}
