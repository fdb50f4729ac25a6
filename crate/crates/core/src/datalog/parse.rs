//! Lexer and recursive-descent parser for rule programs.

use std::collections::HashMap;

use num_bigint::BigInt;

use super::{
    AggElement, AggFunc, Aggregate, Atom, BinOp, CmpOp, Literal, Program, ProgramError, Rule, Term,
};
use crate::term::{is_ident_continue, line_col, Cursor, ParseError};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Anon,
    Num(BigInt),
    Str(String),
    Hash(String),
    At,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    If,
    WeakIf,
    Dot,
    DotDot,
    Plus,
    Minus,
    Star,
    Pow,
    Slash,
    Backslash,
    Bar,
    Cmp(CmpOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Anon => "`_`".into(),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Str(_) => "string".into(),
            Tok::Hash(s) => format!("`#{s}`"),
            Tok::Eof => "end of input".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            other => {
                let s = match other {
                    Tok::At => "@",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::Colon => ":",
                    Tok::If => ":-",
                    Tok::WeakIf => ":~",
                    Tok::Dot => ".",
                    Tok::DotDot => "..",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Star => "*",
                    Tok::Pow => "**",
                    Tok::Slash => "/",
                    Tok::Backslash => "\\",
                    _ => "|",
                };
                format!("`{s}`")
            }
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut c = Cursor::new(src);
    let mut out = Vec::new();
    loop {
        c.skip_ws()?;
        let start = c.pos;
        let Some(b) = c.peek() else {
            out.push((Tok::Eof, start));
            return Ok(out);
        };
        let two = |c: &Cursor<'_>, s: &str| c.starts_with(s);
        let tok = match b {
            b'"' => Tok::Str(c.string()?),
            b'0'..=b'9' => Tok::Num(c.digits().expect("digit present")),
            b'_' | b'a'..=b'z' | b'A'..=b'Z' => {
                let bytes = src.as_bytes();
                let mut i = c.pos;
                while bytes.get(i) == Some(&b'_') {
                    i += 1;
                }
                match bytes.get(i) {
                    Some(b) if b.is_ascii_lowercase() => Tok::Ident(c.ident().unwrap().to_string()),
                    Some(b) if b.is_ascii_uppercase() => {
                        i += 1;
                        while bytes.get(i).is_some_and(|&b| is_ident_continue(b)) {
                            i += 1;
                        }
                        let name = src[c.pos..i].to_string();
                        c.pos = i;
                        Tok::Var(name)
                    }
                    _ if i == c.pos + 1 => {
                        c.pos = i;
                        Tok::Anon
                    }
                    _ => return Err(c.error("invalid identifier")),
                }
            }
            b'#' => {
                c.pos += 1;
                match c.ident() {
                    Some(word) => {
                        let mut word = word.to_string();
                        if word == "sum" && c.peek() == Some(b'+') {
                            c.pos += 1;
                            word.push('+');
                        }
                        Tok::Hash(word)
                    }
                    None => return Err(c.expected("a directive or aggregate name after `#`")),
                }
            }
            _ => {
                let (tok, len) = if two(&c, ":-") {
                    (Tok::If, 2)
                } else if two(&c, ":~") {
                    (Tok::WeakIf, 2)
                } else if two(&c, "..") {
                    (Tok::DotDot, 2)
                } else if two(&c, "**") {
                    (Tok::Pow, 2)
                } else if two(&c, "!=") || two(&c, "<>") {
                    (Tok::Cmp(CmpOp::Ne), 2)
                } else if two(&c, "==") {
                    (Tok::Cmp(CmpOp::Eq), 2)
                } else if two(&c, "<=") {
                    (Tok::Cmp(CmpOp::Le), 2)
                } else if two(&c, ">=") {
                    (Tok::Cmp(CmpOp::Ge), 2)
                } else {
                    let t = match b {
                        b'@' => Tok::At,
                        b'(' => Tok::LParen,
                        b')' => Tok::RParen,
                        b'{' => Tok::LBrace,
                        b'}' => Tok::RBrace,
                        b'[' => Tok::LBracket,
                        b']' => Tok::RBracket,
                        b',' => Tok::Comma,
                        b';' => Tok::Semi,
                        b':' => Tok::Colon,
                        b'.' => Tok::Dot,
                        b'+' => Tok::Plus,
                        b'-' => Tok::Minus,
                        b'*' => Tok::Star,
                        b'/' => Tok::Slash,
                        b'\\' => Tok::Backslash,
                        b'|' => Tok::Bar,
                        b'=' => Tok::Cmp(CmpOp::Eq),
                        b'<' => Tok::Cmp(CmpOp::Lt),
                        b'>' => Tok::Cmp(CmpOp::Gt),
                        _ => return Err(c.error(format!("unexpected character {}", c.found()))),
                    };
                    (t, 1)
                };
                c.pos += len;
                tok
            }
        };
        out.push((tok, start));
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: HashMap<String, usize>,
    var_names: Vec<String>,
    consts: HashMap<String, Term>,
    depth: usize,
}

/// Parses a rule program, then checks rule safety and stratification.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let program = parse_unchecked(text)?;
    for rule in &program.rules {
        super::eval::check_safety(rule)?;
    }
    super::stratify(&program)?;
    Ok(program)
}

pub(crate) fn parse_unchecked(text: &str) -> Result<Program, ProgramError> {
    let mut p = Parser {
        src: text,
        toks: lex(text)?,
        pos: 0,
        vars: HashMap::new(),
        var_names: Vec::new(),
        consts: HashMap::new(),
        depth: 0,
    };
    let mut rules = Vec::new();
    while p.peek() != &Tok::Eof {
        if let Some(rule) = p.statement()? {
            rules.push(rule);
        }
    }
    let mut program = Program { rules };
    if !p.consts.is_empty() {
        for rule in &mut program.rules {
            substitute_consts(rule, &p.consts);
        }
    }
    Ok(program)
}

fn substitute_consts(rule: &mut Rule, consts: &HashMap<String, Term>) {
    fn term(t: &mut Term, c: &HashMap<String, Term>) {
        match t {
            Term::Const(name) => {
                if let Some(v) = c.get(name.as_str()) {
                    *t = v.clone();
                }
            }
            Term::Func(_, args) | Term::Tuple(args) | Term::External(_, args) => {
                args.iter_mut().for_each(|a| term(a, c))
            }
            Term::Binary(_, a, b) | Term::Interval(a, b) => {
                term(a, c);
                term(b, c);
            }
            Term::Neg(a) => term(a, c),
            _ => {}
        }
    }
    fn atom(a: &mut Atom, c: &HashMap<String, Term>) {
        a.args.iter_mut().for_each(|t| term(t, c));
    }
    fn literal(l: &mut Literal, c: &HashMap<String, Term>) {
        match l {
            Literal::Pos(a) | Literal::Neg(a) => atom(a, c),
            Literal::Cmp(a, _, b) => {
                term(a, c);
                term(b, c);
            }
            Literal::Agg(agg) => {
                for e in &mut agg.elements {
                    e.terms.iter_mut().for_each(|t| term(t, c));
                    e.condition.iter_mut().for_each(|l| literal(l, c));
                }
                if let Some((_, t)) = &mut agg.guard {
                    term(t, c);
                }
            }
        }
    }
    if let Some(h) = &mut rule.head {
        atom(h, consts);
    }
    rule.body.iter_mut().for_each(|l| literal(l, consts));
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn line(&self) -> usize {
        line_col(self.src, self.offset()).0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, message: impl Into<String>) -> ProgramError {
        ProgramError::Syntax(ParseError::at(self.src, self.offset(), message))
    }

    fn expected(&self, what: &str) -> ProgramError {
        self.error(format!("expected {what}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, t: Tok) -> Result<(), ProgramError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.expected(&t.describe()))
        }
    }

    fn unsupported(&self, construct: &str) -> ProgramError {
        ProgramError::Unsupported {
            line: self.line(),
            construct: construct.to_string(),
        }
    }

    fn var(&mut self, name: String) -> Term {
        let next = self.var_names.len();
        let id = *self.vars.entry(name.clone()).or_insert(next);
        if id == next {
            self.var_names.push(name);
        }
        Term::Var(id)
    }

    fn statement(&mut self) -> Result<Option<Rule>, ProgramError> {
        self.vars.clear();
        self.var_names.clear();
        let line = self.line();
        match self.peek().clone() {
            Tok::Hash(word) => return self.directive(&word),
            Tok::WeakIf => return Err(self.unsupported("weak constraint")),
            Tok::LBrace => return Err(self.unsupported("choice rule")),
            Tok::Minus => return Err(self.unsupported("classical negation")),
            _ => {}
        }
        let head = if self.eat(&Tok::If) {
            None
        } else {
            let head = self.atom()?;
            match self.peek() {
                Tok::Bar | Tok::Semi => return Err(self.unsupported("disjunctive head")),
                Tok::Colon => return Err(self.unsupported("conditional head literal")),
                _ => {}
            }
            if !self.eat(&Tok::If) {
                self.expect(Tok::Dot)?;
                return Ok(Some(Rule {
                    head: Some(head),
                    body: Vec::new(),
                    var_names: std::mem::take(&mut self.var_names),
                    line,
                }));
            }
            Some(head)
        };
        let body = if self.peek() == &Tok::Dot {
            Vec::new()
        } else {
            self.literals(true)?
        };
        self.expect(Tok::Dot)?;
        Ok(Some(Rule {
            head,
            body,
            var_names: std::mem::take(&mut self.var_names),
            line,
        }))
    }

    fn directive(&mut self, word: &str) -> Result<Option<Rule>, ProgramError> {
        match word {
            "const" => {
                self.bump();
                let name = match self.bump() {
                    Tok::Ident(n) => n,
                    _ => return Err(self.error("expected constant name after #const")),
                };
                if !matches!(self.bump(), Tok::Cmp(CmpOp::Eq)) {
                    return Err(self.error("expected `=` in #const"));
                }
                let value = self.term()?;
                if self.peek() == &Tok::Cmp(CmpOp::Eq) || !self.var_names.is_empty() {
                    return Err(self.error("#const value must be ground"));
                }
                // a bracketed `[default]` annotation is not supported
                self.expect(Tok::Dot)?;
                self.consts.entry(name).or_insert(value);
                Ok(None)
            }
            "show" => {
                while !matches!(self.peek(), Tok::Dot | Tok::Eof) {
                    self.bump();
                }
                self.expect(Tok::Dot)?;
                Ok(None)
            }
            "count" | "sum" | "sum+" | "min" | "max" => Err(self.expected("a rule head")),
            other => Err(self.unsupported(&format!("#{other} directive"))),
        }
    }

    fn literals(&mut self, allow_agg: bool) -> Result<Vec<Literal>, ProgramError> {
        let mut lits = vec![self.literal(allow_agg)?];
        while self.eat(&Tok::Comma) {
            lits.push(self.literal(allow_agg)?);
        }
        Ok(lits)
    }

    fn literal(&mut self, allow_agg: bool) -> Result<Literal, ProgramError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "not") {
            self.bump();
            if matches!(self.peek(), Tok::Ident(s) if s == "not") {
                return Err(self.unsupported("double negation"));
            }
            if matches!(self.peek(), Tok::Hash(_)) {
                return Err(self.unsupported("negated aggregate"));
            }
            return Ok(Literal::Neg(self.atom()?));
        }
        if let Tok::Hash(word) = self.peek().clone() {
            if !allow_agg {
                return Err(self.unsupported("nested aggregate"));
            }
            let mut agg = self.aggregate(&word)?;
            if let Tok::Cmp(op) = self.peek().clone() {
                self.bump();
                agg.guard = Some((op, self.term()?));
            }
            return Ok(Literal::Agg(agg));
        }
        let lhs = self.term()?;
        if let Tok::Cmp(op) = self.peek().clone() {
            self.bump();
            if let Tok::Hash(word) = self.peek().clone() {
                if !allow_agg {
                    return Err(self.unsupported("nested aggregate"));
                }
                let mut agg = self.aggregate(&word)?;
                agg.guard = Some((op.flip(), lhs));
                if matches!(self.peek(), Tok::Cmp(_)) {
                    return Err(self.unsupported("aggregate with two guards"));
                }
                return Ok(Literal::Agg(agg));
            }
            let rhs = self.term()?;
            return Ok(Literal::Cmp(lhs, op, rhs));
        }
        match lhs {
            Term::Const(name) => Ok(Literal::Pos(Atom {
                predicate: name,
                args: Vec::new(),
            })),
            Term::Func(name, args) => Ok(Literal::Pos(Atom {
                predicate: name,
                args,
            })),
            _ => Err(self.expected("an atom or comparison")),
        }
    }

    fn aggregate(&mut self, word: &str) -> Result<Aggregate, ProgramError> {
        let func = match word {
            "count" => AggFunc::Count,
            "sum" => AggFunc::Sum,
            "sum+" => AggFunc::SumPlus,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            other => return Err(self.unsupported(&format!("#{other}"))),
        };
        self.bump();
        self.expect(Tok::LBrace)?;
        let mut elements = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                let mut terms = Vec::new();
                if !matches!(self.peek(), Tok::Colon) {
                    terms.push(self.term()?);
                    while self.eat(&Tok::Comma) {
                        terms.push(self.term()?);
                    }
                }
                let condition = if self.eat(&Tok::Colon) {
                    self.literals(false)?
                } else {
                    Vec::new()
                };
                elements.push(AggElement { terms, condition });
                if self.eat(&Tok::RBrace) {
                    break;
                }
                self.expect(Tok::Semi)?;
            }
        }
        Ok(Aggregate {
            func,
            elements,
            guard: None,
        })
    }

    fn atom(&mut self) -> Result<Atom, ProgramError> {
        if self.peek() == &Tok::Minus {
            return Err(self.unsupported("classical negation"));
        }
        match self.term()? {
            Term::Const(name) => Ok(Atom {
                predicate: name,
                args: Vec::new(),
            }),
            Term::Func(name, args) => Ok(Atom {
                predicate: name,
                args,
            }),
            _ => Err(self.error("expected an atom")),
        }
    }

    fn nested<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, ProgramError>,
    ) -> Result<T, ProgramError> {
        if self.depth >= MAX_DEPTH {
            return Err(self.error("expression nesting too deep"));
        }
        self.depth += 1;
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn term(&mut self) -> Result<Term, ProgramError> {
        self.nested(|p| {
            let lo = p.additive()?;
            if p.eat(&Tok::DotDot) {
                let hi = p.additive()?;
                return Ok(Term::Interval(Box::new(lo), Box::new(hi)));
            }
            Ok(lo)
        })
    }

    fn additive(&mut self) -> Result<Term, ProgramError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Term::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Term, ProgramError> {
        let mut lhs = self.power()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Backslash => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.power()?;
            lhs = Term::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn power(&mut self) -> Result<Term, ProgramError> {
        let base = self.unary()?;
        if self.eat(&Tok::Pow) {
            let exp = self.nested(|p| p.power())?;
            return Ok(Term::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Term, ProgramError> {
        if self.eat(&Tok::Minus) {
            return match self.nested(|p| p.unary())? {
                Term::Number(n) => Ok(Term::Number(-n)),
                t => Ok(Term::Neg(Box::new(t))),
            };
        }
        self.primary()
    }

    fn args(&mut self) -> Result<Vec<Term>, ProgramError> {
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            match self.bump() {
                Tok::Comma => {}
                Tok::RParen => return Ok(args),
                Tok::Semi => return Err(self.unsupported("pooling")),
                _ => {
                    self.pos -= 1;
                    return Err(self.expected("`,` or `)`"));
                }
            }
        }
    }

    fn primary(&mut self) -> Result<Term, ProgramError> {
        match self.bump() {
            Tok::Num(n) => Ok(Term::Number(n)),
            Tok::Str(s) => Ok(Term::Str(s)),
            Tok::Var(v) => Ok(self.var(v)),
            Tok::Anon => Ok(Term::Anon),
            Tok::Ident(name) => {
                if self.eat(&Tok::LParen) {
                    let args = self.nested(|p| p.args())?;
                    if args.is_empty() {
                        Ok(Term::Const(name))
                    } else {
                        Ok(Term::Func(name, args))
                    }
                } else {
                    Ok(Term::Const(name))
                }
            }
            Tok::At => {
                let name = match self.bump() {
                    Tok::Ident(n) => n,
                    _ => return Err(self.error("expected function name after `@`")),
                };
                let args = if self.eat(&Tok::LParen) {
                    self.nested(|p| p.args())?
                } else {
                    Vec::new()
                };
                Ok(Term::External(name, args))
            }
            Tok::LParen => self.nested(|p| {
                if p.eat(&Tok::RParen) {
                    return Ok(Term::Tuple(Vec::new()));
                }
                let first = p.term()?;
                if p.eat(&Tok::RParen) {
                    return Ok(first);
                }
                let mut items = vec![first];
                loop {
                    p.expect(Tok::Comma)?;
                    if p.eat(&Tok::RParen) {
                        return Ok(Term::Tuple(items));
                    }
                    items.push(p.term()?);
                    if p.eat(&Tok::RParen) {
                        return Ok(Term::Tuple(items));
                    }
                }
            }),
            Tok::Bar => Err(self.unsupported("absolute value")),
            Tok::Hash(w) if w == "inf" || w == "sup" => Err(self.unsupported("#inf/#sup")),
            _ => {
                self.pos -= 1;
                Err(self.expected("a term"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_rule() {
        let p = parse_program("residual_budget(B-B',R) :- init_budget(R,B), budget_spent(R,B').")
            .unwrap();
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        assert_eq!(r.var_names, vec!["B", "B'", "R"]);
        assert_eq!(r.body.len(), 2);
        assert_eq!(
            r.to_string(),
            "residual_budget((B-B'),R) :- init_budget(R,B), budget_spent(R,B')."
        );
    }

    #[test]
    fn negation_and_tuples() {
        let p = parse_program(r#"lost("symmetry", (X,Y)) :- r(X,Y), not r(Y,X)."#).unwrap();
        let r = &p.rules[0];
        assert!(matches!(r.body[1], Literal::Neg(_)));
        assert!(matches!(r.head.as_ref().unwrap().args[1], Term::Tuple(_)));
    }

    #[test]
    fn unsafe_rule_names_variable() {
        match parse_program("p(X) :- q(Y).") {
            Err(ProgramError::Unsafe { variable, .. }) => assert_eq!(variable, "X"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_program("p(X) :- not q(X)."),
            Err(ProgramError::Unsafe { .. })
        ));
        assert!(matches!(
            parse_program("p(X) :- q(Y), X < Y."),
            Err(ProgramError::Unsafe { .. })
        ));
    }

    #[test]
    fn aggregates_parse() {
        let p = parse_program("connected(FIRST) :- FIRST = #min{X : node(X)}.").unwrap();
        let Literal::Agg(agg) = &p.rules[0].body[0] else {
            panic!()
        };
        assert_eq!(agg.func, AggFunc::Min);
        assert!(matches!(agg.guard, Some((CmpOp::Eq, Term::Var(0)))));
        let p = parse_program("big :- #sum{A,C : income(C,A)} > 10. t(T) :- T = #sum+{A,C : income(C,A)}.")
            .unwrap();
        assert_eq!(p.rules.len(), 2);
        parse_program("c(N) :- N = #count{}.").unwrap();
    }

    #[test]
    fn intervals_consts_and_directives() {
        let p = parse_program("#const n=7.\nrange(1..n).\n#show range/1.\n").unwrap();
        assert_eq!(p.rules.len(), 1);
        assert_eq!(p.rules[0].to_string(), "range(1..7).");
    }

    #[test]
    fn unsupported_constructs() {
        for src in [
            "a | b.",
            "a ; b :- c.",
            "{a}.",
            ":~ a. [1@1]",
            "#minimize{1:a}.",
            "-a.",
            "p(1;2).",
        ] {
            assert!(
                matches!(parse_program(src), Err(ProgramError::Unsupported { .. })),
                "{src}: {:?}",
                parse_program(src)
            );
        }
    }

    #[test]
    fn constraints_with_external_terms_reparse() {
        let p = parse_program(":- bday(X1,X2), @valasp_validate_bday(bday(X1,X2)) != 1.").unwrap();
        assert!(p.rules[0].is_constraint());
        assert_eq!(
            p.rules[0].to_string(),
            ":- bday(X1,X2), @valasp_validate_bday(bday(X1,X2)) != 1."
        );
    }

    #[test]
    fn syntax_errors() {
        let e = parse_program("p(X :- q(X).").unwrap_err();
        assert!(matches!(e, ProgramError::Syntax(_)), "{e}");
        let e = parse_program("p(1)\nq(2).").unwrap_err();
        let ProgramError::Syntax(pe) = e else { panic!() };
        assert_eq!(pe.line, 2);
        assert!(parse_program("p(\"x).").is_err());
        assert!(parse_program("p :- not not q.").is_err());
    }

    #[test]
    fn display_round_trips() {
        let src = "range(1).\nrange((X+1)) :- range(X), X < 7.\nlocation(1,X) :- range(X), 3 <= X, X <= 5.\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.to_string(), src);
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }
}
