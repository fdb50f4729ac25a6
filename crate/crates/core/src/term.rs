//! Ground ASP terms and facts.
//!
//! Terms are parsed from the text a grounder would print (`date(1982,123)`,
//! `"Acme ASP"`, `(1,2,3)`, `-5`) and rendered back in canonical form, so
//! that `parse_term(&t.to_string()) == t` for every term. Integers are
//! unbounded here; range restrictions belong to validation.
//!
//! Terms are totally ordered the way clingo orders symbols: numbers first,
//! then constants, then strings, then compound terms (functions and
//! non-empty tuples) by arity, name and arguments. A tuple behaves like a
//! function with an empty name.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;

const MAX_DEPTH: usize = 256;

/// A variable-free ASP term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroundTerm {
    Number(BigInt),
    /// String contents without the surrounding quotes and with escapes resolved.
    Str(String),
    Const(String),
    Func { name: String, args: Vec<GroundTerm> },
    Tuple(Vec<GroundTerm>),
}

impl GroundTerm {
    pub fn number(n: impl Into<BigInt>) -> Self {
        GroundTerm::Number(n.into())
    }

    pub fn string(s: impl Into<String>) -> Self {
        GroundTerm::Str(s.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        GroundTerm::Const(name.into())
    }

    /// Builds a function term; an empty argument list yields a constant.
    pub fn func(name: impl Into<String>, args: Vec<GroundTerm>) -> Self {
        let name = name.into();
        if args.is_empty() {
            GroundTerm::Const(name)
        } else {
            GroundTerm::Func { name, args }
        }
    }

    pub fn as_number(&self) -> Option<&BigInt> {
        match self {
            GroundTerm::Number(n) => Some(n),
            _ => None,
        }
    }

    /// Name of a constant or function, `None` for other kinds.
    pub fn symbol_name(&self) -> Option<&str> {
        match self {
            GroundTerm::Const(name) | GroundTerm::Func { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            GroundTerm::Number(_) => "integer",
            GroundTerm::Str(_) => "string",
            GroundTerm::Const(_) => "constant",
            GroundTerm::Func { .. } => "function",
            GroundTerm::Tuple(_) => "tuple",
        }
    }

    // (rank, arity, name, args) in the grounder's symbol order
    fn sort_key(&self) -> (u8, usize, &str, &[GroundTerm]) {
        match self {
            GroundTerm::Number(_) => (0, 0, "", &[]),
            GroundTerm::Const(name) => (1, 0, name, &[]),
            GroundTerm::Tuple(args) if args.is_empty() => (1, 0, "", &[]),
            GroundTerm::Str(_) => (2, 0, "", &[]),
            GroundTerm::Tuple(args) => (3, args.len(), "", args),
            GroundTerm::Func { name, args } => (3, args.len(), name, args),
        }
    }
}

impl Ord for GroundTerm {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (GroundTerm::Number(a), GroundTerm::Number(b)) => a.cmp(b),
            (GroundTerm::Str(a), GroundTerm::Str(b)) => a.cmp(b),
            _ => {
                let (ra, na, sa, aa) = self.sort_key();
                let (rb, nb, sb, ab) = other.sort_key();
                ra.cmp(&rb)
                    .then(na.cmp(&nb))
                    .then_with(|| sa.cmp(sb))
                    .then_with(|| aa.cmp(ab))
            }
        }
    }
}

impl PartialOrd for GroundTerm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order on ground terms.
pub fn compare(a: &GroundTerm, b: &GroundTerm) -> Ordering {
    a.cmp(b)
}

pub(crate) fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[GroundTerm]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for GroundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTerm::Number(n) => write!(f, "{n}"),
            GroundTerm::Str(s) => write_quoted(f, s),
            GroundTerm::Const(name) => f.write_str(name),
            GroundTerm::Func { name, args } => {
                write!(f, "{name}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            GroundTerm::Tuple(args) => {
                f.write_str("(")?;
                write_args(f, args)?;
                if args.len() == 1 {
                    f.write_str(",")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Canonical text of a term.
pub fn render(t: &GroundTerm) -> String {
    t.to_string()
}

/// A ground atom `predicate(args...)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<GroundTerm>,
}

impl Fact {
    pub fn new(predicate: impl Into<String>, args: Vec<GroundTerm>) -> Self {
        Fact {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// The atom viewed as a term (`p` or `p(args)`).
    pub fn to_term(&self) -> GroundTerm {
        GroundTerm::func(self.predicate.clone(), self.args.clone())
    }

    /// Constants and functions are atoms; other terms are not.
    pub fn from_term(t: GroundTerm) -> Option<Fact> {
        match t {
            GroundTerm::Const(name) => Some(Fact::new(name, Vec::new())),
            GroundTerm::Func { name, args } => Some(Fact::new(name, args)),
            _ => None,
        }
    }
}

// Facts sort by predicate name, then arity, then arguments in term order.
impl Ord for Fact {
    fn cmp(&self, other: &Self) -> Ordering {
        self.predicate
            .cmp(&other.predicate)
            .then(self.args.len().cmp(&other.args.len()))
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Fact {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            write_args(f, &self.args)?;
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Syntax error in term, fact, or ground-program text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at line {line}, column {column} (byte {offset}): {message}")]
pub struct ParseError {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn at(src: &str, offset: usize, message: impl Into<String>) -> Self {
        let (line, column) = line_col(src, offset);
        ParseError {
            offset,
            line,
            column,
            message: message.into(),
        }
    }
}

pub(crate) fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = before
        .iter()
        .rposition(|&b| b == b'\n')
        .map_or(0, |p| p + 1);
    let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
    (line, column)
}

pub(crate) fn is_ident_start(b: u8) -> bool {
    b.is_ascii_lowercase()
}

pub(crate) fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'\''
}

/// Whether `s` is a constant / predicate name: `_*[a-z][A-Za-z0-9_']*`.
pub fn is_identifier(s: &str) -> bool {
    let b = s.trim_start_matches('_').as_bytes();
    !b.is_empty() && is_ident_start(b[0]) && b[1..].iter().all(|c| is_ident_continue(*c))
}

/// Byte cursor shared by the term, fact, and ground-output parsers.
pub(crate) struct Cursor<'a> {
    pub(crate) src: &'a str,
    pub(crate) pos: usize,
    depth: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Cursor {
            src,
            pos: 0,
            depth: 0,
        }
    }

    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    pub(crate) fn peek(&self) -> Option<u8> {
        self.bytes().get(self.pos).copied()
    }

    pub(crate) fn peek_at(&self, n: usize) -> Option<u8> {
        self.bytes().get(self.pos + n).copied()
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub(crate) fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::at(self.src, self.pos, message)
    }

    pub(crate) fn found(&self) -> String {
        match self.src[self.pos..].chars().next() {
            None => "end of input".to_string(),
            Some(c) => format!("`{c}`"),
        }
    }

    pub(crate) fn expected(&self, what: &str) -> ParseError {
        self.error(format!("expected {what}, found {}", self.found()))
    }

    /// Skips whitespace, `%` line comments and `%* ... *%` block comments.
    pub(crate) fn skip_ws(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'%') if self.peek_at(1) == Some(b'*') => {
                    let start = self.pos;
                    match self.src[self.pos + 2..].find("*%") {
                        Some(i) => self.pos += 2 + i + 2,
                        None => return Err(ParseError::at(self.src, start, "unterminated block comment")),
                    }
                }
                Some(b'%') => match self.src[self.pos..].find('\n') {
                    Some(i) => self.pos += i + 1,
                    None => self.pos = self.src.len(),
                },
                _ => return Ok(()),
            }
        }
    }

    pub(crate) fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, b: u8) -> Result<(), ParseError> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{}`", b as char)))
        }
    }

    /// Identifier `_*[a-z][A-Za-z0-9_']*`; returns `None` without consuming
    /// anything when the input does not start with one.
    pub(crate) fn ident(&mut self) -> Option<&'a str> {
        let bytes = self.bytes();
        let start = self.pos;
        let mut i = start;
        while bytes.get(i) == Some(&b'_') {
            i += 1;
        }
        if !bytes.get(i).is_some_and(|&b| is_ident_start(b)) {
            return None;
        }
        while bytes.get(i).is_some_and(|&b| is_ident_continue(b)) {
            i += 1;
        }
        self.pos = i;
        Some(&self.src[start..i])
    }

    pub(crate) fn digits(&mut self) -> Option<BigInt> {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        BigInt::parse_bytes(&self.bytes()[start..self.pos], 10)
    }

    /// Parses a quoted string starting at the opening `"`.
    pub(crate) fn string(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(c) = rest.chars().next() else {
                return Err(ParseError::at(self.src, start, "unterminated string"));
            };
            match c {
                '"' => {
                    self.pos += 1;
                    return Ok(out);
                }
                '\n' => return Err(ParseError::at(self.src, start, "unterminated string")),
                '\\' => {
                    let esc = rest[1..].chars().next();
                    match esc {
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some('n') => out.push('\n'),
                        _ => return Err(self.error("invalid escape sequence in string")),
                    }
                    self.pos += 2;
                }
                c => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
    }

    /// Parses one ground term at the current position.
    pub(crate) fn term(&mut self) -> Result<GroundTerm, ParseError> {
        self.skip_ws()?;
        match self.peek() {
            Some(b'-') if self.peek_at(1).is_some_and(|b| b.is_ascii_digit()) => {
                self.pos += 1;
                let n = self.digits().ok_or_else(|| self.expected("digits"))?;
                Ok(GroundTerm::Number(-n))
            }
            Some(b) if b.is_ascii_digit() => {
                let n = self.digits().ok_or_else(|| self.expected("digits"))?;
                Ok(GroundTerm::Number(n))
            }
            Some(b'"') => Ok(GroundTerm::Str(self.string()?)),
            Some(b'(') => {
                self.pos += 1;
                self.nested(|c| c.tuple_rest())
            }
            _ => {
                let Some(name) = self.ident() else {
                    return Err(self.expected("a term"));
                };
                let args = self.opt_args()?;
                Ok(GroundTerm::func(name, args))
            }
        }
    }

    fn nested<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, ParseError>,
    ) -> Result<T, ParseError> {
        if self.depth >= MAX_DEPTH {
            return Err(self.error("term nesting too deep"));
        }
        self.depth += 1;
        let r = f(self);
        self.depth -= 1;
        r
    }

    // after `(`: `)` | term `)` | term `,` [terms] [`,`] `)`
    fn tuple_rest(&mut self) -> Result<GroundTerm, ParseError> {
        self.skip_ws()?;
        if self.eat(b')') {
            return Ok(GroundTerm::Tuple(Vec::new()));
        }
        let first = self.term()?;
        self.skip_ws()?;
        if self.eat(b')') {
            return Ok(first);
        }
        let mut items = vec![first];
        loop {
            self.skip_ws()?;
            if !self.eat(b',') {
                return Err(self.expected("`,` or `)`"));
            }
            self.skip_ws()?;
            if self.eat(b')') {
                return Ok(GroundTerm::Tuple(items));
            }
            items.push(self.term()?);
            self.skip_ws()?;
            if self.eat(b')') {
                return Ok(GroundTerm::Tuple(items));
            }
        }
    }

    /// Optional parenthesised argument list after a name; `f()` has no arguments.
    pub(crate) fn opt_args(&mut self) -> Result<Vec<GroundTerm>, ParseError> {
        let save = self.pos;
        self.skip_ws()?;
        if !self.eat(b'(') {
            self.pos = save;
            return Ok(Vec::new());
        }
        self.nested(|c| {
            let mut args = Vec::new();
            c.skip_ws()?;
            if c.eat(b')') {
                return Ok(args);
            }
            loop {
                args.push(c.term()?);
                c.skip_ws()?;
                if c.eat(b')') {
                    return Ok(args);
                }
                if !c.eat(b',') {
                    return Err(c.expected("`,` or `)`"));
                }
            }
        })
    }

    /// Parses an atom `name` or `name(args)`.
    pub(crate) fn atom(&mut self) -> Result<Fact, ParseError> {
        self.skip_ws()?;
        let Some(name) = self.ident() else {
            return Err(self.expected("a predicate name"));
        };
        let args = self.opt_args()?;
        Ok(Fact::new(name, args))
    }
}

/// Parses a single ground term; surrounding whitespace is allowed.
pub fn parse_term(text: &str) -> Result<GroundTerm, ParseError> {
    let mut c = Cursor::new(text);
    c.skip_ws()?;
    if c.at_end() {
        return Err(c.expected("a term"));
    }
    let t = c.term()?;
    c.skip_ws()?;
    if !c.at_end() {
        return Err(c.expected("end of input"));
    }
    Ok(t)
}

/// Parses a facts-only file: atoms each terminated by `.`, with `%` comments.
/// Duplicates are kept in source order.
pub fn parse_facts(text: &str) -> Result<Vec<Fact>, ParseError> {
    let mut c = Cursor::new(text);
    let mut facts = Vec::new();
    loop {
        c.skip_ws()?;
        if c.at_end() {
            return Ok(facts);
        }
        if c.starts_with(":-") {
            return Err(rule_in_facts(&c));
        }
        let start = c.pos;
        let fact = match c.atom() {
            Ok(f) => f,
            Err(e) => {
                if statement_is_rule(&text[start..]) {
                    c.pos = start;
                    return Err(rule_in_facts(&c));
                }
                return Err(e);
            }
        };
        c.skip_ws()?;
        if c.starts_with(":-") {
            return Err(rule_in_facts(&c));
        }
        if !c.eat(b'.') {
            return Err(c.expected("`.` after fact"));
        }
        facts.push(fact);
    }
}

fn statement_is_rule(rest: &str) -> bool {
    let end = rest
        .char_indices()
        .find(|&(i, ch)| ch == '.' && !rest[i + 1..].starts_with(|n: char| n == '.' || n.is_ascii_digit()))
        .map_or(rest.len(), |(i, _)| i);
    rest[..end].contains(":-")
}

fn rule_in_facts(c: &Cursor<'_>) -> ParseError {
    let (line, _) = line_col(c.src, c.pos);
    c.error(format!(
        "rule found in facts-only input on line {line}: {}",
        c.src.lines().nth(line - 1).unwrap_or("").trim()
    ))
}
