//! Tokenizer with Python-style indentation tokens.

use num_bigint::BigInt;

use super::ScriptParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) enum Tok {
    Name(String),
    Int(BigInt),
    Str(String),
    /// Raw body of an f-string, braces unparsed.
    FStr(String),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const OPS: [&str; 28] = [
    "**=", "//=", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "%=", "<", ">", "=", "+",
    "-", "*", "/", "%", "(", ")", "[", "]", ",", ":", ".", ";",
];

pub(super) fn tokenize(src: &str) -> Result<Vec<Token>, ScriptParseError> {
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize;
    let mut pending_newline = false;

    for (li, line) in src.lines().enumerate() {
        let lineno = li + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        if depth == 0 {
            let mut width = 0;
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                width = if chars[i] == '\t' { (width / 8 + 1) * 8 } else { width + 1 };
                i += 1;
            }
            if i == chars.len() || chars[i] == '#' {
                continue;
            }
            if pending_newline {
                out.push(Token { tok: Tok::Newline, line: lineno - 1, column: 1 });
                pending_newline = false;
            }
            let top = *indents.last().unwrap();
            if width > top {
                indents.push(width);
                out.push(Token { tok: Tok::Indent, line: lineno, column: i + 1 });
            } else {
                while width < *indents.last().unwrap() {
                    indents.pop();
                    out.push(Token { tok: Tok::Dedent, line: lineno, column: i + 1 });
                }
                if width != *indents.last().unwrap() {
                    return Err(ScriptParseError {
                        line: lineno,
                        column: i + 1,
                        message: "unindent does not match any outer indentation level".into(),
                    });
                }
            }
        }
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let err = |message: String| ScriptParseError { line: lineno, column, message };
            if c == ' ' || c == '\t' {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: lineno, column });
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
                if i < chars.len() && (chars[i].is_alphabetic() || chars[i] == '.') {
                    return Err(err(format!("malformed number `{}{}`", text, chars[i])));
                }
                push(&mut out, Tok::Int(text.parse().expect("decimal digits")));
                continue;
            }
            let is_fstring = (c == 'f' || c == 'F')
                && i + 1 < chars.len()
                && (chars[i + 1] == '"' || chars[i + 1] == '\'');
            if c == '"' || c == '\'' || is_fstring {
                if is_fstring {
                    i += 1;
                }
                let quote = chars[i];
                i += 1;
                let mut text = String::new();
                loop {
                    let Some(&ch) = chars.get(i) else {
                        return Err(err("unterminated string literal".into()));
                    };
                    i += 1;
                    if ch == quote {
                        break;
                    }
                    if ch == '\\' {
                        let Some(&esc) = chars.get(i) else {
                            return Err(err("unterminated string literal".into()));
                        };
                        i += 1;
                        match esc {
                            'n' => text.push('\n'),
                            't' => text.push('\t'),
                            '\\' => text.push('\\'),
                            '\'' => text.push('\''),
                            '"' => text.push('"'),
                            other => {
                                text.push('\\');
                                text.push(other);
                            }
                        }
                    } else {
                        text.push(ch);
                    }
                }
                push(&mut out, if is_fstring { Tok::FStr(text) } else { Tok::Str(text) });
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                push(&mut out, Tok::Name(chars[start..i].iter().collect()));
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let Some(op) = OPS.iter().find(|op| rest.starts_with(**op)) else {
                return Err(err(format!("unexpected character `{c}`")));
            };
            match *op {
                "(" | "[" => depth += 1,
                ")" | "]" => depth = depth.saturating_sub(1),
                _ => {}
            }
            i += op.len();
            push(&mut out, Tok::Op(op));
        }
        if depth == 0 {
            pending_newline = true;
        }
    }
    let last = src.lines().count().max(1);
    if depth > 0 {
        return Err(ScriptParseError {
            line: last,
            column: 1,
            message: "unclosed bracket at end of script".into(),
        });
    }
    if pending_newline {
        out.push(Token { tok: Tok::Newline, line: last, column: 1 });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token { tok: Tok::Dedent, line: last, column: 1 });
    }
    out.push(Token { tok: Tok::Eof, line: last, column: 1 });
    Ok(out)
}
