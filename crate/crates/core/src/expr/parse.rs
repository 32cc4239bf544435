use num_bigint::BigInt;
use num_traits::ToPrimitive;
use thiserror::Error;

use super::{DagBuilder, ExprDag, Symbol};
use crate::num::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared identifier `{name}`")]
    Undeclared { line: usize, col: usize, name: String },
    #[error("{line}:{col}: exponent must be an integer literal")]
    NonIntegerExponent { line: usize, col: usize },
}

impl ParseError {
    pub(crate) fn syntax(pos: Pos, msg: impl Into<String>) -> Self {
        ParseError::Syntax { line: pos.line, col: pos.col, msg: msg.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(BigInt),
    Decimal(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("number `{n}`"),
            Tok::Decimal(s) => format!("decimal `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eq => "`=`".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Splits text into tokens. `#` starts a comment running to end of line.
pub(crate) fn lex(text: &str) -> Result<(Vec<Token>, Pos), ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                col += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), pos });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            let mut decimal = false;
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() || (c == '.' && !decimal) {
                    decimal |= c == '.';
                    s.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            let tok = if decimal {
                Tok::Decimal(s)
            } else {
                Tok::Int(s.parse().expect("digits"))
            };
            out.push(Token { tok, pos });
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            other => return Err(ParseError::syntax(pos, format!("unexpected character `{other}`"))),
        };
        chars.next();
        col += 1;
        out.push(Token { tok, pos });
    }
    Ok((out, Pos { line, col }))
}

/// Recursive-descent parser over a token slice, emitting into a builder.
pub(crate) struct ExprParser<'a, F: Fn(&str) -> bool> {
    toks: &'a [Token],
    at: usize,
    end: Pos,
    declared: F,
}

impl<'a, F: Fn(&str) -> bool> ExprParser<'a, F> {
    pub fn new(toks: &'a [Token], end: Pos, declared: F) -> Self {
        ExprParser { toks, at: 0, end, declared }
    }

    pub fn position(&self) -> usize {
        self.at
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = self.peek().map(Tok::describe).unwrap_or_else(|| "end of input".into());
        ParseError::syntax(self.pos(), format!("expected {wanted}, found {found}"))
    }

    pub fn expr(&mut self, b: &mut DagBuilder) -> Result<usize, ParseError> {
        let mut acc = self.term(b)?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    let rhs = self.term(b)?;
                    acc = b.add(acc, rhs);
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    let rhs = self.term(b)?;
                    acc = b.sub(acc, rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self, b: &mut DagBuilder) -> Result<usize, ParseError> {
        let mut acc = self.factor(b)?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    let rhs = self.factor(b)?;
                    acc = b.mul(acc, rhs);
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    let rhs = self.factor(b)?;
                    acc = b.div(acc, rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self, b: &mut DagBuilder) -> Result<usize, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.at += 1;
            let inner = self.factor(b)?;
            return Ok(b.neg(inner));
        }
        let base = self.atom(b)?;
        if let Some(Tok::Caret) = self.peek() {
            self.at += 1;
            let pos = self.pos();
            // x^k, x^-k and x^(k), x^(-k)
            let paren = matches!(self.peek(), Some(Tok::LParen));
            if paren {
                self.at += 1;
            }
            let negative = if let Some(Tok::Minus) = self.peek() {
                self.at += 1;
                true
            } else {
                false
            };
            let k = match self.peek() {
                Some(Tok::Int(n)) => n.to_i64().ok_or_else(|| ParseError::syntax(pos, "exponent too large"))?,
                _ => return Err(ParseError::NonIntegerExponent { line: pos.line, col: pos.col }),
            };
            self.at += 1;
            if paren {
                if !matches!(self.peek(), Some(Tok::RParen)) {
                    return Err(ParseError::NonIntegerExponent { line: pos.line, col: pos.col });
                }
                self.at += 1;
            }
            return Ok(b.powi(base, if negative { -k } else { k }));
        }
        Ok(base)
    }

    fn atom(&mut self, b: &mut DagBuilder) -> Result<usize, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                if !(self.declared)(&name) {
                    return Err(ParseError::Undeclared { line: pos.line, col: pos.col, name });
                }
                self.at += 1;
                Ok(b.var(Symbol::from(name)))
            }
            Some(Tok::Int(n)) => {
                self.at += 1;
                Ok(b.constant(Rational::from_integer(n)))
            }
            Some(Tok::Decimal(s)) => Err(ParseError::syntax(
                pos,
                format!("decimal literal `{s}` is not supported; write an exact fraction"),
            )),
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.expr(b)?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.at += 1;
                        Ok(inner)
                    }
                    _ => Err(self.unexpected("`)`")),
                }
            }
            _ => Err(self.unexpected("an identifier, number or `(`")),
        }
    }
}

/// Parses one expression. Every identifier must appear in `symbols`.
pub fn parse_expr<S: AsRef<str>>(text: &str, symbols: &[S]) -> Result<ExprDag, ParseError> {
    let (toks, end) = lex(text)?;
    let mut b = DagBuilder::new();
    let mut p = ExprParser::new(&toks, end, |name: &str| symbols.iter().any(|s| s.as_ref() == name));
    let root = p.expr(&mut b)?;
    if p.position() != toks.len() {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(b.finish(root))
}
