//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := power (('*' | '/') power)*
//! power   := unary ('^' integer)*
//! unary   := '-' unary | primary
//! primary := number | variable | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp'
//! variable:= ('x' | 'y') [1-9][0-9]*
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//!          | '.' digits [exponent]
//! ```
//!
//! Unary minus binds tighter than `^`, so `-x1^2` is `(-x1)^2`.

use thiserror::Error;

use super::{Expr, Var, VarKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("parse error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => {
                *offset
            }
        }
    }

    fn syntax(offset: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Number(&'a str),
    Ident(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(tok: &Tok<'_>) -> String {
    match tok {
        Tok::Number(s) => format!("number `{s}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok<'_>)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i)?;
                out.push((start, Tok::Number(&src[start..i])));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(&src[start..i])));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

fn scan_number(bytes: &[u8], start: usize) -> Result<usize, ParseError> {
    let digits = |mut i: usize| {
        let from = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        (i, i - from)
    };
    let (mut i, int_digits) = digits(start);
    let mut frac_digits = 0;
    if i < bytes.len() && bytes[i] == b'.' {
        (i, frac_digits) = digits(i + 1);
    }
    if int_digits + frac_digits == 0 {
        return Err(ParseError::syntax(start, "malformed number"));
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let (end, exp_digits) = digits(j);
        if exp_digits == 0 {
            return Err(ParseError::syntax(i, "malformed exponent in number"));
        }
        i = end;
    }
    Ok(i)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok<'a> {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> (usize, Tok<'a>) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::syntax(
            self.offset(),
            format!("expected {wanted}, found {}", describe(self.peek())),
        )
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::mul(lhs, self.power()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::div(lhs, self.power()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.unary()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let (at, tok) = self.bump();
            let exponent = match tok {
                Tok::Number(s) if s.bytes().all(|b| b.is_ascii_digit()) => s
                    .parse::<u32>()
                    .map_err(|_| ParseError::syntax(at, "exponent out of range"))?,
                other => {
                    return Err(ParseError::syntax(
                        at,
                        format!(
                            "exponent must be a non-negative integer literal, found {}",
                            describe(&other)
                        ),
                    ))
                }
            };
            base = Expr::powi(base, exponent);
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Number(s) => {
                self.bump();
                let v: f64 = s
                    .parse()
                    .map_err(|_| ParseError::syntax(at, format!("malformed number `{s}`")))?;
                if !v.is_finite() {
                    return Err(ParseError::syntax(at, format!("number `{s}` overflows")));
                }
                Ok(Expr::Constant(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let build: fn(Box<Expr>) -> Expr = match name {
                        "sin" => Expr::Sin,
                        "cos" => Expr::Cos,
                        "exp" => Expr::Exp,
                        _ => {
                            return Err(ParseError::UnknownFunction {
                                offset: at,
                                name: name.to_string(),
                            })
                        }
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(build(Box::new(arg)));
                }
                parse_var(name)
                    .map(Expr::Var)
                    .ok_or_else(|| ParseError::syntax(at, format!("unknown identifier `{name}`")))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(self.unexpected("an operand")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() != Tok::RParen {
            return Err(self.unexpected("`)`"));
        }
        self.bump();
        Ok(())
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let kind = match name.as_bytes().first()? {
        b'x' => VarKind::X,
        b'y' => VarKind::Y,
        _ => return None,
    };
    let digits = &name[1..];
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let index = digits.parse().ok()?;
    Some(Var { kind, index })
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}
