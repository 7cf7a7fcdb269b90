use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    Expected(&'static str),
    BadNumber(String),
    UnknownIdentifier(String),
    VariableOutOfRange { index: usize, dim: usize },
    TrailingInput,
}

/// Parse failure with the byte offset where it was detected.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("parse error at position {pos}: {kind:?}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

/// Parses `text` over variables `x1..xm`. When `m == 1`, a bare `x` is
/// accepted as an alias for `x1`.
pub fn parse(text: &str, m: usize) -> Result<Expr, ParseError> {
    Parser::new(text, Vars::Indexed(m)).run()
}

/// Parses `text` over the named variables; `names[k]` becomes `Var(k)`.
pub fn parse_with(text: &str, names: &[&str]) -> Result<Expr, ParseError> {
    Parser::new(text, Vars::Named(names)).run()
}

enum Vars<'a> {
    Indexed(usize),
    Named(&'a [&'a str]),
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: Vars<'a>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, vars: Vars<'a>) -> Self {
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            vars,
        }
    }

    fn run(mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.err(ParseErrorKind::TrailingInput));
        }
        Ok(e)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            pos: self.pos,
            kind,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let a = self.unary()?;
            return Ok(Expr::Unary(Func::Neg, Box::new(a)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.err(ParseErrorKind::UnexpectedEnd)),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err(ParseErrorKind::Expected("')'")));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.err(ParseErrorKind::UnexpectedChar(c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.bytes.len() && p.bytes[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.bytes.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                // `2e` is not an exponent; leave `e` for the next token,
                // which then fails as implicit multiplication.
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Expr::Const).map_err(|_| ParseError {
            pos: start,
            kind: ParseErrorKind::BadNumber(text.to_string()),
        })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];

        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.err(ParseErrorKind::Expected("'(' after function name")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err(ParseErrorKind::Expected("')'")));
            }
            return Ok(Expr::Unary(func, Box::new(arg)));
        }

        if let Some(k) = self.variable(name, start)? {
            return Ok(Expr::Var(k));
        }

        match name {
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            "inf" => Ok(Expr::Const(f64::INFINITY)),
            _ => Err(ParseError {
                pos: start,
                kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
            }),
        }
    }

    fn variable(&self, name: &str, start: usize) -> Result<Option<usize>, ParseError> {
        match self.vars {
            Vars::Named(names) => Ok(names.iter().position(|n| *n == name)),
            Vars::Indexed(m) => {
                if name == "x" && m == 1 {
                    return Ok(Some(0));
                }
                let Some(digits) = name.strip_prefix('x') else {
                    return Ok(None);
                };
                if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
                    return Ok(None);
                }
                let index: usize = digits.parse().map_err(|_| ParseError {
                    pos: start,
                    kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                })?;
                if index == 0 || index > m {
                    return Err(ParseError {
                        pos: start,
                        kind: ParseErrorKind::VariableOutOfRange { index, dim: m },
                    });
                }
                Ok(Some(index - 1))
            }
        }
    }
}
