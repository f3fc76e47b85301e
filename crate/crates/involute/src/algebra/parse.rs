//! Parser for polynomial and rational-function expressions.
//!
//! The accepted grammar matches the canonical renderer: integer literals,
//! registered variable names (multiplier jets as `family_k`), `+ - * / ^`,
//! unary minus, and parentheses. `/` is ordinary field division, so `1/3`
//! and `(x+y)/(1-y)` both parse; [`parse_poly`] additionally demands that the
//! result be polynomial. Everything the renderer emits parses back to the
//! same value.

use num::bigint::BigInt;
use num::rational::BigRational;

use crate::algebra::poly::Poly;
use crate::algebra::ratfunc::RatFunc;
use crate::algebra::vars::{VarError, VarRegistry};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character `{ch}` at byte {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected {found} at byte {pos}, expected {expected}")]
    UnexpectedToken {
        found: String,
        expected: &'static str,
        pos: usize,
    },
    #[error(transparent)]
    UnknownVariable(#[from] VarError),
    #[error("exponent at byte {pos} does not fit in u32")]
    ExponentTooLarge { pos: usize },
    #[error("division by zero in expression")]
    DivisionByZero,
    #[error("expression is not polynomial (denominator `{den}` remains)")]
    NotPolynomial { den: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = src[start..i].parse().expect("digits");
                out.push((Tok::Num(n), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            other => return Err(ParseError::UnexpectedChar { ch: other, pos: i }),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    reg: &'a VarRegistry,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next_pos(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, p)| p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let found = match self.peek() {
            Some(Tok::Num(n)) => format!("number `{n}`"),
            Some(Tok::Ident(s)) => format!("identifier `{s}`"),
            Some(t) => format!("`{}`", tok_str(t)),
            None => "end of input".to_string(),
        };
        ParseError::UnexpectedToken {
            found,
            expected,
            pos: self.next_pos(),
        }
    }

    fn expr(&mut self) -> Result<RatFunc, ParseError> {
        let mut acc = match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                self.term()?.neg()
            }
            Some(Tok::Plus) => {
                self.bump();
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RatFunc, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    acc = acc.mul(&self.factor()?);
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.factor()?;
                    acc = acc.div(&rhs).map_err(|_| ParseError::DivisionByZero)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<RatFunc, ParseError> {
        let base = self.base()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let pos = self.next_pos();
            match self.bump() {
                Some(Tok::Num(n)) => {
                    let e: u32 = n
                        .try_into()
                        .map_err(|_| ParseError::ExponentTooLarge { pos })?;
                    let num = base.num().pow(e);
                    let den = base.den().pow(e);
                    return Ok(RatFunc::new(num, den).expect("nonzero denominator power"));
                }
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    return Err(self.unexpected("a nonnegative integer exponent"));
                }
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<RatFunc, ParseError> {
        match self.peek() {
            Some(Tok::Num(_)) => {
                let Some(Tok::Num(n)) = self.bump() else {
                    unreachable!()
                };
                Ok(RatFunc::from_poly(Poly::constant(BigRational::from_integer(
                    n,
                ))))
            }
            Some(Tok::Ident(_)) => {
                let Some(Tok::Ident(name)) = self.bump() else {
                    unreachable!()
                };
                let v = self.reg.resolve(&name)?;
                Ok(RatFunc::from_poly(Poly::var(v)))
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        Err(self.unexpected("`)`"))
                    }
                }
            }
            Some(Tok::Minus) => {
                self.bump();
                Ok(self.factor()?.neg())
            }
            _ => Err(self.unexpected("a number, variable, or `(`")),
        }
    }
}

fn tok_str(t: &Tok) -> &'static str {
    match t {
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Caret => "^",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::Num(_) | Tok::Ident(_) => unreachable!(),
    }
}

/// Parses an expression as a rational function over `reg`'s variables.
pub fn parse_ratfunc(src: &str, reg: &VarRegistry) -> Result<RatFunc, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        reg,
        src_len: src.len(),
    };
    let value = p.expr()?;
    if p.peek().is_some() {
        return Err(p.unexpected("end of input"));
    }
    Ok(value)
}

/// Parses an expression that must simplify to a polynomial. Rational
/// *constants* are fine (`x/2`); a surviving variable denominator is not.
pub fn parse_poly(src: &str, reg: &VarRegistry) -> Result<Poly, ParseError> {
    let r = parse_ratfunc(src, reg)?;
    match r.den().as_constant() {
        Some(c) => Ok(r.num().scale(&c.recip())),
        None => Err(ParseError::NotPolynomial {
            den: r.den().render(reg),
        }),
    }
}
