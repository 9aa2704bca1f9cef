//! Recursive-descent parser for the Lagrangian language.
//!
//! ```text
//! expr   = term { ("+" | "-") term } ;
//! term   = unary { ("*" | "/") unary } ;
//! unary  = "-" unary | power ;
//! power  = atom [ "^" unary ] ;
//! atom   = number | ident | "D" "(" expr "," integer ")" | "(" expr ")" ;
//! ```

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{ToPrimitive, Zero};

use super::expr::JetExpression;
use super::var::{Base, JetVar};

pub const DEFAULT_MAX_ORDER: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    Expected(&'static str),
    UnknownIdentifier(String),
    NegativeOrder(i64),
    OrderTooHigh { order: u32, max: u32 },
    NonConstantExponent,
    ExponentOutOfRange,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub offset: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: ", self.offset)?;
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input"),
            ParseErrorKind::Expected(what) => write!(f, "expected {what}"),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::NegativeOrder(n) => write!(f, "negative derivative order {n}"),
            ParseErrorKind::OrderTooHigh { order, max } => {
                write!(f, "derivative order {order} exceeds the maximum {max}")
            }
            ParseErrorKind::NonConstantExponent => f.write_str("exponent must be a constant"),
            ParseErrorKind::ExponentOutOfRange => f.write_str("exponent does not fit a 64-bit ratio"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub max_order: u32,
    /// Identifiers other than `k1`, `k2` (i.e. `mu`, `lambda`) are accepted.
    pub allow_multipliers: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_order: DEFAULT_MAX_ORDER,
            allow_multipliers: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let int_end = i;
            let mut frac = "";
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let f0 = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                frac = &src[f0..i];
            }
            let mut exp: i64 = 0;
            let mut has_exp = false;
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let e0 = i;
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                let d0 = j;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j == d0 {
                    return Err(ParseError {
                        kind: ParseErrorKind::Expected("exponent digits"),
                        offset: e0,
                    });
                }
                exp = src[i + 1..j].parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::ExponentOutOfRange,
                    offset: e0,
                })?;
                has_exp = true;
                i = j;
            }
            let int_part = &src[start..int_end];
            if int_part.is_empty() && frac.is_empty() {
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar('.'),
                    offset: start,
                });
            }
            let digits = format!("{int_part}{frac}");
            let mantissa: BigInt = if digits.is_empty() {
                BigInt::zero()
            } else {
                digits.parse().expect("ascii digits")
            };
            let scale = exp - frac.len() as i64;
            if scale.unsigned_abs() > 4096 {
                return Err(ParseError {
                    kind: ParseErrorKind::ExponentOutOfRange,
                    offset: start,
                });
            }
            let ten = BigInt::from(10);
            let value = if scale >= 0 {
                BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
            } else {
                BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
            };
            let plain_int = frac.is_empty() && !has_exp && src[start..i].find('.').is_none();
            if plain_int {
                out.push((Tok::Int(value.to_integer()), start));
            } else {
                out.push((Tok::Num(value), start));
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let ch = src[start..].chars().next().unwrap();
        return Err(ParseError {
            kind: ParseErrorKind::UnexpectedChar(ch),
            offset: start,
        });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    opts: &'a ParseOptions,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, kind: ParseErrorKind) -> Result<T, ParseError> {
        Err(ParseError {
            kind,
            offset: self.offset(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &'static str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.pos += 1;
                Ok(())
            }
            None => self.err(ParseErrorKind::UnexpectedEnd),
            _ => self.err(ParseErrorKind::Expected(what)),
        }
    }

    fn expr(&mut self) -> Result<JetExpression, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    terms.push(-self.term()?);
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            JetExpression::Add { terms }
        })
    }

    fn term(&mut self) -> Result<JetExpression, ParseError> {
        let mut acc = self.unary()?;
        let mut factors: Vec<JetExpression> = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    if factors.is_empty() {
                        factors.push(acc);
                    }
                    factors.push(rhs);
                    acc = JetExpression::Mul {
                        factors: factors.clone(),
                    };
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = acc / rhs;
                    factors.clear();
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<JetExpression, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            if let JetExpression::Const { value } = &inner {
                return Ok(JetExpression::constant(-value.clone()));
            }
            return Ok(-inner);
        }
        self.power()
    }

    fn power(&mut self) -> Result<JetExpression, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let at = self.offset();
            let exponent = self.unary()?;
            let value = exponent
                .canonical()
                .ok()
                .and_then(|c| c.as_constant())
                .ok_or(ParseError {
                    kind: ParseErrorKind::NonConstantExponent,
                    offset: at,
                })?;
            let small = value
                .numer()
                .to_i64()
                .zip(value.denom().to_i64())
                .map(|(n, d)| Rational64::new(n, d))
                .ok_or(ParseError {
                    kind: ParseErrorKind::ExponentOutOfRange,
                    offset: at,
                })?;
            return Ok(base.pow(small));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<JetExpression, ParseError> {
        let at = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return self.err(ParseErrorKind::UnexpectedEnd);
        };
        self.pos += 1;
        match tok {
            Tok::Int(n) => Ok(JetExpression::constant(BigRational::from_integer(n))),
            Tok::Num(q) => Ok(JetExpression::constant(q)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "D" => self.derivative(),
            Tok::Ident(name) => self.identifier(&name, at),
            other => {
                self.pos -= 1;
                let c = match other {
                    Tok::RParen => ')',
                    Tok::Comma => ',',
                    Tok::Star => '*',
                    Tok::Slash => '/',
                    Tok::Caret => '^',
                    Tok::Plus => '+',
                    _ => '?',
                };
                self.err(ParseErrorKind::UnexpectedChar(c))
            }
        }
    }

    fn identifier(&self, name: &str, at: usize) -> Result<JetExpression, ParseError> {
        let unknown = || ParseError {
            kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
            offset: at,
        };
        let var = JetVar::from_name(name).ok_or_else(unknown)?;
        if !var.base.is_kappa() && !self.opts.allow_multipliers {
            return Err(unknown());
        }
        if var.order > self.opts.max_order {
            return Err(ParseError {
                kind: ParseErrorKind::OrderTooHigh {
                    order: var.order,
                    max: self.opts.max_order,
                },
                offset: at,
            });
        }
        Ok(JetExpression::var(var))
    }

    fn derivative(&mut self) -> Result<JetExpression, ParseError> {
        self.expect(Tok::LParen, "`(` after D")?;
        let inner = self.expr()?;
        self.expect(Tok::Comma, "`,` before the derivative order")?;
        let order_at = self.offset();
        let negative = matches!(self.peek(), Some(Tok::Minus));
        if negative {
            self.pos += 1;
        }
        let n = match self.peek() {
            Some(Tok::Int(n)) => n.clone(),
            None => return self.err(ParseErrorKind::UnexpectedEnd),
            _ => return self.err(ParseErrorKind::Expected("an integer derivative order")),
        };
        self.pos += 1;
        self.expect(Tok::RParen, "`)`")?;
        let n = n.to_i64().unwrap_or(i64::MAX);
        if negative && n != 0 {
            return Err(ParseError {
                kind: ParseErrorKind::NegativeOrder(-n),
                offset: order_at,
            });
        }
        let max = self.opts.max_order;
        let too_high = |order: u32| ParseError {
            kind: ParseErrorKind::OrderTooHigh { order, max },
            offset: order_at,
        };
        if n > max as i64 {
            return Err(too_high(n.min(u32::MAX as i64) as u32));
        }
        let result = super::total_derivative(&inner, n as u32);
        let highest = [Base::Kappa1, Base::Kappa2, Base::Mu, Base::Lambda]
            .into_iter()
            .filter_map(|b| result.max_order(b))
            .max();
        if let Some(h) = highest.filter(|h| *h > max) {
            return Err(too_high(h));
        }
        Ok(result)
    }
}

/// Parse an expression with the given options.
pub fn parse_with(text: &str, opts: &ParseOptions) -> Result<JetExpression, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        opts,
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        let (tok, offset) = &p.toks[p.pos];
        let kind = match tok {
            Tok::RParen => ParseErrorKind::UnexpectedChar(')'),
            Tok::Comma => ParseErrorKind::UnexpectedChar(','),
            _ => ParseErrorKind::Expected("an operator"),
        };
        return Err(ParseError {
            kind,
            offset: *offset,
        });
    }
    Ok(e)
}

/// Parse any jet expression, including `mu` and `lambda`.
pub fn parse_expression(text: &str) -> Result<JetExpression, ParseError> {
    parse_with(
        text,
        &ParseOptions {
            allow_multipliers: true,
            ..ParseOptions::default()
        },
    )
}
