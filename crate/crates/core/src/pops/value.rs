//! Carrier elements and their text syntax.

use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Zero};

use super::PopsError;

/// Exact rational with 64-bit numerator and denominator.
pub type Rational = Ratio<i64>;

/// Element of an ∞-extended cost line. `Inf` compares greater than every finite cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cost {
    Finite(Rational),
    Inf,
}

impl Cost {
    pub fn int(n: i64) -> Cost {
        Cost::Finite(Rational::from_integer(n))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Cost::Inf)
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            Cost::Finite(r) => Some(*r),
            Cost::Inf => None,
        }
    }

    /// Tropical product: ordinary addition with ∞ absorbing.
    pub fn checked_add(self, other: Cost) -> Result<Cost, PopsError> {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => a.checked_add(&b).map(Cost::Finite).ok_or(PopsError::Overflow),
            _ => Ok(Cost::Inf),
        }
    }

    /// `self - other` for finite values; `None` when either side is ∞.
    pub fn distance_above(self, other: Cost) -> Result<Option<Rational>, PopsError> {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => a.checked_sub(&b).map(Some).ok_or(PopsError::Overflow),
            _ => Ok(None),
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(r) => write_rational(f, r),
            Cost::Inf => f.write_str("inf"),
        }
    }
}

/// Three-valued truth. Declaration order is the truth order `False < Unknown < True`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tri {
    False,
    Unknown,
    True,
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tri::False => "F",
            Tri::Unknown => "U",
            Tri::True => "T",
        })
    }
}

/// One element of some carrier.
///
/// The derived `Ord` is only a total tie-break used for deterministic display
/// and sorting; the algebraic order lives in [`super::Pops::partial_cmp`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bit(bool),
    Number(Rational),
    Cost(Cost),
    Bot,
    /// Exactly `p + 1` costs, ascending, ∞-padded.
    CostBag(Vec<Cost>),
    /// Ascending, duplicate-free, all within η of the minimum.
    CostSet(Vec<Cost>),
    Tri(Tri),
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Number(Rational::from_integer(n))
    }

    pub fn rat(n: i64, d: i64) -> Value {
        Value::Number(Rational::new(n, d))
    }

    pub fn cost(n: i64) -> Value {
        Value::Cost(Cost::int(n))
    }

    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Box::new(a), Box::new(b))
    }

    /// Bag literal helper; `None` entries are ∞.
    pub fn bag(items: &[Option<i64>]) -> Value {
        Value::CostBag(items.iter().map(|c| c.map_or(Cost::Inf, Cost::int)).collect())
    }

    pub fn set(items: &[i64]) -> Value {
        let mut v: Vec<Cost> = items.iter().map(|&c| Cost::int(c)).collect();
        v.sort();
        v.dedup();
        Value::CostSet(v)
    }
}

pub(crate) fn write_rational(f: &mut fmt::Formatter<'_>, r: &Rational) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

fn write_costs(f: &mut fmt::Formatter<'_>, open: char, close: char, costs: &[Cost]) -> fmt::Result {
    write!(f, "{open}")?;
    for (i, c) in costs.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{c}")?;
    }
    write!(f, "{close}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bit(b) => write!(f, "{b}"),
            Value::Number(r) => write_rational(f, r),
            Value::Cost(c) => write!(f, "{c}"),
            Value::Bot => f.write_str("bot"),
            Value::CostBag(b) => write_costs(f, '[', ']', b),
            Value::CostSet(s) => write_costs(f, '{', '}', s),
            Value::Tri(t) => write!(f, "{t}"),
            Value::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

/// Untyped literal tree, produced by [`parse_literal`] and interpreted by a POPS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Literal {
    Number(Rational),
    Inf,
    Bot,
    True,
    False,
    Tri(Tri),
    Bag(Vec<Literal>),
    Set(Vec<Literal>),
    Pair(Box<Literal>, Box<Literal>),
}

/// Parses the value text syntax without knowing the target carrier.
pub fn parse_literal(text: &str) -> Result<Literal, PopsError> {
    let mut p = LitParser { s: text.as_bytes(), i: 0, src: text };
    let lit = p.literal()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(lit)
}

struct LitParser<'a> {
    s: &'a [u8],
    i: usize,
    src: &'a str,
}

impl LitParser<'_> {
    fn err(&self, what: &str) -> PopsError {
        PopsError::Syntax { text: self.src.to_string(), message: format!("{what} at offset {}", self.i) }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn list(&mut self, close: u8) -> Result<Vec<Literal>, PopsError> {
        let mut items = Vec::new();
        if self.peek() == Some(close) {
            self.i += 1;
            return Ok(items);
        }
        loop {
            items.push(self.literal()?);
            match self.peek() {
                Some(b',') => self.i += 1,
                Some(c) if c == close => {
                    self.i += 1;
                    return Ok(items);
                }
                _ => return Err(self.err("expected ',' or closing bracket")),
            }
        }
    }

    fn literal(&mut self) -> Result<Literal, PopsError> {
        match self.peek() {
            Some(b'[') => {
                self.i += 1;
                Ok(Literal::Bag(self.list(b']')?))
            }
            Some(b'{') => {
                self.i += 1;
                Ok(Literal::Set(self.list(b'}')?))
            }
            Some(b'(') => {
                self.i += 1;
                let items = self.list(b')')?;
                match <[Literal; 2]>::try_from(items) {
                    Ok([a, b]) => Ok(Literal::Pair(Box::new(a), Box::new(b))),
                    Err(_) => Err(self.err("a pair needs exactly two components")),
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
                    self.i += 1;
                }
                match &self.src[start..self.i] {
                    "true" => Ok(Literal::True),
                    "false" => Ok(Literal::False),
                    "inf" => Ok(Literal::Inf),
                    "bot" => Ok(Literal::Bot),
                    "T" => Ok(Literal::Tri(Tri::True)),
                    "F" => Ok(Literal::Tri(Tri::False)),
                    "U" => Ok(Literal::Tri(Tri::Unknown)),
                    other => {
                        self.i = start;
                        Err(self.err(&format!("unknown word '{other}'")))
                    }
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'+' => self.number().map(Literal::Number),
            _ => Err(self.err("expected a value")),
        }
    }

    fn digits(&mut self) -> &str {
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        &self.src[start..self.i]
    }

    fn number(&mut self) -> Result<Rational, PopsError> {
        let neg = match self.s[self.i] {
            b'-' => {
                self.i += 1;
                true
            }
            b'+' => {
                self.i += 1;
                false
            }
            _ => false,
        };
        let int_part = self.digits().to_string();
        if int_part.is_empty() {
            return Err(self.err("expected digits"));
        }
        let mut value = Rational::from_integer(int_part.parse::<i64>().map_err(|_| PopsError::Overflow)?);
        if self.s.get(self.i) == Some(&b'.') {
            self.i += 1;
            let frac = self.digits().to_string();
            if frac.is_empty() || frac.len() > 18 {
                return Err(self.err("bad decimal fraction"));
            }
            let denom = 10i64.pow(frac.len() as u32);
            let num: i64 = frac.parse().map_err(|_| PopsError::Overflow)?;
            value = value.checked_add(&Rational::new(num, denom)).ok_or(PopsError::Overflow)?;
        } else if self.s.get(self.i) == Some(&b'/') {
            self.i += 1;
            let d = self.digits().to_string();
            let d: i64 = d.parse().map_err(|_| self.err("expected denominator"))?;
            if d.is_zero() {
                return Err(self.err("zero denominator"));
            }
            value = value.checked_mul(&Rational::new(1, d)).ok_or(PopsError::Overflow)?;
        }
        Ok(if neg { -value } else { value })
    }
}
