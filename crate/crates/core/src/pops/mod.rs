//! Partially ordered pre-semirings.
//!
//! A [`Pops`] is a runtime descriptor: an instance tag plus the algebraic
//! flags the solvers consult. All operations are pure functions over
//! [`Value`]s and check carrier membership on entry.

mod funcs;
mod laws;
pub mod tropical;
mod value;

use std::fmt;
use std::str::FromStr;

use num_traits::{CheckedAdd, CheckedMul, Signed, Zero};
use thiserror::Error;

pub use funcs::UnaryFn;
pub use laws::{check_axioms, check_unary_monotone, Algebra, AxiomReport, Violation};
pub use value::{parse_literal, Cost, Literal, Rational, Tri, Value};

use tropical::{bag_difference, min_eta, min_p, pairwise_sums, union};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PopsError {
    #[error("value {value} is not in the carrier of {pops}")]
    CarrierMismatch { pops: String, value: String },
    #[error("arithmetic overflow in exact rational")]
    Overflow,
    #[error("{op} is not supported by {pops}")]
    Unsupported { op: &'static str, pops: String },
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("function {name} expects {expected} input, got {found}")]
    FunctionSignature { name: String, expected: String, found: String },
    #[error("cannot parse value '{text}': {message}")]
    Syntax { text: String, message: String },
    #[error("unknown POPS name '{0}'")]
    UnknownPops(String),
}

/// Instance tag.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PopsId {
    Bool,
    Nat,
    NonNegRational,
    LiftedReal,
    LiftedNat,
    Trop,
    TropPlus,
    TropP(u32),
    TropEta(Rational),
    Three,
    /// `({0..k}, max, min(x·y, k), 0, 1)`, a finite chain of rank `k`.
    CappedMax(u32),
    Product(Box<PopsId>, Box<PopsId>),
}

impl fmt::Display for PopsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopsId::Bool => f.write_str("bool"),
            PopsId::Nat => f.write_str("nat"),
            PopsId::NonNegRational => f.write_str("nnrat"),
            PopsId::LiftedReal => f.write_str("real_bot"),
            PopsId::LiftedNat => f.write_str("nat_bot"),
            PopsId::Trop => f.write_str("trop"),
            PopsId::TropPlus => f.write_str("tropplus"),
            PopsId::TropP(p) => write!(f, "trop_p({p})"),
            PopsId::TropEta(eta) => {
                f.write_str("trop_eta(")?;
                value::write_rational(f, eta)?;
                f.write_str(")")
            }
            PopsId::Three => f.write_str("three"),
            PopsId::CappedMax(k) => write!(f, "capped_max({k})"),
            PopsId::Product(l, r) => write!(f, "product({l},{r})"),
        }
    }
}

impl FromStr for PopsId {
    type Err = PopsError;

    fn from_str(s: &str) -> Result<PopsId, PopsError> {
        let s = s.trim();
        let unknown = || PopsError::UnknownPops(s.to_string());
        let simple = match s {
            "bool" => Some(PopsId::Bool),
            "nat" => Some(PopsId::Nat),
            "nnrat" => Some(PopsId::NonNegRational),
            "real_bot" => Some(PopsId::LiftedReal),
            "nat_bot" => Some(PopsId::LiftedNat),
            "trop" => Some(PopsId::Trop),
            "tropplus" => Some(PopsId::TropPlus),
            "three" => Some(PopsId::Three),
            _ => None,
        };
        if let Some(id) = simple {
            return Ok(id);
        }
        let (head, rest) = s.split_once('(').ok_or_else(unknown)?;
        let inner = rest.strip_suffix(')').ok_or_else(unknown)?.trim();
        match head.trim() {
            "trop_p" => inner.parse().map(PopsId::TropP).map_err(|_| unknown()),
            "capped_max" => match inner.parse() {
                Ok(k) if k >= 1 => Ok(PopsId::CappedMax(k)),
                _ => Err(unknown()),
            },
            "trop_eta" => match parse_literal(inner) {
                Ok(Literal::Number(eta)) if !eta.is_negative() => Ok(PopsId::TropEta(eta)),
                _ => Err(unknown()),
            },
            "product" => {
                let split = top_level_comma(inner).ok_or_else(unknown)?;
                let l = inner[..split].parse()?;
                let r = inner[split + 1..].parse()?;
                Ok(PopsId::Product(Box::new(l), Box::new(r)))
            }
            _ => Err(unknown()),
        }
    }
}

fn top_level_comma(s: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

/// Outcome of comparing two elements in a partial order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosetOrdering {
    Less,
    Equal,
    Greater,
    Incomparable,
}

impl PosetOrdering {
    /// `a ⊑ b`.
    pub fn is_le(self) -> bool {
        matches!(self, PosetOrdering::Less | PosetOrdering::Equal)
    }

    fn from_total(o: std::cmp::Ordering) -> PosetOrdering {
        match o {
            std::cmp::Ordering::Less => PosetOrdering::Less,
            std::cmp::Ordering::Equal => PosetOrdering::Equal,
            std::cmp::Ordering::Greater => PosetOrdering::Greater,
        }
    }

    fn reverse(self) -> PosetOrdering {
        match self {
            PosetOrdering::Less => PosetOrdering::Greater,
            PosetOrdering::Greater => PosetOrdering::Less,
            o => o,
        }
    }

    /// Componentwise combination for product orders.
    fn and(self, other: PosetOrdering) -> PosetOrdering {
        use PosetOrdering::*;
        match (self, other) {
            (Equal, o) | (o, Equal) => o,
            (Less, Less) => Less,
            (Greater, Greater) => Greater,
            _ => Incomparable,
        }
    }
}

/// Runtime descriptor of one POPS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pops {
    id: PopsId,
    parts: Option<Box<(Pops, Pops)>>,
    pub strict_times: bool,
    pub has_minus: bool,
    pub known_stability_p: Option<u32>,
    pub naturally_ordered: bool,
    /// `0 ⊗ x = 0` for every `x`; lets the grounder drop zero-coefficient monomials.
    pub absorbing: bool,
    /// Bound on the length of strictly increasing chains, when finite.
    pub rank: Option<u64>,
}

impl Pops {
    pub fn new(id: PopsId) -> Pops {
        use PopsId::*;
        let mut pops = Pops {
            id: id.clone(),
            parts: None,
            strict_times: true,
            has_minus: false,
            known_stability_p: None,
            naturally_ordered: true,
            absorbing: true,
            rank: None,
        };
        match &id {
            Bool => {
                pops.has_minus = true;
                pops.known_stability_p = Some(0);
                pops.rank = Some(1);
            }
            Nat | NonNegRational | TropEta(_) => {}
            LiftedReal | LiftedNat => {
                pops.naturally_ordered = false;
                pops.absorbing = false;
                pops.rank = Some(1);
            }
            Trop => pops.has_minus = true,
            TropPlus => {
                pops.has_minus = true;
                pops.known_stability_p = Some(0);
            }
            TropP(p) => pops.known_stability_p = Some(*p),
            Three => {
                pops.strict_times = false;
                pops.naturally_ordered = false;
                pops.rank = Some(1);
            }
            CappedMax(k) => pops.rank = Some(u64::from(*k)),
            Product(l, r) => {
                let (l, r) = (Pops::new((**l).clone()), Pops::new((**r).clone()));
                pops.strict_times = l.strict_times && r.strict_times;
                pops.naturally_ordered = l.naturally_ordered && r.naturally_ordered;
                pops.absorbing = l.absorbing && r.absorbing;
                pops.known_stability_p = l.known_stability_p.zip(r.known_stability_p).map(|(a, b)| a.max(b));
                pops.rank = l.rank.zip(r.rank).and_then(|(a, b)| a.checked_add(b));
                pops.parts = Some(Box::new((l, r)));
            }
        }
        pops
    }

    pub fn id(&self) -> &PopsId {
        &self.id
    }

    /// Overrides the strictness flag; used to exercise the law checker.
    pub fn with_strict_times(mut self, strict: bool) -> Pops {
        self.strict_times = strict;
        self
    }

    fn parts(&self) -> &(Pops, Pops) {
        self.parts.as_deref().expect("product descriptor carries its components")
    }

    pub fn zero(&self) -> Value {
        use PopsId::*;
        match &self.id {
            Bool => Value::Bit(false),
            Nat | NonNegRational | LiftedReal | LiftedNat | CappedMax(_) => Value::int(0),
            Trop | TropPlus => Value::Cost(Cost::Inf),
            TropP(p) => Value::CostBag(vec![Cost::Inf; *p as usize + 1]),
            TropEta(_) => Value::CostSet(vec![Cost::Inf]),
            Three => Value::Tri(Tri::False),
            Product(..) => {
                let (l, r) = self.parts();
                Value::pair(l.zero(), r.zero())
            }
        }
    }

    pub fn one(&self) -> Value {
        use PopsId::*;
        match &self.id {
            Bool => Value::Bit(true),
            Nat | NonNegRational | LiftedReal | LiftedNat | CappedMax(_) => Value::int(1),
            Trop | TropPlus => Value::cost(0),
            TropP(p) => Value::CostBag(min_p(vec![Cost::int(0)], *p)),
            TropEta(_) => Value::CostSet(vec![Cost::int(0)]),
            Three => Value::Tri(Tri::True),
            Product(..) => {
                let (l, r) = self.parts();
                Value::pair(l.one(), r.one())
            }
        }
    }

    pub fn bottom(&self) -> Value {
        match &self.id {
            PopsId::LiftedReal | PopsId::LiftedNat => Value::Bot,
            PopsId::Three => Value::Tri(Tri::Unknown),
            PopsId::Product(..) => {
                let (l, r) = self.parts();
                Value::pair(l.bottom(), r.bottom())
            }
            _ => self.zero(),
        }
    }

    pub fn is_bottom(&self, v: &Value) -> bool {
        *v == self.bottom()
    }

    pub fn contains(&self, v: &Value) -> bool {
        use PopsId::*;
        let nonneg_cost = |c: &Cost| c.finite().is_none_or(|r| !r.is_negative());
        match (&self.id, v) {
            (Bool, Value::Bit(_)) => true,
            (Nat, Value::Number(r)) => r.is_integer() && !r.is_negative(),
            (NonNegRational, Value::Number(r)) => !r.is_negative(),
            (LiftedReal, Value::Number(_) | Value::Bot) => true,
            (LiftedNat, Value::Bot) => true,
            (LiftedNat, Value::Number(r)) => r.is_integer() && !r.is_negative(),
            (CappedMax(k), Value::Number(r)) => r.is_integer() && !r.is_negative() && *r.numer() <= i64::from(*k),
            (Trop, Value::Cost(_)) => true,
            (TropPlus, Value::Cost(c)) => nonneg_cost(c),
            (TropP(p), Value::CostBag(b)) => {
                b.len() == *p as usize + 1 && b.windows(2).all(|w| w[0] <= w[1]) && b.iter().all(nonneg_cost)
            }
            (TropEta(eta), Value::CostSet(s)) => {
                if s.is_empty() || !s.windows(2).all(|w| w[0] < w[1]) || !s.iter().all(nonneg_cost) {
                    return false;
                }
                match (s.first(), s.last()) {
                    (Some(Cost::Inf), _) => s.len() == 1,
                    (Some(Cost::Finite(lo)), Some(Cost::Finite(hi))) => *hi - *lo <= *eta,
                    _ => false,
                }
            }
            (Three, Value::Tri(_)) => true,
            (Product(..), Value::Pair(a, b)) => {
                let (l, r) = self.parts();
                l.contains(a) && r.contains(b)
            }
            _ => false,
        }
    }

    pub fn check(&self, v: &Value) -> Result<(), PopsError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(self.mismatch(v))
        }
    }

    fn mismatch(&self, v: &Value) -> PopsError {
        PopsError::CarrierMismatch { pops: self.id.to_string(), value: v.to_string() }
    }

    pub fn plus(&self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        self.check(a)?;
        self.check(b)?;
        self.plus_unchecked(a, b)
    }

    fn plus_unchecked(&self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        use PopsId::*;
        Ok(match (&self.id, a, b) {
            (Bool, Value::Bit(x), Value::Bit(y)) => Value::Bit(*x || *y),
            (_, Value::Bot, _) | (_, _, Value::Bot) => Value::Bot,
            (CappedMax(_), Value::Number(x), Value::Number(y)) => Value::Number(*x.max(y)),
            (_, Value::Number(x), Value::Number(y)) => Value::Number(x.checked_add(y).ok_or(PopsError::Overflow)?),
            (_, Value::Cost(x), Value::Cost(y)) => Value::Cost(*x.min(y)),
            (TropP(p), Value::CostBag(x), Value::CostBag(y)) => Value::CostBag(min_p(union(x, y), *p)),
            (TropEta(eta), Value::CostSet(x), Value::CostSet(y)) => Value::CostSet(min_eta(union(x, y), *eta)?),
            (_, Value::Tri(x), Value::Tri(y)) => Value::Tri(*x.max(y)),
            (Product(..), Value::Pair(a1, a2), Value::Pair(b1, b2)) => {
                let (l, r) = self.parts();
                Value::pair(l.plus_unchecked(a1, b1)?, r.plus_unchecked(a2, b2)?)
            }
            _ => return Err(self.mismatch(a)),
        })
    }

    pub fn times(&self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        self.check(a)?;
        self.check(b)?;
        self.times_unchecked(a, b)
    }

    fn times_unchecked(&self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        use PopsId::*;
        Ok(match (&self.id, a, b) {
            (Bool, Value::Bit(x), Value::Bit(y)) => Value::Bit(*x && *y),
            (_, Value::Bot, _) | (_, _, Value::Bot) => Value::Bot,
            (CappedMax(k), Value::Number(x), Value::Number(y)) => {
                let cap = Rational::from_integer(i64::from(*k));
                Value::Number(x.checked_mul(y).map_or(cap, |v| v.min(cap)))
            }
            (_, Value::Number(x), Value::Number(y)) => Value::Number(x.checked_mul(y).ok_or(PopsError::Overflow)?),
            (_, Value::Cost(x), Value::Cost(y)) => Value::Cost(x.checked_add(*y)?),
            (TropP(p), Value::CostBag(x), Value::CostBag(y)) => Value::CostBag(min_p(pairwise_sums(x, y)?, *p)),
            (TropEta(eta), Value::CostSet(x), Value::CostSet(y)) => {
                Value::CostSet(min_eta(pairwise_sums(x, y)?, *eta)?)
            }
            (_, Value::Tri(x), Value::Tri(y)) => Value::Tri(*x.min(y)),
            (Product(..), Value::Pair(a1, a2), Value::Pair(b1, b2)) => {
                let (l, r) = self.parts();
                Value::pair(l.times_unchecked(a1, b1)?, r.times_unchecked(a2, b2)?)
            }
            _ => return Err(self.mismatch(a)),
        })
    }

    pub fn partial_cmp(&self, a: &Value, b: &Value) -> Result<PosetOrdering, PopsError> {
        self.check(a)?;
        self.check(b)?;
        self.cmp_unchecked(a, b)
    }

    fn cmp_unchecked(&self, a: &Value, b: &Value) -> Result<PosetOrdering, PopsError> {
        use PopsId::*;
        use PosetOrdering::*;
        if a == b {
            return Ok(Equal);
        }
        Ok(match (&self.id, a, b) {
            (Bool, Value::Bit(x), Value::Bit(y)) => PosetOrdering::from_total(x.cmp(y)),
            (LiftedReal | LiftedNat, Value::Bot, _) => Less,
            (LiftedReal | LiftedNat, _, Value::Bot) => Greater,
            (LiftedReal | LiftedNat, _, _) => Incomparable,
            (_, Value::Number(x), Value::Number(y)) => PosetOrdering::from_total(x.cmp(y)),
            (_, Value::Cost(x), Value::Cost(y)) => PosetOrdering::from_total(x.cmp(y)).reverse(),
            (TropP(p), Value::CostBag(x), Value::CostBag(y)) => {
                if min_p(union(x, &bag_difference(y, x)), *p) == *y {
                    Less
                } else if min_p(union(y, &bag_difference(x, y)), *p) == *x {
                    Greater
                } else {
                    Incomparable
                }
            }
            (TropEta(_), Value::CostSet(_), Value::CostSet(_)) => {
                let join = self.plus_unchecked(a, b)?;
                if join == *b {
                    Less
                } else if join == *a {
                    Greater
                } else {
                    Incomparable
                }
            }
            (Three, Value::Tri(x), Value::Tri(y)) => match (x, y) {
                (Tri::Unknown, _) => Less,
                (_, Tri::Unknown) => Greater,
                _ => Incomparable,
            },
            (Product(..), Value::Pair(a1, a2), Value::Pair(b1, b2)) => {
                let (l, r) = self.parts();
                l.cmp_unchecked(a1, b1)?.and(r.cmp_unchecked(a2, b2)?)
            }
            _ => return Err(self.mismatch(a)),
        })
    }

    pub fn leq(&self, a: &Value, b: &Value) -> Result<bool, PopsError> {
        Ok(self.partial_cmp(a, b)?.is_le())
    }

    /// Difference `b − a`: the least `c` with `a ⊕ c ⊒ b`. Defined on distributive dioids only.
    pub fn minus(&self, b: &Value, a: &Value) -> Result<Value, PopsError> {
        if !self.has_minus {
            return Err(PopsError::Unsupported { op: "minus", pops: self.id.to_string() });
        }
        self.check(a)?;
        self.check(b)?;
        Ok(match (b, a) {
            (Value::Bit(y), Value::Bit(x)) => Value::Bit(*y && !*x),
            // b is already covered by a when a is at least as good (numerically ≤).
            (Value::Cost(y), Value::Cost(x)) => Value::Cost(if y < x { *y } else { Cost::Inf }),
            _ => return Err(PopsError::Unsupported { op: "minus", pops: self.id.to_string() }),
        })
    }

    /// `1 ⊕ a ⊕ a² ⊕ … ⊕ a^p`, by Horner accumulation.
    pub fn power_sum(&self, a: &Value, p: u32) -> Result<Value, PopsError> {
        self.check(a)?;
        let one = self.one();
        let mut acc = one.clone();
        for _ in 0..p {
            acc = self.plus_unchecked(&one, &self.times_unchecked(a, &acc)?)?;
        }
        Ok(acc)
    }

    /// Smallest `p ≤ cap` with `a^(p) = a^(p+1)`.
    pub fn element_stability_index(&self, a: &Value, cap: u32) -> Result<Option<u32>, PopsError> {
        self.check(a)?;
        let one = self.one();
        let mut current = one.clone();
        for p in 0..=cap {
            let next = self.plus_unchecked(&one, &self.times_unchecked(a, &current)?)?;
            if next == current {
                return Ok(Some(p));
            }
            current = next;
        }
        Ok(None)
    }

    /// The cast `[0] = ⊥`, `[1] = 1`.
    pub fn cast_bool(&self, bit: bool) -> Value {
        if bit {
            self.one()
        } else {
            self.bottom()
        }
    }

    /// Interprets an untyped literal in this carrier.
    pub fn from_literal(&self, lit: &Literal) -> Result<Value, PopsError> {
        use PopsId::*;
        let bad = || PopsError::CarrierMismatch { pops: self.id.to_string(), value: format!("{lit:?}") };
        let to_cost = |l: &Literal| match l {
            Literal::Number(r) => Ok(Cost::Finite(*r)),
            Literal::Inf => Ok(Cost::Inf),
            _ => Err(bad()),
        };
        let v = match (&self.id, lit) {
            (Bool, Literal::True) => Value::Bit(true),
            (Bool, Literal::False) => Value::Bit(false),
            (Bool, Literal::Number(r)) if r.is_zero() => Value::Bit(false),
            (Bool, Literal::Number(r)) if *r == Rational::from_integer(1) => Value::Bit(true),
            (Nat | NonNegRational | LiftedReal | LiftedNat | CappedMax(_), Literal::Number(r)) => Value::Number(*r),
            (LiftedReal | LiftedNat, Literal::Bot) => Value::Bot,
            (Trop | TropPlus, Literal::Number(_) | Literal::Inf) => Value::Cost(to_cost(lit)?),
            (TropP(p), Literal::Bag(items)) => {
                if items.len() > *p as usize + 1 {
                    return Err(bad());
                }
                Value::CostBag(min_p(items.iter().map(to_cost).collect::<Result<_, _>>()?, *p))
            }
            (TropP(p), Literal::Number(_) | Literal::Inf) => Value::CostBag(min_p(vec![to_cost(lit)?], *p)),
            (TropEta(eta), Literal::Set(items)) => {
                let costs: Vec<Cost> = items.iter().map(to_cost).collect::<Result<_, _>>()?;
                let normalized = min_eta(costs.clone(), *eta)?;
                let mut sorted = costs;
                sorted.sort();
                sorted.dedup();
                if sorted.is_empty() || (normalized != sorted && !sorted.iter().all(Cost::is_inf)) {
                    return Err(bad());
                }
                Value::CostSet(normalized)
            }
            (TropEta(_), Literal::Number(_) | Literal::Inf) => Value::CostSet(vec![to_cost(lit)?]),
            (Three, Literal::Tri(t)) => Value::Tri(*t),
            (Three, Literal::True) => Value::Tri(Tri::True),
            (Three, Literal::False) => Value::Tri(Tri::False),
            (Three, Literal::Bot) => Value::Tri(Tri::Unknown),
            (Product(..), Literal::Pair(a, b)) => {
                let (l, r) = self.parts();
                Value::pair(l.from_literal(a)?, r.from_literal(b)?)
            }
            _ => return Err(bad()),
        };
        self.check(&v)?;
        Ok(v)
    }

    pub fn parse_value(&self, text: &str) -> Result<Value, PopsError> {
        self.from_literal(&parse_literal(text)?)
    }

    /// Embeds an integer key as a value, for the keys-to-values factor.
    pub fn from_int(&self, n: i64) -> Result<Value, PopsError> {
        self.from_literal(&Literal::Number(Rational::from_integer(n)))
    }
}

impl fmt::Display for Pops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)
    }
}

impl From<PopsId> for Pops {
    fn from(id: PopsId) -> Pops {
        Pops::new(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pops(name: &str) -> Pops {
        Pops::new(name.parse().unwrap())
    }

    fn v(p: &Pops, text: &str) -> Value {
        p.parse_value(text).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for name in [
            "bool",
            "nat",
            "nnrat",
            "real_bot",
            "nat_bot",
            "trop",
            "tropplus",
            "trop_p(2)",
            "trop_eta(13/2)",
            "three",
            "capped_max(4)",
            "product(bool,trop_p(1))",
        ] {
            let id: PopsId = name.parse().unwrap();
            assert_eq!(id.to_string(), name);
        }
        assert_eq!("trop_eta(6.5)".parse::<PopsId>().unwrap(), PopsId::TropEta(Rational::new(13, 2)));
        assert!("trop_p(x)".parse::<PopsId>().is_err());
        assert!("reals".parse::<PopsId>().is_err());
    }

    #[test]
    fn bag_arithmetic_worked_case() {
        let p = pops("trop_p(2)");
        let (a, b) = (v(&p, "[3,7,9]"), v(&p, "[3,7,7]"));
        assert_eq!(p.plus(&a, &b).unwrap(), v(&p, "[3,3,7]"));
        assert_eq!(p.times(&a, &b).unwrap(), v(&p, "[6,10,10]"));
    }

    #[test]
    fn window_arithmetic_worked_case() {
        let p = pops("trop_eta(6.5)");
        assert_eq!(p.plus(&v(&p, "{3,7}"), &v(&p, "{5,9,10}")).unwrap(), v(&p, "{3,5,7,9}"));
        assert_eq!(p.times(&v(&p, "{1,6}"), &v(&p, "{1,2,3}")).unwrap(), v(&p, "{2,3,4,7,8}"));
    }

    #[test]
    fn lifted_and_three() {
        let r = pops("real_bot");
        assert_eq!(r.plus(&Value::Bot, &Value::int(5)).unwrap(), Value::Bot);
        assert_eq!(r.partial_cmp(&Value::int(2), &Value::int(5)).unwrap(), PosetOrdering::Incomparable);
        let t = pops("three");
        let (f, u, tt) = (Value::Tri(Tri::False), Value::Tri(Tri::Unknown), Value::Tri(Tri::True));
        assert_eq!(t.times(&f, &u).unwrap(), f);
        assert_eq!(t.partial_cmp(&u, &tt).unwrap(), PosetOrdering::Less);
        assert_eq!(t.partial_cmp(&f, &tt).unwrap(), PosetOrdering::Incomparable);
        assert_eq!(t.bottom(), u);
    }

    #[test]
    fn trop_order_is_reversed() {
        let t = pops("trop");
        assert_eq!(t.partial_cmp(&Value::cost(7), &Value::cost(3)).unwrap(), PosetOrdering::Less);
        assert_eq!(t.partial_cmp(&Value::Cost(Cost::Inf), &Value::cost(-3)).unwrap(), PosetOrdering::Less);
    }

    #[test]
    fn carrier_mismatch_is_reported() {
        let t = pops("tropplus");
        assert!(matches!(t.plus(&Value::Bit(true), &Value::cost(1)), Err(PopsError::CarrierMismatch { .. })));
        assert!(t.check(&Value::cost(-1)).is_err());
        assert!(pops("trop_p(1)").check(&Value::bag(&[Some(3), Some(1)])).is_err());
        assert!(pops("trop_eta(1)").check(&Value::set(&[1, 5])).is_err());
    }

    #[test]
    fn power_sums() {
        let t = pops("tropplus");
        assert_eq!(t.power_sum(&Value::cost(5), 3).unwrap(), Value::cost(0));
        let b = pops("trop_p(1)");
        assert_eq!(b.power_sum(&v(&b, "[2,3]"), 1).unwrap(), v(&b, "[0,2]"));
        assert_eq!(pops("nat").power_sum(&Value::int(1), 4).unwrap(), Value::int(5));
    }

    #[test]
    fn stability_indices() {
        let t = pops("tropplus");
        assert_eq!(t.element_stability_index(&Value::cost(5), 10).unwrap(), Some(0));
        assert_eq!(pops("nat").element_stability_index(&Value::int(1), 50).unwrap(), None);
        let b = pops("trop_p(3)");
        let idx = b.element_stability_index(&v(&b, "[1,2,5,9]"), 10).unwrap().unwrap();
        assert!(idx <= 3);
    }

    #[test]
    fn minus_closed_forms() {
        let t = pops("trop");
        assert_eq!(t.minus(&Value::cost(3), &Value::cost(5)).unwrap(), Value::cost(3));
        assert_eq!(t.minus(&Value::cost(5), &Value::cost(3)).unwrap(), Value::Cost(Cost::Inf));
        assert_eq!(t.minus(&Value::cost(4), &Value::cost(4)).unwrap(), Value::Cost(Cost::Inf));
        let b = pops("bool");
        assert_eq!(b.minus(&Value::Bit(true), &Value::Bit(false)).unwrap(), Value::Bit(true));
        assert!(matches!(pops("nat").minus(&Value::int(1), &Value::int(0)), Err(PopsError::Unsupported { .. })));
    }

    #[test]
    fn casts() {
        assert_eq!(pops("tropplus").cast_bool(false), Value::Cost(Cost::Inf));
        assert_eq!(pops("tropplus").cast_bool(true), Value::cost(0));
        assert_eq!(pops("nnrat").cast_bool(true), Value::int(1));
        assert_eq!(pops("real_bot").cast_bool(false), Value::Bot);
    }

    #[test]
    fn capped_max_saturates() {
        let s = pops("capped_max(5)");
        assert_eq!(s.times(&Value::int(2), &Value::int(4)).unwrap(), Value::int(5));
        assert_eq!(s.plus(&Value::int(2), &Value::int(4)).unwrap(), Value::int(4));
        assert_eq!(s.rank, Some(5));
    }

    #[test]
    fn product_flags_and_ops() {
        let p = pops("product(bool,tropplus)");
        assert_eq!(p.known_stability_p, Some(0));
        assert!(!p.has_minus);
        let a = v(&p, "(true,3)");
        let b = v(&p, "(false,5)");
        assert_eq!(p.plus(&a, &b).unwrap(), v(&p, "(true,3)"));
        assert_eq!(p.partial_cmp(&b, &a).unwrap(), PosetOrdering::Less);
        assert_eq!(p.partial_cmp(&v(&p, "(true,5)"), &v(&p, "(false,3)")).unwrap(), PosetOrdering::Incomparable);
    }

    #[test]
    fn literals_are_typed() {
        assert_eq!(v(&pops("trop_p(2)"), "4"), Value::bag(&[Some(4), None, None]));
        assert_eq!(v(&pops("trop_eta(2)"), "inf"), Value::CostSet(vec![Cost::Inf]));
        assert!(pops("trop_eta(2)").parse_value("{1,5}").is_err());
        assert!(pops("nat").parse_value("1/2").is_err());
        assert!(pops("bool").parse_value("inf").is_err());
        assert_eq!(v(&pops("three"), "U"), Value::Tri(Tri::Unknown));
    }

    fn bag_strategy(p: u32) -> impl Strategy<Value = Value> {
        proptest::collection::vec(prop_oneof![4 => (0i64..12).prop_map(Cost::int), 1 => Just(Cost::Inf)], 0..6)
            .prop_map(move |xs| Value::CostBag(min_p(xs, p)))
    }

    proptest! {
        #[test]
        fn trop_plus_is_zero_stable(a in 0i64..1000) {
            let t = pops("tropplus");
            prop_assert_eq!(t.plus(&t.one(), &Value::cost(a)).unwrap(), t.one());
        }

        #[test]
        fn bag_elements_are_p_stable(p in 0u32..4, xs in proptest::collection::vec(0i64..10, 0..6)) {
            let b = pops(&format!("trop_p({p})"));
            let a = Value::CostBag(min_p(xs.into_iter().map(Cost::int).collect(), p));
            let idx = b.element_stability_index(&a, 64).unwrap();
            prop_assert!(matches!(idx, Some(i) if i <= p));
        }

        #[test]
        fn window_elements_respect_bound(eta in 1i64..8, xs in proptest::collection::vec(1i64..10, 1..5)) {
            let e = Rational::from_integer(eta);
            let s = pops(&format!("trop_eta({eta})"));
            let a = Value::CostSet(min_eta(xs.iter().copied().map(Cost::int).collect(), e).unwrap());
            let x0 = *xs.iter().min().unwrap();
            let bound = ((eta + x0 - 1) / x0) as u32;
            let idx = s.element_stability_index(&a, 200).unwrap();
            prop_assert!(matches!(idx, Some(i) if i <= bound), "{a} gave {idx:?}, bound {bound}");
        }

        #[test]
        fn bag_order_matches_join(a in bag_strategy(2), b in bag_strategy(2)) {
            let t = pops("trop_p(2)");
            let join = t.plus(&a, &b).unwrap();
            prop_assert!(t.leq(&a, &join).unwrap());
            prop_assert!(t.leq(&b, &join).unwrap());
        }
    }
}
