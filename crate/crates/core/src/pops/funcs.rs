//! Registered monotone unary functions between carriers.

use std::fmt;

use num_traits::Signed;

use super::{value::write_rational, Literal, Pops, PopsError, PopsId, Rational, Tri, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    /// Kleene negation on three-valued truth; swaps 0 and 1, fixes ⊥.
    Not,
    /// Arithmetic negation on the lifted reals.
    Neg,
    /// `1` when the input exceeds the threshold, else `0`.
    Threshold(Rational),
}

impl UnaryFn {
    pub fn lookup(name: &str, params: &[Literal]) -> Result<UnaryFn, PopsError> {
        match (name, params) {
            ("not", []) => Ok(UnaryFn::Not),
            ("neg", []) => Ok(UnaryFn::Neg),
            ("threshold", [Literal::Number(t)]) if !t.is_negative() => Ok(UnaryFn::Threshold(*t)),
            _ => Err(PopsError::UnknownFunction(name.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UnaryFn::Not => "not",
            UnaryFn::Neg => "neg",
            UnaryFn::Threshold(_) => "threshold",
        }
    }

    /// Whether the function accepts values of `from`.
    pub fn accepts(&self, from: &PopsId) -> bool {
        match self {
            UnaryFn::Not => *from == PopsId::Three,
            UnaryFn::Neg => *from == PopsId::LiftedReal,
            UnaryFn::Threshold(_) => matches!(from, PopsId::NonNegRational | PopsId::Nat),
        }
    }

    /// Target carrier for an accepted input carrier.
    pub fn output(&self, from: &PopsId) -> PopsId {
        match self {
            UnaryFn::Threshold(_) => PopsId::Bool,
            _ => from.clone(),
        }
    }

    pub fn apply(&self, from: &Pops, to: &Pops, a: &Value) -> Result<Value, PopsError> {
        if !self.accepts(from.id()) || *to.id() != self.output(from.id()) {
            return Err(PopsError::FunctionSignature {
                name: self.to_string(),
                expected: "a registered input/output carrier pair".into(),
                found: format!("{from} -> {to}"),
            });
        }
        from.check(a)?;
        Ok(match (self, a) {
            (UnaryFn::Not, Value::Tri(t)) => Value::Tri(match t {
                Tri::False => Tri::True,
                Tri::True => Tri::False,
                Tri::Unknown => Tri::Unknown,
            }),
            (UnaryFn::Neg, Value::Bot) => Value::Bot,
            (UnaryFn::Neg, Value::Number(r)) => Value::Number(-*r),
            (UnaryFn::Threshold(t), Value::Number(r)) => Value::Bit(r > t),
            _ => unreachable!("carrier checked above"),
        })
    }
}

impl fmt::Display for UnaryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnaryFn::Threshold(t) => {
                f.write_str("threshold(")?;
                write_rational(f, t)?;
                f.write_str(")")
            }
            other => f.write_str(other.name()),
        }
    }
}
