//! Sampled verification of the POPS laws.

use std::fmt;

use serde::Serialize;

use super::{Pops, PopsError, PosetOrdering, UnaryFn, Value};

/// The operations a law check needs. Implemented by [`Pops`]; tests implement
/// it for deliberately broken structures.
pub trait Algebra {
    type Elem: Clone + PartialEq + fmt::Display;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn bottom(&self) -> Self::Elem;
    fn plus(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem, PopsError>;
    fn times(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem, PopsError>;
    fn order(&self, a: &Self::Elem, b: &Self::Elem) -> Result<PosetOrdering, PopsError>;
    fn strict_times(&self) -> bool;
    /// `None` when the structure has no difference operator.
    fn minus(&self, b: &Self::Elem, a: &Self::Elem) -> Option<Result<Self::Elem, PopsError>>;
}

impl Algebra for Pops {
    type Elem = Value;

    fn zero(&self) -> Value {
        Pops::zero(self)
    }
    fn one(&self) -> Value {
        Pops::one(self)
    }
    fn bottom(&self) -> Value {
        Pops::bottom(self)
    }
    fn plus(&self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        Pops::plus(self, a, b)
    }
    fn times(&self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        Pops::times(self, a, b)
    }
    fn order(&self, a: &Value, b: &Value) -> Result<PosetOrdering, PopsError> {
        Pops::partial_cmp(self, a, b)
    }
    fn strict_times(&self) -> bool {
        self.strict_times
    }
    fn minus(&self, b: &Value, a: &Value) -> Option<Result<Value, PopsError>> {
        self.has_minus.then(|| Pops::minus(self, b, a))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub law: &'static str,
    pub witness: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AxiomReport {
    /// Number of individual law instances evaluated.
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, law: &str) -> bool {
        self.violations.iter().any(|v| v.law == law)
    }

    fn record(&mut self, law: &'static str, ok: Result<bool, PopsError>, witness: impl FnOnce() -> String) {
        self.checks += 1;
        match ok {
            Ok(true) => {}
            Ok(false) => self.violations.push(Violation { law, witness: witness() }),
            Err(e) => self.violations.push(Violation { law, witness: format!("{} ({e})", witness()) }),
        }
    }
}

/// Checks every law on all pairs and triples drawn from `samples`.
pub fn check_axioms<A: Algebra>(alg: &A, samples: &[A::Elem]) -> AxiomReport {
    let mut r = AxiomReport::default();
    let (zero, one, bot) = (alg.zero(), alg.one(), alg.bottom());
    let eq = |x: Result<A::Elem, PopsError>, y: Result<A::Elem, PopsError>| Ok(x? == y?);
    let le = |a: &A::Elem, b: &A::Elem| alg.order(a, b).map(PosetOrdering::is_le);

    r.record("bottom-plus-bottom", eq(alg.plus(&bot, &bot), Ok(bot.clone())), || format!("⊥={bot}"));
    r.record("bottom-times-bottom", eq(alg.times(&bot, &bot), Ok(bot.clone())), || format!("⊥={bot}"));

    for a in samples {
        r.record("plus-identity", eq(alg.plus(a, &zero), Ok(a.clone())), || format!("a={a}"));
        r.record("times-identity", eq(alg.times(a, &one), Ok(a.clone())), || format!("a={a}"));
        r.record("bottom-least", le(&bot, a), || format!("a={a}"));
        r.record("order-reflexive", le(a, a), || format!("a={a}"));
        if alg.strict_times() {
            r.record("strict-times", eq(alg.times(a, &bot), Ok(bot.clone())), || format!("a={a}"));
        }
        for b in samples {
            let w = || format!("a={a} b={b}");
            r.record("plus-commutative", eq(alg.plus(a, b), alg.plus(b, a)), w);
            r.record("times-commutative", eq(alg.times(a, b), alg.times(b, a)), w);
            r.record("order-antisymmetric", (|| Ok(!(le(a, b)? && le(b, a)?) || a == b))(), w);
            if let Some(diff) = alg.minus(b, a) {
                // a ⊑ b ⇒ a ⊕ (b − a) = b
                let law = (|| {
                    if !le(a, b)? {
                        return Ok(true);
                    }
                    Ok(alg.plus(a, &diff?)? == *b)
                })();
                r.record("minus-restores", law, w);
            }
            for c in samples {
                let w = || format!("a={a} b={b} c={c}");
                r.record(
                    "plus-associative",
                    (|| Ok(alg.plus(&alg.plus(a, b)?, c)? == alg.plus(a, &alg.plus(b, c)?)?))(),
                    w,
                );
                r.record(
                    "times-associative",
                    (|| Ok(alg.times(&alg.times(a, b)?, c)? == alg.times(a, &alg.times(b, c)?)?))(),
                    w,
                );
                r.record(
                    "distributive",
                    (|| Ok(alg.times(a, &alg.plus(b, c)?)? == alg.plus(&alg.times(a, b)?, &alg.times(a, c)?)?))(),
                    w,
                );
                r.record("plus-monotone", (|| Ok(!le(a, b)? || le(&alg.plus(a, c)?, &alg.plus(b, c)?)?))(), w);
                r.record("times-monotone", (|| Ok(!le(a, b)? || le(&alg.times(a, c)?, &alg.times(b, c)?)?))(), w);
                r.record("order-transitive", (|| Ok(!(le(a, b)? && le(b, c)?) || le(a, c)?))(), w);
                if alg.minus(a, a).is_some() {
                    // (a ⊕ b) − (a ⊕ c) = b − (a ⊕ c)
                    let law = (|| {
                        let ac = alg.plus(a, c)?;
                        let lhs = alg.minus(&alg.plus(a, b)?, &ac).expect("minus present")?;
                        let rhs = alg.minus(b, &ac).expect("minus present")?;
                        Ok(lhs == rhs)
                    })();
                    r.record("minus-absorbs-common", law, w);
                }
            }
        }
    }
    r
}

/// Samples monotonicity of a registered function: `a ⊑ b ⇒ f(a) ⊑ f(b)`.
pub fn check_unary_monotone(f: &UnaryFn, from: &Pops, to: &Pops, samples: &[Value]) -> AxiomReport {
    let mut r = AxiomReport::default();
    for a in samples {
        for b in samples {
            let law = (|| {
                if !from.leq(a, b)? {
                    return Ok(true);
                }
                to.leq(&f.apply(from, to, a)?, &f.apply(from, to, b)?)
            })();
            r.record("function-monotone", law, || format!("{f}: a={a} b={b}"));
        }
    }
    r
}
