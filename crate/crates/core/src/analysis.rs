//! Stability experiments, bound calculators and order probes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::pops::tropical::{min_eta, min_p};
use crate::pops::{check_axioms, AxiomReport, Cost, Pops, PopsError, PopsId, Tri, Value};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0} does not have a strict product; S+⊥ is undefined")]
    NotStrict(String),
    #[error(transparent)]
    Pops(#[from] PopsError),
}

/// `a_0 + a_1 x + … + a_k x^k`; `None` marks a missing term.
#[derive(Clone, Debug, PartialEq)]
pub struct UniPoly {
    pub coeffs: Vec<Option<Value>>,
}

impl UniPoly {
    pub fn new(coeffs: Vec<Option<Value>>) -> Self {
        UniPoly { coeffs }
    }

    pub fn constant(b: Value) -> Self {
        UniPoly { coeffs: vec![Some(b)] }
    }

    /// `b ⊕ a x`.
    pub fn linear(a: Value, b: Value) -> Self {
        UniPoly { coeffs: vec![Some(b), Some(a)] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(Option::is_some).unwrap_or(0)
    }

    pub fn eval(&self, pops: &Pops, x: &Value) -> Result<Value, PopsError> {
        let mut acc: Option<Value> = None;
        let mut power = pops.one();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                power = pops.times(&power, x)?;
            }
            if let Some(a) = c {
                let term = pops.times(a, &power)?;
                acc = Some(match acc {
                    None => term,
                    Some(prev) => pops.plus(&prev, &term)?,
                });
            }
        }
        Ok(acc.unwrap_or_else(|| pops.zero()))
    }
}

/// Smallest `q ≤ cap` with `f^(q+1)(⊥) = f^(q)(⊥)`.
pub fn poly_stability_index(pops: &Pops, f: &UniPoly, cap: u32) -> Result<Option<u32>, PopsError> {
    let mut x = pops.bottom();
    for q in 0..=cap {
        let next = f.eval(pops, &x)?;
        if next == x {
            return Ok(Some(q));
        }
        x = next;
    }
    Ok(None)
}

/// The `q`-th iterate of `x ↦ a x ⊕ b` from ⊥, in closed form:
/// `(1 ⊕ a ⊕ … ⊕ a^{q-1}) b ⊕ a^q ⊥`.
pub fn simple_linear_iterate(pops: &Pops, a: &Value, b: &Value, q: u32) -> Result<Value, PopsError> {
    if q == 0 {
        return Ok(pops.bottom());
    }
    let head = pops.times(&pops.power_sum(a, q - 1)?, b)?;
    let mut tail = pops.bottom();
    for _ in 0..q {
        tail = pops.times(a, &tail)?;
    }
    pops.plus(&head, &tail)
}

/// Stability bound for a product of posets whose components are `p_i`-stable:
/// `Σ_k Π_{i≤k} p_i` with the `p_i` in descending order. `None` past 64 bits.
pub fn clone_stability_bound(p_list: &[u64]) -> Option<u64> {
    let mut ps = p_list.to_vec();
    ps.sort_unstable_by(|a, b| b.cmp(a));
    let mut total: u64 = 0;
    let mut prod: u64 = 1;
    for p in ps {
        prod = prod.checked_mul(p)?;
        total = total.checked_add(prod)?;
    }
    Some(total)
}

/// Renders a saturated bound.
pub fn format_bound(b: Option<u64>) -> String {
    b.map_or_else(|| "astronomical (≥2^63)".to_string(), |v| v.to_string())
}

/// Whether `∃z ∈ samples: x ⊕ z = y` is antisymmetric on the samples and agrees
/// with the declared order.
pub fn natural_order_probe(pops: &Pops, samples: &[Value]) -> Result<bool, PopsError> {
    let n = samples.len();
    let mut rel = vec![vec![false; n]; n];
    for (i, x) in samples.iter().enumerate() {
        for z in samples {
            let s = pops.plus(x, z)?;
            if let Some(j) = samples.iter().position(|y| *y == s) {
                rel[i][j] = true;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rel[i][j] && rel[j][i] && samples[i] != samples[j] {
                return Ok(false);
            }
            if rel[i][j] != pops.leq(&samples[i], &samples[j])? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SPlusBot {
    pub holds: bool,
    /// `x ⊕ ⊥` for the samples, deduplicated, as text.
    pub elements: Vec<String>,
}

/// Checks that `{x ⊕ ⊥}` is closed under ⊕ and ⊗ with identities ⊥ and `1 ⊕ ⊥`.
/// Membership of a result `r` means `r ⊕ ⊥ = r`.
pub fn s_plus_bot_check(pops: &Pops, samples: &[Value]) -> Result<SPlusBot, AnalysisError> {
    if !pops.strict_times {
        return Err(AnalysisError::NotStrict(pops.to_string()));
    }
    let bot = pops.bottom();
    let unit = pops.plus(&pops.one(), &bot)?;
    let mut elems: Vec<Value> = vec![bot.clone(), unit.clone()];
    for s in samples {
        elems.push(pops.plus(s, &bot)?);
    }
    elems.sort();
    elems.dedup();
    let member = |v: &Value| -> Result<bool, PopsError> { Ok(pops.plus(v, &bot)? == *v) };
    let mut holds = true;
    for x in &elems {
        holds &= pops.plus(&bot, x)? == *x;
        holds &= pops.times(&unit, x)? == *x;
        for y in &elems {
            holds &= member(&pops.plus(x, y)?)?;
            holds &= member(&pops.times(x, y)?)?;
        }
    }
    Ok(SPlusBot { holds, elements: elems.iter().map(Value::to_string).collect() })
}

fn random_cost(rng: &mut impl Rng, lo: i64, hi: i64) -> Cost {
    if rng.gen_bool(0.15) {
        Cost::Inf
    } else {
        Cost::int(rng.gen_range(lo..=hi))
    }
}

/// A random element of the carrier, with small magnitudes.
pub fn sample_value(pops: &Pops, rng: &mut impl Rng) -> Value {
    match pops.id() {
        PopsId::Bool => Value::Bit(rng.gen()),
        PopsId::Nat => Value::int(rng.gen_range(0..=6)),
        PopsId::NonNegRational => Value::rat(rng.gen_range(0..=8), rng.gen_range(1..=4)),
        PopsId::LiftedReal => {
            if rng.gen_bool(0.2) {
                Value::Bot
            } else {
                Value::rat(rng.gen_range(-8..=8), rng.gen_range(1..=3))
            }
        }
        PopsId::LiftedNat => {
            if rng.gen_bool(0.2) {
                Value::Bot
            } else {
                Value::int(rng.gen_range(0..=6))
            }
        }
        PopsId::Trop => Value::Cost(random_cost(rng, -6, 6)),
        PopsId::TropPlus => Value::Cost(random_cost(rng, 0, 9)),
        PopsId::TropP(p) => {
            let len = rng.gen_range(0..=(*p as usize + 2));
            Value::CostBag(min_p((0..len).map(|_| random_cost(rng, 0, 9)).collect(), *p))
        }
        PopsId::TropEta(eta) => {
            let len = rng.gen_range(0..=4);
            let costs = (0..len).map(|_| random_cost(rng, 0, 9)).collect();
            Value::CostSet(min_eta(costs, *eta).expect("small costs do not overflow"))
        }
        PopsId::Three => [Tri::False, Tri::Unknown, Tri::True].choose(rng).map(|t| Value::Tri(*t)).expect("non-empty"),
        PopsId::CappedMax(k) => Value::int(rng.gen_range(0..=i64::from(*k))),
        PopsId::Product(l, r) => {
            Value::pair(sample_value(&Pops::new((**l).clone()), rng), sample_value(&Pops::new((**r).clone()), rng))
        }
    }
}

/// The whole carrier when it is small and finite.
pub fn all_values(pops: &Pops) -> Option<Vec<Value>> {
    match pops.id() {
        PopsId::Bool => Some(vec![Value::Bit(false), Value::Bit(true)]),
        PopsId::Three => Some(vec![Value::Tri(Tri::False), Value::Tri(Tri::Unknown), Value::Tri(Tri::True)]),
        PopsId::CappedMax(k) if *k <= 16 => Some((0..=i64::from(*k)).map(Value::int).collect()),
        PopsId::Product(l, r) => {
            let (ls, rs) = (all_values(&Pops::new((**l).clone()))?, all_values(&Pops::new((**r).clone()))?);
            Some(ls.iter().flat_map(|a| rs.iter().map(move |b| Value::pair(a.clone(), b.clone()))).collect())
        }
        _ => None,
    }
}

/// Exhaustive carrier if small, else `count` seeded samples plus 0, 1, ⊥.
pub fn samples(pops: &Pops, count: usize, rng: &mut impl Rng) -> Vec<Value> {
    if let Some(all) = all_values(pops) {
        return all;
    }
    let mut out = vec![pops.zero(), pops.one(), pops.bottom()];
    out.extend((0..count).map(|_| sample_value(pops, rng)));
    out.sort();
    out.dedup();
    out
}

/// A random polynomial of degree `1..=max_degree` with some missing terms.
pub fn random_poly(pops: &Pops, max_degree: usize, rng: &mut impl Rng) -> UniPoly {
    let degree = rng.gen_range(1..=max_degree);
    let mut coeffs: Vec<Option<Value>> =
        (0..=degree).map(|_| rng.gen_bool(0.75).then(|| sample_value(pops, rng))).collect();
    if coeffs[degree].is_none() {
        coeffs[degree] = Some(sample_value(pops, rng));
    }
    UniPoly::new(coeffs)
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilitySummary {
    pub samples: usize,
    pub cap: u32,
    /// Largest observed index; `None` when every sample hit the cap or there were none.
    pub max_index: Option<u32>,
    pub unstable: usize,
    /// Theoretical bound checked against, when one applies.
    pub bound: Option<u32>,
    pub violations: usize,
}

fn summarize(indices: &[Option<u32>], cap: u32, bound: Option<u32>) -> StabilitySummary {
    StabilitySummary {
        samples: indices.len(),
        cap,
        max_index: indices.iter().flatten().copied().max(),
        unstable: indices.iter().filter(|i| i.is_none()).count(),
        bound,
        violations: match bound {
            Some(b) => indices.iter().filter(|i| i.is_none_or(|v| v > b)).count(),
            None => 0,
        },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub elements: StabilitySummary,
    pub polynomials: StabilitySummary,
    pub linear_polynomials: StabilitySummary,
}

/// Empirical element and polynomial stability, compared with the known `p` when there is one.
pub fn stability_report(pops: &Pops, count: usize, cap: u32, rng: &mut impl Rng) -> Result<StabilityReport, PopsError> {
    let p = pops.known_stability_p;
    let mut elems = Vec::with_capacity(count);
    for _ in 0..count {
        elems.push(pops.element_stability_index(&sample_value(pops, rng), cap)?);
    }
    let mut polys = Vec::with_capacity(count);
    let mut linear = Vec::with_capacity(count);
    for _ in 0..count {
        polys.push(poly_stability_index(pops, &random_poly(pops, 3, rng), cap)?);
        let f = UniPoly::linear(sample_value(pops, rng), sample_value(pops, rng));
        linear.push(poly_stability_index(pops, &f, cap)?);
    }
    let poly_bound = p.map(|p| if p == 0 { 1 } else { p + 2 });
    let linear_bound = p.map(|p| if p == 0 { 1 } else { p + 1 });
    Ok(StabilityReport {
        elements: summarize(&elems, cap, p),
        polynomials: summarize(&polys, cap, poly_bound),
        linear_polynomials: summarize(&linear, cap, linear_bound),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Flags {
    pub strict_times: bool,
    pub has_minus: bool,
    pub known_stability_p: Option<u32>,
    pub naturally_ordered: bool,
    pub absorbing: bool,
    pub rank: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PopsReport {
    pub pops: String,
    pub seed: u64,
    pub flags: Flags,
    pub axioms: AxiomReport,
    pub natural_order: bool,
    /// `None` when refused for a non-strict product.
    pub s_plus_bot: Option<SPlusBot>,
    pub stability: Option<StabilityReport>,
}

/// Axiom, order and optional stability report for one POPS with a fixed seed.
pub fn pops_report(pops: &Pops, seed: u64, with_stability: bool) -> Result<PopsReport, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = samples(pops, 14, &mut rng);
    let axioms = check_axioms(pops, &sample);
    let natural_order = natural_order_probe(pops, &sample)?;
    let s_plus_bot = match s_plus_bot_check(pops, &sample) {
        Ok(r) => Some(r),
        Err(AnalysisError::NotStrict(_)) => None,
        Err(e) => return Err(e),
    };
    let stability = if with_stability { Some(stability_report(pops, 200, 64, &mut rng)?) } else { None };
    Ok(PopsReport {
        pops: pops.to_string(),
        seed,
        flags: Flags {
            strict_times: pops.strict_times,
            has_minus: pops.has_minus,
            known_stability_p: pops.known_stability_p,
            naturally_ordered: pops.naturally_ordered,
            absorbing: pops.absorbing,
            rank: pops.rank,
        },
        axioms,
        natural_order,
        s_plus_bot,
        stability,
    })
}
