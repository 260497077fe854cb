//! Linear systems `X = AX ⊕ B`: matrix form, power sums, stability
//! measurement, and least fixpoints by variable elimination.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::engine::{Solution, Status};
use crate::ground::GroundedSystem;
use crate::pops::{Pops, PopsError, Value};

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("variable {var} has a monomial of degree {degree}")]
    NonLinear { var: String, degree: u32 },
    #[error("the system applies casts or functions to its own variables")]
    Wrapped,
    #[error("the system mixes POPS")]
    MixedPops,
    #[error("{0} does not absorb with 0, so missing matrix entries are not neutral")]
    NotAbsorbing(String),
    #[error("no stability parameter is known for {0}; pass one explicitly")]
    UnknownP(String),
    #[error("elimination with p = {p} did not produce a fixpoint at {var}; p is too small for this POPS")]
    NotFixpoint { p: u32, var: String },
    #[error("matrix dimensions differ: {0} vs {1}")]
    Dimension(usize, usize),
    #[error(transparent)]
    Pops(#[from] PopsError),
}

/// Dense square matrix over one POPS.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiringMatrix {
    pops: Pops,
    n: usize,
    entries: Vec<Value>,
}

impl SemiringMatrix {
    pub fn zeros(pops: &Pops, n: usize) -> Self {
        SemiringMatrix { pops: pops.clone(), n, entries: vec![pops.zero(); n * n] }
    }

    pub fn identity(pops: &Pops, n: usize) -> Self {
        let mut m = Self::zeros(pops, n);
        for i in 0..n {
            m.entries[i * n + i] = pops.one();
        }
        m
    }

    /// Builds a matrix from rows; every entry must belong to `pops`.
    pub fn from_rows(pops: &Pops, rows: Vec<Vec<Value>>) -> Result<Self, LinearError> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(LinearError::Dimension(n, row.len()));
            }
            for v in row {
                pops.check(&v)?;
                entries.push(v);
            }
        }
        Ok(SemiringMatrix { pops: pops.clone(), n, entries })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pops(&self) -> &Pops {
        &self.pops
    }

    pub fn get(&self, i: usize, j: usize) -> &Value {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Value) {
        self.entries[i * self.n + j] = v;
    }

    pub fn plus(&self, other: &Self) -> Result<Self, LinearError> {
        if self.n != other.n {
            return Err(LinearError::Dimension(self.n, other.n));
        }
        let entries =
            self.entries.iter().zip(&other.entries).map(|(a, b)| self.pops.plus(a, b)).collect::<Result<_, _>>()?;
        Ok(SemiringMatrix { pops: self.pops.clone(), n: self.n, entries })
    }

    pub fn mul(&self, other: &Self) -> Result<Self, LinearError> {
        if self.n != other.n {
            return Err(LinearError::Dimension(self.n, other.n));
        }
        let n = self.n;
        let mut out = Self::zeros(&self.pops, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = self.pops.zero();
                for k in 0..n {
                    let t = self.pops.times(self.get(i, k), other.get(k, j))?;
                    acc = self.pops.plus(&acc, &t)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for SemiringMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

/// `I ⊕ A ⊕ A² ⊕ … ⊕ A^q`.
pub fn matrix_power_sum(a: &SemiringMatrix, q: u32) -> Result<SemiringMatrix, LinearError> {
    let mut acc = SemiringMatrix::identity(&a.pops, a.n);
    let mut power = acc.clone();
    for _ in 0..q {
        power = power.mul(a)?;
        acc = acc.plus(&power)?;
    }
    Ok(acc)
}

/// Smallest `q ≤ cap` with `A^(q) = A^(q+1)`.
pub fn matrix_stability_index(a: &SemiringMatrix, cap: u32) -> Result<Option<u32>, LinearError> {
    let mut acc = SemiringMatrix::identity(&a.pops, a.n);
    let mut power = acc.clone();
    for q in 0..=cap {
        power = power.mul(a)?;
        let next = acc.plus(&power)?;
        if next == acc {
            return Ok(Some(q));
        }
        acc = next;
    }
    Ok(None)
}

/// `X = AX ⊕ B` extracted from a grounded system.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: SemiringMatrix,
    pub b: Vec<Value>,
    pub labels: Vec<String>,
}

fn single_pops(system: &GroundedSystem) -> Result<Pops, LinearError> {
    match system.single_pops() {
        Some(p) => Ok(p.clone()),
        None if system.is_empty() => Ok(Pops::new(crate::pops::PopsId::Bool)),
        None => Err(LinearError::MixedPops),
    }
}

fn check_shape(system: &GroundedSystem) -> Result<Pops, LinearError> {
    if system.has_wraps() {
        return Err(LinearError::Wrapped);
    }
    for (k, poly) in system.polys.iter().enumerate() {
        if let Some(m) = poly.iter().find(|m| m.degree() > 1) {
            return Err(LinearError::NonLinear { var: system.vars[k].to_string(), degree: m.degree() });
        }
    }
    let pops = single_pops(system)?;
    if !pops.absorbing {
        return Err(LinearError::NotAbsorbing(pops.to_string()));
    }
    Ok(pops)
}

pub fn to_matrix_form(system: &GroundedSystem) -> Result<LinearSystem, LinearError> {
    let pops = check_shape(system)?;
    let n = system.len();
    let mut a = SemiringMatrix::zeros(&pops, n);
    let mut b = vec![pops.zero(); n];
    for (k, poly) in system.polys.iter().enumerate() {
        for m in poly {
            match m.factors.first() {
                None => b[k] = pops.plus(&b[k], &m.coeff)?,
                Some(f) => {
                    let v = pops.plus(a.get(k, f.var), &m.coeff)?;
                    a.set(k, f.var, v);
                }
            }
        }
    }
    Ok(LinearSystem { a, b, labels: system.vars.iter().map(|v| v.to_string()).collect() })
}

/// The stability parameter the elimination solver would use, or why it cannot run.
pub fn eligibility(system: &GroundedSystem, p_hint: Option<u32>) -> Result<u32, LinearError> {
    let pops = check_shape(system)?;
    pops.known_stability_p.or(p_hint).ok_or_else(|| LinearError::UnknownP(pops.to_string()))
}

/// Pops wrapper that counts semiring operations.
struct Counted<'a> {
    pops: &'a Pops,
    ops: u64,
}

impl Counted<'_> {
    fn plus(&mut self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        self.ops += 1;
        self.pops.plus(a, b)
    }

    fn times(&mut self, a: &Value, b: &Value) -> Result<Value, PopsError> {
        self.ops += 1;
        self.pops.times(a, b)
    }
}

/// `constant ⊕ Σ coeffs[i] ⊗ x_i`.
#[derive(Clone, Debug)]
struct LinearFn {
    coeffs: BTreeMap<usize, Value>,
    constant: Value,
}

impl LinearFn {
    fn scale(&self, c: &Value, ops: &mut Counted<'_>) -> Result<LinearFn, PopsError> {
        let mut coeffs = BTreeMap::new();
        for (&i, v) in &self.coeffs {
            coeffs.insert(i, ops.times(c, v)?);
        }
        Ok(LinearFn { coeffs, constant: ops.times(c, &self.constant)? })
    }

    fn add_assign(&mut self, other: &LinearFn, ops: &mut Counted<'_>) -> Result<(), PopsError> {
        for (&i, v) in &other.coeffs {
            let merged = match self.coeffs.get(&i) {
                Some(old) => ops.plus(old, v)?,
                None => v.clone(),
            };
            self.coeffs.insert(i, merged);
        }
        self.constant = ops.plus(&self.constant, &other.constant)?;
        Ok(())
    }
}

/// Least fixpoint of a linear system by eliminating variables from the last.
///
/// For `x_k = a ⊗ x_k ⊕ g(x_<k)` the solution is `a^(p) ⊗ g ⊕ ⊥`; it is
/// substituted into the remaining equations and recovered by back-substitution.
/// The result is checked to be a fixpoint, so a wrong `p` is reported.
pub fn linear_lfp(system: &GroundedSystem, p: u32) -> Result<Solution, LinearError> {
    let form = to_matrix_form(system)?;
    let pops = form.a.pops.clone();
    let n = system.len();
    let mut ops = Counted { pops: &pops, ops: 0 };
    let mut fns: Vec<LinearFn> = (0..n)
        .map(|k| LinearFn {
            coeffs: (0..n)
                .filter(|&i| *form.a.get(k, i) != pops.zero())
                .map(|i| (i, form.a.get(k, i).clone()))
                .collect(),
            constant: form.b[k].clone(),
        })
        .collect();
    let mut solved: Vec<Option<LinearFn>> = vec![None; n];
    for k in (0..n).rev() {
        let mut f = fns[k].clone();
        let c = match f.coeffs.remove(&k) {
            None => f,
            Some(a) => {
                let mut closure = ops.pops.one();
                for _ in 0..p {
                    let t = ops.times(&a, &closure)?;
                    closure = ops.plus(&ops.pops.one(), &t)?;
                }
                let mut c = f.scale(&closure, &mut ops)?;
                c.constant = ops.plus(&c.constant, &ops.pops.bottom())?;
                c
            }
        };
        for g in fns.iter_mut().take(k) {
            if let Some(d) = g.coeffs.remove(&k) {
                let scaled = c.scale(&d, &mut ops)?;
                g.add_assign(&scaled, &mut ops)?;
            }
        }
        solved[k] = Some(c);
    }
    let mut x: Vec<Value> = Vec::with_capacity(n);
    for c in solved.into_iter().map(|c| c.expect("every variable eliminated")) {
        let mut v = c.constant.clone();
        for (&i, coeff) in &c.coeffs {
            let t = ops.times(coeff, &x[i])?;
            v = ops.plus(&v, &t)?;
        }
        x.push(v);
    }
    let check = system.ico_apply(&x).map_err(|e| LinearError::Pops(e.source))?;
    if let Some(k) = (0..n).find(|&k| check[k] != x[k]) {
        return Err(LinearError::NotFixpoint { p, var: system.vars[k].to_string() });
    }
    Ok(Solution {
        assignment: x,
        iterations: 0,
        status: Status::Converged,
        trace: Vec::new(),
        delta_sizes: Vec::new(),
        previous: None,
        ops: ops.ops,
    })
}
