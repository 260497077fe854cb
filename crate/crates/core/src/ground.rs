//! Grounding a stratum into one polynomial per ground IDB atom, and the
//! immediate consequence operator over the result.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

use crate::ast::{
    CBody, CCond, CCondAtom, CExpr, CFactor, CKey, CTerm, CheckedProgram, CheckedRule, Stratum, VarId, Wrap,
};
use crate::pops::{Pops, PopsError, Value};
use crate::store::{Constant, Database, DomainTable, Key, StoreError};

pub const DEFAULT_MONOMIAL_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum GroundError {
    #[error("no case branch matches {head} and the rule has no else")]
    MissingBranch { head: String },
    #[error("case branches overlap at {head}")]
    OverlappingBranches { head: String },
    #[error("grounding exceeds the monomial budget of {limit}")]
    Budget { limit: u64 },
    #[error("while grounding {context}: {source}")]
    Pops { context: String, source: PopsError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One ground IDB atom.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundVar {
    pub rel: String,
    pub key: Key,
    pub pops: Pops,
}

impl fmt::Display for GroundVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, k) in self.key.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundFactor {
    pub var: usize,
    pub power: u32,
    pub wrap: Wrap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundMonomial {
    pub coeff: Value,
    pub factors: Vec<GroundFactor>,
}

impl GroundMonomial {
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.power).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundStats {
    pub vars: usize,
    pub monomials: usize,
    /// Product instances visited before merging.
    pub expanded: u64,
}

/// `x_k :- f_k(x_1, …, x_N)` for every ground atom of a stratum.
#[derive(Clone, Debug)]
pub struct GroundedSystem {
    pub vars: Vec<GroundVar>,
    pub polys: Vec<Vec<GroundMonomial>>,
    pub stats: GroundStats,
    /// Atoms removed by active-domain restriction; they stay at ⊥.
    pub dropped: Vec<GroundVar>,
}

fn wrap_key(w: &Wrap) -> (u8, String) {
    match w {
        Wrap::Plain => (0, String::new()),
        Wrap::Cast => (1, String::new()),
        Wrap::Apply(f) => (2, f.to_string()),
    }
}

type FactorKey = Vec<(usize, (u8, String), u32)>;

fn factor_key(fs: &[GroundFactor]) -> FactorKey {
    fs.iter().map(|f| (f.var, wrap_key(&f.wrap), f.power)).collect()
}

/// Applies a wrap to the value of a variable living in `from`, producing a value in `to`.
pub(crate) fn wrap_value(wrap: &Wrap, from: &Pops, to: &Pops, v: &Value) -> Result<Value, PopsError> {
    match wrap {
        Wrap::Plain => Ok(v.clone()),
        Wrap::Cast => match v {
            Value::Bit(b) => Ok(to.cast_bool(*b)),
            other => Err(PopsError::CarrierMismatch { pops: from.to_string(), value: other.to_string() }),
        },
        Wrap::Apply(f) => f.apply(from, to, v),
    }
}

impl GroundedSystem {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn bottom(&self) -> Vec<Value> {
        self.vars.iter().map(|v| v.pops.bottom()).collect()
    }

    pub fn monomial_count(&self) -> usize {
        self.polys.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, rel: &str, key: &[Constant]) -> Option<usize> {
        self.vars.iter().position(|v| v.rel == rel && v.key == key)
    }

    /// Every var shares one POPS.
    pub fn single_pops(&self) -> Option<&Pops> {
        let first = &self.vars.first()?.pops;
        self.vars.iter().all(|v| v.pops == *first).then_some(first)
    }

    pub fn has_wraps(&self) -> bool {
        self.polys.iter().flatten().flat_map(|m| &m.factors).any(|f| f.wrap != Wrap::Plain)
    }

    /// Every monomial has degree at most one.
    pub fn is_linear(&self) -> bool {
        self.polys.iter().flatten().all(|m| m.degree() <= 1)
    }

    /// Value of one monomial under an assignment.
    pub fn eval_monomial(&self, k: usize, m: &GroundMonomial, a: &[Value]) -> Result<Value, PopsError> {
        let pops = &self.vars[k].pops;
        let mut acc = m.coeff.clone();
        for f in &m.factors {
            let v = wrap_value(&f.wrap, &self.vars[f.var].pops, pops, &a[f.var])?;
            for _ in 0..f.power {
                acc = pops.times(&acc, &v)?;
            }
        }
        Ok(acc)
    }

    /// Component `k` of the immediate consequence operator.
    pub fn eval_poly(&self, k: usize, a: &[Value]) -> Result<Value, PopsError> {
        let pops = &self.vars[k].pops;
        let mut acc: Option<Value> = None;
        for m in &self.polys[k] {
            let v = self.eval_monomial(k, m, a)?;
            acc = Some(match acc {
                None => v,
                Some(prev) => pops.plus(&prev, &v)?,
            });
        }
        Ok(acc.unwrap_or_else(|| pops.zero()))
    }

    /// One simultaneous application of every polynomial.
    pub fn ico_apply(&self, a: &[Value]) -> Result<Vec<Value>, IcoError> {
        (0..self.len()).map(|k| self.eval_poly(k, a).map_err(|source| IcoError { var: k, source })).collect()
    }

    /// Like [`Self::ico_apply`], splitting the variables across `threads` workers.
    pub fn ico_apply_parallel(&self, a: &[Value], threads: usize) -> Result<Vec<Value>, IcoError> {
        if threads <= 1 || self.len() < 2 * threads {
            return self.ico_apply(a);
        }
        let chunk = self.len().div_ceil(threads);
        let parts: Vec<Result<Vec<Value>, IcoError>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..self.len())
                .step_by(chunk)
                .map(|start| {
                    s.spawn(move || {
                        (start..(start + chunk).min(self.len()))
                            .map(|k| self.eval_poly(k, a).map_err(|source| IcoError { var: k, source }))
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("ico worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(self.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Text listing, one line per variable.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, var) in self.vars.iter().enumerate() {
            let _ = write!(out, "x_{}: {var} = ", k + 1);
            if self.polys[k].is_empty() {
                out.push_str("(empty)");
            }
            for (i, m) in self.polys[k].iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                let _ = write!(out, "{}", m.coeff);
                for f in &m.factors {
                    out.push_str(" * ");
                    let name = format!("x_{}", f.var + 1);
                    match &f.wrap {
                        Wrap::Plain => out.push_str(&name),
                        Wrap::Cast => {
                            let _ = write!(out, "cast[{}]({name})", self.vars[f.var].pops);
                        }
                        Wrap::Apply(func) => {
                            let _ = write!(out, "cast[{func}]({name})");
                        }
                    }
                    if f.power > 1 {
                        let _ = write!(out, "^{}", f.power);
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Drops variables that provably stay at ⊥.
    ///
    /// A variable is kept when some monomial has a non-⊥ coefficient and only
    /// live plain factors, or when its polynomial is empty and 0 ≠ ⊥. Monomials
    /// mentioning dropped variables are folded into constants, so the least
    /// fixpoint on surviving variables is unchanged.
    pub fn active_domain_restrict(&self, explicit_ranges: bool) -> Result<(GroundedSystem, Option<String>), PopsError> {
        if let Some(v) = self.vars.iter().find(|v| !v.pops.strict_times) {
            return Ok((self.clone(), Some(format!("restriction refused: {} has a non-strict product", v.pops))));
        }
        if explicit_ranges {
            return Ok((self.clone(), Some("restriction refused: stratum uses explicit ranges".into())));
        }
        let n = self.len();
        let mut live = vec![false; n];
        loop {
            let mut changed = false;
            for k in 0..n {
                if live[k] {
                    continue;
                }
                let pops = &self.vars[k].pops;
                let poly = &self.polys[k];
                let alive = (poly.is_empty() && pops.zero() != pops.bottom())
                    || poly.iter().any(|m| {
                        !pops.is_bottom(&m.coeff) && m.factors.iter().all(|f| f.wrap != Wrap::Plain || live[f.var])
                    });
                if alive {
                    live[k] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if live.iter().all(|&l| l) {
            return Ok((self.clone(), None));
        }
        let mut remap = vec![usize::MAX; n];
        let mut vars = Vec::new();
        let mut dropped = self.dropped.clone();
        for k in 0..n {
            if live[k] {
                remap[k] = vars.len();
                vars.push(self.vars[k].clone());
            } else {
                dropped.push(self.vars[k].clone());
            }
        }
        let mut polys = Vec::new();
        for k in (0..n).filter(|&k| live[k]) {
            let pops = &self.vars[k].pops;
            let mut out = Vec::new();
            for m in &self.polys[k] {
                let mut coeff = m.coeff.clone();
                let mut factors = Vec::new();
                for f in &m.factors {
                    if live[f.var] {
                        factors.push(GroundFactor { var: remap[f.var], ..f.clone() });
                    } else {
                        let from = &self.vars[f.var].pops;
                        let v = wrap_value(&f.wrap, from, pops, &from.bottom())?;
                        for _ in 0..f.power {
                            coeff = pops.times(&coeff, &v)?;
                        }
                    }
                }
                out.push(GroundMonomial { coeff, factors });
            }
            polys.push(normalize(pops, out)?);
        }
        let stats = GroundStats {
            vars: vars.len(),
            monomials: polys.iter().map(Vec::len).sum(),
            expanded: self.stats.expanded,
        };
        let note = format!("active-domain restriction dropped {} of {n} variables", n - vars.len());
        Ok((GroundedSystem { vars, polys, stats, dropped }, Some(note)))
    }
}

#[derive(Debug, Error)]
#[error("variable x_{}: {source}", .var + 1)]
pub struct IcoError {
    pub var: usize,
    pub source: PopsError,
}

/// Merges like monomials and drops ones that cannot contribute.
fn normalize(pops: &Pops, monomials: Vec<GroundMonomial>) -> Result<Vec<GroundMonomial>, PopsError> {
    let mut merged: BTreeMap<FactorKey, GroundMonomial> = BTreeMap::new();
    for m in monomials {
        match merged.get_mut(&factor_key(&m.factors)) {
            Some(existing) => existing.coeff = pops.plus(&existing.coeff, &m.coeff)?,
            None => {
                merged.insert(factor_key(&m.factors), m);
            }
        }
    }
    let zero = pops.zero();
    Ok(merged.into_values().filter(|m| !(pops.absorbing && m.coeff == zero)).collect())
}

fn pops_err(context: impl fmt::Display) -> impl FnOnce(PopsError) -> GroundError {
    let context = context.to_string();
    move |source| GroundError::Pops { context, source }
}

/// Grounding inputs: the checked program plus every EDB and lower-stratum IDB.
pub struct Grounder<'a> {
    program: &'a CheckedProgram,
    db: &'a Database,
    budget: u64,
}

struct Layout {
    vars: Vec<GroundVar>,
    bases: HashMap<String, (usize, Vec<Arc<DomainTable>>)>,
}

impl Layout {
    fn index(&self, rel: &str, key: &[Constant]) -> Option<usize> {
        let (base, doms) = self.bases.get(rel)?;
        let mut idx = 0usize;
        for (c, d) in key.iter().zip(doms) {
            idx = idx * d.len() + d.position(c)?;
        }
        Some(base + idx)
    }
}

struct RuleCx<'r> {
    rule: &'r CheckedRule,
    env: Vec<Option<Constant>>,
}

impl<'a> Grounder<'a> {
    pub fn new(program: &'a CheckedProgram, db: &'a Database) -> Self {
        Grounder { program, db, budget: DEFAULT_MONOMIAL_BUDGET }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    fn layout(&self, stratum: &Stratum) -> Result<Layout, GroundError> {
        let mut vars = Vec::new();
        let mut bases = HashMap::new();
        for name in &stratum.idbs {
            let schema = self.program.schema(name).ok_or_else(|| StoreError::UnknownRelation(name.clone()))?;
            let doms: Vec<Arc<DomainTable>> =
                schema.key_domains.iter().map(|d| self.db.domain(d).cloned()).collect::<Result<_, _>>()?;
            bases.insert(name.clone(), (vars.len(), doms.clone()));
            let pops = Pops::new(schema.pops.clone());
            let total: u64 = doms.iter().map(|d| d.len() as u64).product();
            if total > self.budget {
                return Err(GroundError::Budget { limit: self.budget });
            }
            for key in cartesian(&doms) {
                vars.push(GroundVar { rel: name.clone(), key, pops: pops.clone() });
            }
        }
        Ok(Layout { vars, bases })
    }

    /// Grounds every rule of the stratum over the full key domains.
    pub fn ground(&self, stratum: &Stratum) -> Result<GroundedSystem, GroundError> {
        let layout = self.layout(stratum)?;
        let mut raw: Vec<Vec<GroundMonomial>> = vec![Vec::new(); layout.vars.len()];
        let mut expanded = 0u64;
        for &ri in &stratum.rules {
            let rule = &self.program.rules[ri];
            let head_doms = &layout.bases[&rule.head_rel].1;
            let head_vars: Vec<Option<VarId>> =
                rule.head.iter().map(|k| if let CKey::Var(v) = k { Some(*v) } else { None }).collect();
            let const_ok = rule.head.iter().zip(head_doms).all(|(k, d)| match k {
                CKey::Const(c) => d.contains(c),
                _ => true,
            });
            if !const_ok {
                continue;
            }
            let free: Vec<(VarId, Arc<DomainTable>)> =
                head_vars.iter().zip(head_doms).filter_map(|(v, d)| v.map(|v| (v, d.clone()))).collect();
            let free_doms: Vec<Arc<DomainTable>> = free.iter().map(|(_, d)| d.clone()).collect();
            for assignment in cartesian(&free_doms) {
                let mut cx = RuleCx { rule, env: vec![None; rule.vars.len()] };
                for ((v, _), c) in free.iter().zip(assignment) {
                    cx.env[*v] = Some(c);
                }
                let key: Key = rule
                    .head
                    .iter()
                    .map(|k| match k {
                        CKey::Var(v) => cx.env[*v].clone().expect("head variables are assigned"),
                        CKey::Const(c) => c.clone(),
                        CKey::Shift(..) => unreachable!("checker rejects shifts in heads"),
                    })
                    .collect();
                let k = layout.index(&rule.head_rel, &key).expect("head key lies in its domains");
                let label = layout.vars[k].to_string();
                let body = match &rule.body {
                    CBody::Expr(e) => Some(e),
                    CBody::Cases { branches, otherwise } => {
                        let mut chosen = None;
                        for (cond, e) in branches {
                            if self.cond_holds(cond, &cx)? {
                                if chosen.is_some() {
                                    return Err(GroundError::OverlappingBranches { head: label });
                                }
                                chosen = Some(e);
                            }
                        }
                        match chosen.or(otherwise.as_ref()) {
                            Some(e) => Some(e),
                            None => return Err(GroundError::MissingBranch { head: label }),
                        }
                    }
                };
                if let Some(e) = body {
                    self.expand(e, &mut cx, &layout, &layout.vars[k].pops, &mut raw[k], &mut expanded)?;
                }
            }
        }
        let mut polys = Vec::with_capacity(raw.len());
        for (k, ms) in raw.into_iter().enumerate() {
            polys.push(normalize(&layout.vars[k].pops, ms).map_err(pops_err(&layout.vars[k]))?);
        }
        let stats = GroundStats { vars: layout.vars.len(), monomials: polys.iter().map(Vec::len).sum(), expanded };
        Ok(GroundedSystem { vars: layout.vars, polys, stats, dropped: Vec::new() })
    }

    fn key_value(&self, k: &CKey, cx: &RuleCx<'_>, dom: Option<&DomainTable>) -> Constant {
        match k {
            CKey::Var(v) => cx.env[*v].clone().expect("variable bound before use"),
            CKey::Const(c) => c.clone(),
            CKey::Shift(v, d) => {
                let base = cx.env[*v].clone().expect("variable bound before use");
                match dom.and_then(|dom| dom.shift(&base, *d)) {
                    Some(c) => c,
                    None => Constant::Int(base.as_int().unwrap_or(0).saturating_add(*d)),
                }
            }
        }
    }

    fn relation_key(&self, rel: &str, args: &[CKey], cx: &RuleCx<'_>) -> Result<Key, GroundError> {
        let relation = self.program.schema(rel).ok_or_else(|| StoreError::UnknownRelation(rel.into()))?;
        let mut key = Vec::with_capacity(args.len());
        for (a, d) in args.iter().zip(&relation.key_domains) {
            let dom = self.db.domain(d)?;
            key.push(self.key_value(a, cx, Some(dom)));
        }
        Ok(key)
    }

    fn lookup(&self, rel: &str, key: &[Constant]) -> Result<Value, GroundError> {
        let r = self.db.relation(rel)?;
        if key.iter().zip(r.domains()).any(|(c, d)| !d.contains(c)) {
            return Ok(r.pops().bottom());
        }
        Ok(r.get_unchecked(key))
    }

    fn cond_holds(&self, cond: &CCond, cx: &RuleCx<'_>) -> Result<bool, GroundError> {
        for atom in &cond.atoms {
            let ok = match atom {
                CCondAtom::Cmp(l, op, r) => {
                    let env: HashMap<VarId, Constant> =
                        cx.env.iter().enumerate().filter_map(|(i, c)| c.clone().map(|c| (i, c))).collect();
                    crate::ast::compare_keys(l, *op, r, &env).unwrap_or(false)
                }
                CCondAtom::Member { rel, args, negated } => {
                    let key = self.relation_key(rel, args, cx)?;
                    let v = self.lookup(rel, &key)?;
                    (v == Value::Bit(true)) != *negated
                }
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn expand(
        &self,
        e: &CExpr,
        cx: &mut RuleCx<'_>,
        layout: &Layout,
        pops: &Pops,
        out: &mut Vec<GroundMonomial>,
        expanded: &mut u64,
    ) -> Result<(), GroundError> {
        for term in &e.terms {
            match term {
                CTerm::Product(factors) => {
                    *expanded += 1;
                    if *expanded > self.budget {
                        return Err(GroundError::Budget { limit: self.budget });
                    }
                    if let Some(m) = self.product(factors, cx, layout, pops)? {
                        out.push(m);
                    }
                }
                CTerm::Sum { binders, body, guard } => {
                    let ranges: Vec<Vec<Constant>> = binders
                        .iter()
                        .map(|&b| {
                            let info = &cx.rule.vars[b];
                            Ok(match (info.range, &info.domain) {
                                (Some((lo, hi)), _) => (lo..=hi).map(Constant::Int).collect(),
                                (None, Some(d)) => self.db.domain(d)?.elements().to_vec(),
                                (None, None) => Vec::new(),
                            })
                        })
                        .collect::<Result<_, StoreError>>()?;
                    self.sum_over(binders, &ranges, 0, body, guard.as_ref(), cx, layout, pops, out, expanded)?;
                    for &b in binders {
                        cx.env[b] = None;
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn sum_over(
        &self,
        binders: &[VarId],
        ranges: &[Vec<Constant>],
        depth: usize,
        body: &CExpr,
        guard: Option<&CCond>,
        cx: &mut RuleCx<'_>,
        layout: &Layout,
        pops: &Pops,
        out: &mut Vec<GroundMonomial>,
        expanded: &mut u64,
    ) -> Result<(), GroundError> {
        if depth == binders.len() {
            if let Some(g) = guard {
                if !self.cond_holds(g, cx)? {
                    return Ok(());
                }
            }
            return self.expand(body, cx, layout, pops, out, expanded);
        }
        for c in &ranges[depth] {
            cx.env[binders[depth]] = Some(c.clone());
            self.sum_over(binders, ranges, depth + 1, body, guard, cx, layout, pops, out, expanded)?;
        }
        Ok(())
    }

    fn product(
        &self,
        factors: &[CFactor],
        cx: &RuleCx<'_>,
        layout: &Layout,
        pops: &Pops,
    ) -> Result<Option<GroundMonomial>, GroundError> {
        let mut coeff = pops.one();
        let mut vars: Vec<GroundFactor> = Vec::new();
        let ctx = || format!("a rule for {}", cx.rule.head_rel);
        for f in factors {
            match f {
                CFactor::Eq(l, r) => {
                    if self.key_value(l, cx, None) != self.key_value(r, cx, None) {
                        return Ok(None);
                    }
                }
                CFactor::Literal(v) => coeff = pops.times(&coeff, v).map_err(pops_err(ctx()))?,
                CFactor::Key(k) => {
                    let c = self.key_value(k, cx, None);
                    let n = c.as_int().ok_or_else(|| GroundError::Pops {
                        context: ctx(),
                        source: PopsError::CarrierMismatch { pops: pops.to_string(), value: c.to_string() },
                    })?;
                    let v = pops.from_int(n).map_err(pops_err(ctx()))?;
                    coeff = pops.times(&coeff, &v).map_err(pops_err(ctx()))?;
                }
                CFactor::Rel { rel, args, wrap } => {
                    let key = self.relation_key(rel, args, cx)?;
                    if layout.bases.contains_key(rel) {
                        let Some(var) = layout.index(rel, &key) else {
                            // Key outside the IDB's domain: the atom reads ⊥.
                            let from = &Pops::new(self.program.schema(rel).expect("declared").pops.clone());
                            let v = wrap_value(wrap, from, pops, &from.bottom()).map_err(pops_err(ctx()))?;
                            coeff = pops.times(&coeff, &v).map_err(pops_err(ctx()))?;
                            continue;
                        };
                        match vars.iter_mut().find(|g| g.var == var && g.wrap == *wrap) {
                            Some(g) => g.power += 1,
                            None => vars.push(GroundFactor { var, power: 1, wrap: wrap.clone() }),
                        }
                    } else {
                        let r = self.db.relation(rel)?;
                        let v = self.lookup(rel, &key)?;
                        let v = wrap_value(wrap, r.pops(), pops, &v).map_err(pops_err(ctx()))?;
                        coeff = pops.times(&coeff, &v).map_err(pops_err(ctx()))?;
                    }
                }
            }
        }
        vars.sort_by_key(|a| (a.var, wrap_key(&a.wrap)));
        Ok(Some(GroundMonomial { coeff, factors: vars }))
    }
}

/// All keys of a product of domains, in lexicographic domain order.
fn cartesian(doms: &[Arc<DomainTable>]) -> Vec<Key> {
    let mut out: Vec<Key> = vec![Vec::new()];
    for d in doms {
        let mut next = Vec::with_capacity(out.len() * d.len());
        for prefix in &out {
            for c in d.elements() {
                let mut k = prefix.clone();
                k.push(c.clone());
                next.push(k);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::check;
    use crate::parser::parse;
    use crate::store::DatabaseBuilder;

    pub(crate) fn setup(src: &str, facts: &[(&str, &[&str], &str)]) -> (CheckedProgram, Database) {
        let program = check(&parse(src).unwrap()).unwrap_or_else(|d| panic!("{d:?}"));
        let mut b = DatabaseBuilder::new(program.schemas.clone(), program.declared_domains.clone());
        for (c_dom, c) in &program.constants {
            b.note_constant(c_dom, c.clone());
        }
        for (rel, keys, v) in facts {
            b.add_fact(rel, keys, v).unwrap();
        }
        (program, b.build().unwrap().0)
    }

    const SSSP: &str = "domain node = {a,b,c,d}.\nedb E(node,node): tropplus.\nidb L(node): tropplus.\n\
                        L(x) :- [x = a] + sum(z){ L(z) * E(z,x) }.";
    const ROUTES: &[(&str, &[&str], &str)] = &[
        ("E", &["a", "b"], "1"),
        ("E", &["b", "a"], "2"),
        ("E", &["a", "c"], "5"),
        ("E", &["b", "c"], "3"),
        ("E", &["c", "d"], "4"),
    ];

    fn sssp() -> GroundedSystem {
        let (p, db) = setup(SSSP, ROUTES);
        Grounder::new(&p, &db).ground(&p.strata[0]).unwrap()
    }

    #[test]
    fn sssp_grounding_text() {
        let g = sssp();
        let expected = "x_1: L(a) = 0 + 2 * x_2\nx_2: L(b) = 1 * x_1\nx_3: L(c) = 5 * x_1 + 3 * x_2\n\
                        x_4: L(d) = 4 * x_3\n";
        assert_eq!(g.dump(), expected);
        assert!(g.is_linear());
    }

    #[test]
    fn ico_from_bottom() {
        let g = sssp();
        let first = g.ico_apply(&g.bottom()).unwrap();
        assert_eq!(
            first,
            vec![Value::cost(0), Value::Cost(crate::pops::Cost::Inf), g.bottom()[2].clone(), g.bottom()[3].clone()]
        );
        let par = g.ico_apply_parallel(&first, 2).unwrap();
        assert_eq!(par, g.ico_apply(&first).unwrap());
    }

    #[test]
    fn false_guard_empties_every_poly() {
        let src = "domain n = {a,b}.\nedb E(n,n): bool.\nidb T(n): bool.\nT(x) :- sum(y){ E(x,y) * [y = x] | x != x }.";
        let (p, db) = setup(src, &[("E", &["a", "a"], "true")]);
        let g = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
        assert!(g.polys.iter().all(Vec::is_empty));
    }

    #[test]
    fn parts_grounding() {
        let src = "domain part = {a,b,c,d}.\nedb E(part,part): bool.\nedb C(part): real_bot.\nidb T(part): real_bot.\n\
                   T(x) :- C(x) + sum(y){ T(y) | E(x,y) }.";
        let facts: &[(&str, &[&str], &str)] = &[
            ("E", &["a", "b"], "true"),
            ("E", &["a", "c"], "true"),
            ("E", &["b", "a"], "true"),
            ("E", &["b", "c"], "true"),
            ("E", &["c", "d"], "true"),
            ("C", &["c"], "1"),
            ("C", &["d"], "10"),
        ];
        let (p, db) = setup(src, facts);
        let g = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
        let dump = g.dump();
        assert!(dump.contains("x_1: T(a) = bot + 1 * x_2 + 1 * x_3\n"), "{dump}");
        assert!(dump.contains("x_4: T(d) = 10\n"), "{dump}");
    }

    #[test]
    fn restriction_drops_isolated_node() {
        let src = SSSP.replace("{a,b,c,d}", "{a,b,c,d,z}");
        let (p, db) = setup(&src, ROUTES);
        let g = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
        let (r, note) = g.active_domain_restrict(false).unwrap();
        assert!(note.is_some());
        assert_eq!(r.len(), 4);
        assert_eq!(r.dropped.len(), 1);
        assert_eq!(r.dropped[0].to_string(), "L(z)");
    }

    #[test]
    fn restriction_refused_for_three() {
        let src = "domain n = {a,b}.\nedb E(n,n): bool.\nidb Win(n): three.\n\
                   Win(x) :- sum(y){ not(Win(y)) | E(x,y) }.";
        let (p, db) = setup(src, &[("E", &["a", "b"], "true")]);
        let g = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
        let (r, note) = g.active_domain_restrict(false).unwrap();
        assert!(note.unwrap().contains("refused"));
        assert_eq!(r.len(), g.len());
        assert!(g.dump().contains("cast[not](x_2)"));
    }

    #[test]
    fn restriction_without_edb_keeps_constants_only() {
        let (p, db) = setup(SSSP, &[]);
        let g = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
        let (r, _) = g.active_domain_restrict(false).unwrap();
        assert_eq!(r.vars.iter().map(|v| v.to_string()).collect::<Vec<_>>(), vec!["L(a)"]);
    }

    #[test]
    fn missing_branch_and_budget() {
        let src = "domain idx = 0..3.\nedb V(idx): nat.\nedb F(idx): bool.\nidb W(idx): nat.\n\
                   W(i) :- case i = 0 : V(0) ; F(i) : V(i) + W(i-1).";
        let (p, db) = setup(src, &[("V", &["0"], "1"), ("F", &["1"], "true")]);
        let err = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap_err();
        assert!(matches!(err, GroundError::MissingBranch { ref head } if head == "W(2)"), "{err}");
        let (p, db) = setup(SSSP, ROUTES);
        let err = Grounder::new(&p, &db).with_budget(3).ground(&p.strata[0]).unwrap_err();
        assert!(matches!(err, GroundError::Budget { limit: 3 }));
    }

    #[test]
    fn shifts_clamp_at_the_range_edge() {
        let src = "domain idx = 0..3.\nedb V(idx): nat.\nidb W(idx): nat.\nW(i) :- V(i+1).";
        let (p, db) = setup(src, &[("V", &["3"], "7")]);
        let g = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
        assert_eq!(g.dump(), "x_1: W(0) = (empty)\nx_2: W(1) = (empty)\nx_3: W(2) = 7\nx_4: W(3) = 7\n");
    }
}
