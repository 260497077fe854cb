//! Naive and semi-naive fixpoint evaluation, iteration caps, and stratified runs.

use std::collections::VecDeque;
use std::fmt;

use log::{debug, info};
use thiserror::Error;

use crate::ast::{CheckedProgram, Stratum};
use crate::ground::{GroundError, GroundedSystem, Grounder, IcoError, DEFAULT_MONOMIAL_BUDGET};
use crate::linear::{self, LinearError};
use crate::pops::{PopsError, PopsId, Value};
use crate::store::{Combine, Database, DatabaseBuilder, StoreError};

/// Safety stop for runs whose cap is unbounded.
pub const UNBOUNDED_FALLBACK: u64 = 100_000;

/// Ring-buffer length for summary traces.
const SUMMARY_TRACE: usize = 16;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("iteration {iteration}: {source}")]
    Ico { iteration: u64, source: IcoError },
    #[error("iteration {iteration}: {var} decreased in the partial order")]
    NotMonotone { iteration: u64, var: String },
    #[error("{engine} is not applicable: {reason}")]
    Unsupported { engine: &'static str, reason: String },
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Pops(#[from] PopsError),
}

impl EngineError {
    /// Budget and arithmetic overflow are internal limits rather than user errors.
    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            EngineError::Ground(GroundError::Budget { .. })
                | EngineError::Ico { source: IcoError { source: PopsError::Overflow, .. }, .. }
                | EngineError::Pops(PopsError::Overflow)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapSource {
    /// 0-stable POPS: at most N steps.
    ZeroStable,
    /// Linear system over bags of the p+1 smallest costs.
    LinearBags {
        p: u32,
    },
    /// p-stable POPS, linear system.
    LinearStable {
        p: u32,
    },
    /// p-stable POPS, arbitrary polynomials.
    PolyStable {
        p: u32,
    },
    /// Every strictly increasing chain has at most k steps.
    Rank {
        k: u64,
    },
    User,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterationCap {
    /// `None` is unbounded.
    pub limit: Option<u64>,
    pub source: CapSource,
}

impl IterationCap {
    pub fn unbounded() -> Self {
        IterationCap { limit: None, source: CapSource::None }
    }

    pub fn finite(limit: u64) -> Self {
        IterationCap { limit: Some(limit), source: CapSource::User }
    }

    /// Number of applications allowed before giving up: the cap plus the one
    /// extra application that detects the fixpoint.
    fn applications(&self) -> u64 {
        self.limit.unwrap_or(UNBOUNDED_FALLBACK).saturating_add(1)
    }
}

impl fmt::Display for IterationCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.limit {
            Some(n) => write!(f, "{n}")?,
            None => f.write_str("unbounded")?,
        }
        match self.source {
            CapSource::ZeroStable => f.write_str(" (0-stable: N)"),
            CapSource::LinearBags { p } => write!(f, " (linear, bags of {}: (p+1)N)", p + 1),
            CapSource::LinearStable { p } => write!(f, " ({p}-stable linear)"),
            CapSource::PolyStable { p } => write!(f, " ({p}-stable)"),
            CapSource::Rank { k } => write!(f, " (rank {k}: kN)"),
            CapSource::User => f.write_str(" (user)"),
            CapSource::None => Ok(()),
        }
    }
}

/// `Σ_{i=1}^n base^i`, or `None` past 64 bits.
pub fn geometric_bound(base: u64, n: u64) -> Option<u64> {
    let mut total: u64 = 0;
    let mut term: u64 = 1;
    for _ in 0..n {
        term = term.checked_mul(base)?;
        total = total.checked_add(term)?;
    }
    Some(total)
}

/// Smallest applicable theoretical bound on the steps to a fixpoint.
pub fn compute_cap(system: &GroundedSystem, linear: bool, user_cap: Option<u64>) -> IterationCap {
    let n = system.len() as u64;
    let mut best = IterationCap::unbounded();
    let mut offer = |limit: Option<u64>, source: CapSource| {
        if let Some(l) = limit {
            if best.limit.is_none_or(|b| l < b) {
                best = IterationCap { limit: Some(l), source };
            }
        }
    };
    let plain = !system.has_wraps();
    if let (Some(pops), true) = (system.single_pops(), plain) {
        if let Some(p) = pops.known_stability_p {
            if p == 0 {
                offer(Some(n), CapSource::ZeroStable);
            }
            if linear {
                if let PopsId::TropP(bp) = pops.id() {
                    let bound = u64::from(*bp + 1).checked_mul(n);
                    offer(bound, CapSource::LinearBags { p: *bp });
                }
                offer(geometric_bound(u64::from(p) + 1, n), CapSource::LinearStable { p });
            } else {
                offer(geometric_bound(u64::from(p) + 2, n), CapSource::PolyStable { p });
            }
        }
    }
    let ranks: Option<Vec<u64>> = system.vars.iter().map(|v| v.pops.rank).collect();
    if let Some(k) = ranks.and_then(|r| r.into_iter().max()) {
        offer(k.checked_mul(n), CapSource::Rank { k });
    }
    if system.is_empty() {
        offer(Some(0), CapSource::ZeroStable);
    }
    if let Some(u) = user_cap {
        if best.limit.is_none_or(|b| u < b) {
            best = IterationCap { limit: Some(u), source: CapSource::User };
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceMode {
    #[default]
    Off,
    /// Keeps the last few iterations.
    Summary,
    Full,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub trace: TraceMode,
    pub threads: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    CapExceeded,
}

/// One recorded iteration: the variables whose value changed.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub t: u64,
    pub changes: Vec<(usize, Value)>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub assignment: Vec<Value>,
    /// Operator applications performed; on convergence `R_t = R_{t-1}` at this `t`.
    pub iterations: u64,
    pub status: Status,
    pub trace: Vec<TraceStep>,
    /// Non-⊥ delta entries per iteration (semi-naive only).
    pub delta_sizes: Vec<usize>,
    /// The assignment before the last one, kept for divergence reports.
    pub previous: Option<Vec<Value>>,
    /// Semiring operations, reported by the linear solver.
    pub ops: u64,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Index of the first iterate equal to the limit.
    pub fn fixpoint_at(&self) -> Option<u64> {
        self.converged().then(|| self.iterations.saturating_sub(1))
    }

    /// `t=3 L(c)=4 L(d)=9` lines.
    pub fn format_trace(&self, system: &GroundedSystem) -> String {
        let mut out = String::new();
        for step in &self.trace {
            out.push_str(&format!("t={}", step.t));
            for (k, v) in &step.changes {
                out.push_str(&format!(" {}={}", system.vars[*k], v));
            }
            out.push('\n');
        }
        out
    }

    /// Variables that still changed in the last step.
    pub fn divergence_diff(&self, system: &GroundedSystem) -> Vec<String> {
        let Some(prev) = &self.previous else {
            return Vec::new();
        };
        prev.iter()
            .zip(&self.assignment)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(k, (a, b))| format!("{}: {a} -> {b}", system.vars[k]))
            .collect()
    }
}

struct Recorder {
    mode: TraceMode,
    steps: VecDeque<TraceStep>,
}

impl Recorder {
    fn new(mode: TraceMode) -> Self {
        Recorder { mode, steps: VecDeque::new() }
    }

    fn record(&mut self, t: u64, prev: &[Value], next: &[Value]) {
        if self.mode == TraceMode::Off {
            return;
        }
        let changes =
            prev.iter().zip(next).enumerate().filter(|(_, (a, b))| a != b).map(|(k, (_, b))| (k, b.clone())).collect();
        self.steps.push_back(TraceStep { t, changes });
        if self.mode == TraceMode::Summary && self.steps.len() > SUMMARY_TRACE {
            self.steps.pop_front();
        }
    }

    fn finish(self) -> Vec<TraceStep> {
        self.steps.into()
    }
}

fn check_increasing(system: &GroundedSystem, t: u64, prev: &[Value], next: &[Value]) -> Result<(), EngineError> {
    for (k, (a, b)) in prev.iter().zip(next).enumerate() {
        if a != b && !system.vars[k].pops.leq(a, b)? {
            return Err(EngineError::NotMonotone { iteration: t, var: system.vars[k].to_string() });
        }
    }
    Ok(())
}

/// Iterates the operator from the all-⊥ assignment.
pub fn naive_eval(system: &GroundedSystem, cap: IterationCap, opts: &EvalOptions) -> Result<Solution, EngineError> {
    let mut prev = system.bottom();
    let mut rec = Recorder::new(opts.trace);
    let allowed = cap.applications();
    let mut t = 0u64;
    loop {
        t += 1;
        let next = system
            .ico_apply_parallel(&prev, opts.threads)
            .map_err(|source| EngineError::Ico { iteration: t, source })?;
        check_increasing(system, t, &prev, &next)?;
        rec.record(t, &prev, &next);
        if next == prev {
            debug!("naive evaluation converged at t={t}");
            return Ok(Solution {
                assignment: next,
                iterations: t,
                status: Status::Converged,
                trace: rec.finish(),
                delta_sizes: Vec::new(),
                previous: None,
                ops: 0,
            });
        }
        if t >= allowed {
            return Ok(Solution {
                assignment: next,
                iterations: t,
                status: Status::CapExceeded,
                trace: rec.finish(),
                delta_sizes: Vec::new(),
                previous: Some(prev),
                ops: 0,
            });
        }
        prev = next;
    }
}

/// Why a system cannot use the differential evaluator, if it cannot.
pub fn seminaive_ineligibility(system: &GroundedSystem) -> Option<String> {
    if let Some(v) = system.vars.iter().find(|v| !v.pops.has_minus) {
        return Some(format!("{} has no difference operator", v.pops));
    }
    if system.has_wraps() {
        return Some("the system applies casts or functions to recursive atoms".into());
    }
    None
}

/// Differential evaluation over distributive dioids.
///
/// Each monomial is expanded into its factor occurrences; the change of a
/// monomial between `R_{t-2}` and `R_{t-1}` is the sum over occurrences `j` of
/// old values before `j`, the delta at `j`, and new values after `j`.
pub fn seminaive_eval(system: &GroundedSystem, cap: IterationCap, opts: &EvalOptions) -> Result<Solution, EngineError> {
    if let Some(reason) = seminaive_ineligibility(system) {
        return Err(EngineError::Unsupported { engine: "semi-naive evaluation", reason });
    }
    let n = system.len();
    let occurrences: Vec<Vec<(Value, Vec<usize>)>> = system
        .polys
        .iter()
        .map(|poly| {
            poly.iter()
                .filter(|m| !m.factors.is_empty())
                .map(|m| {
                    let occ = m.factors.iter().flat_map(|f| std::iter::repeat_n(f.var, f.power as usize));
                    (m.coeff.clone(), occ.collect())
                })
                .collect()
        })
        .collect();
    let mut rec = Recorder::new(opts.trace);
    let allowed = cap.applications();
    let ico_err = |t| move |source| EngineError::Ico { iteration: t, source };

    let mut old = system.bottom();
    let mut current = system.ico_apply(&old).map_err(ico_err(1))?;
    let mut delta: Vec<Value> = Vec::with_capacity(n);
    for k in 0..n {
        let pops = &system.vars[k].pops;
        delta.push(pops.minus(&current[k], &old[k]).map_err(|e| ico_err(1)(IcoError { var: k, source: e }))?);
    }
    let count = |d: &[Value]| d.iter().enumerate().filter(|(k, v)| !system.vars[*k].pops.is_bottom(v)).count();
    let mut delta_sizes = vec![count(&delta)];
    rec.record(1, &old, &current);
    let mut t = 1u64;
    loop {
        if delta_sizes.last() == Some(&0) {
            return Ok(Solution {
                assignment: current,
                iterations: t,
                status: Status::Converged,
                trace: rec.finish(),
                delta_sizes,
                previous: None,
                ops: 0,
            });
        }
        if t >= allowed {
            return Ok(Solution {
                assignment: current,
                iterations: t,
                status: Status::CapExceeded,
                trace: rec.finish(),
                delta_sizes,
                previous: Some(old),
                ops: 0,
            });
        }
        t += 1;
        let mut next_delta = Vec::with_capacity(n);
        for k in 0..n {
            let pops = &system.vars[k].pops;
            let wrap = |source| EngineError::Ico { iteration: t, source: IcoError { var: k, source } };
            let mut change = pops.zero();
            for (coeff, occ) in &occurrences[k] {
                for j in 0..occ.len() {
                    if pops.is_bottom(&delta[occ[j]]) {
                        continue;
                    }
                    let mut term = coeff.clone();
                    for (i, &x) in occ.iter().enumerate() {
                        let v = match i.cmp(&j) {
                            std::cmp::Ordering::Less => &old[x],
                            std::cmp::Ordering::Equal => &delta[x],
                            std::cmp::Ordering::Greater => &current[x],
                        };
                        term = pops.times(&term, v).map_err(wrap)?;
                    }
                    change = pops.plus(&change, &term).map_err(wrap)?;
                }
            }
            next_delta.push(pops.minus(&change, &current[k]).map_err(wrap)?);
        }
        let mut next = Vec::with_capacity(n);
        for k in 0..n {
            let pops = &system.vars[k].pops;
            next.push(pops.plus(&current[k], &next_delta[k])?);
        }
        check_increasing(system, t, &current, &next)?;
        rec.record(t, &current, &next);
        delta_sizes.push(count(&next_delta));
        old = std::mem::replace(&mut current, next);
        delta = next_delta;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EngineChoice {
    #[default]
    Auto,
    Naive,
    Seminaive,
    Linear,
}

impl fmt::Display for EngineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineChoice::Auto => "auto",
            EngineChoice::Naive => "naive",
            EngineChoice::Seminaive => "seminaive",
            EngineChoice::Linear => "linear",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub engine: EngineChoice,
    pub max_iters: Option<u64>,
    pub eval: EvalOptions,
    pub restrict: bool,
    pub budget: u64,
    /// Stability parameter for the linear solver when the POPS does not declare one.
    pub linear_p: Option<u32>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            engine: EngineChoice::Auto,
            max_iters: None,
            eval: EvalOptions::default(),
            restrict: false,
            budget: DEFAULT_MONOMIAL_BUDGET,
            linear_p: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StratumReport {
    pub index: usize,
    pub idbs: Vec<String>,
    pub engine: EngineChoice,
    pub cap: IterationCap,
    pub system: GroundedSystem,
    pub solution: Solution,
    pub notices: Vec<String>,
}

#[derive(Debug)]
pub struct RunResult {
    pub strata: Vec<StratumReport>,
    /// EDBs plus every IDB computed so far.
    pub database: Database,
}

impl RunResult {
    /// The stratum that hit its cap, if any; evaluation stops there.
    pub fn diverged(&self) -> Option<&StratumReport> {
        self.strata.iter().find(|s| !s.solution.converged())
    }
}

/// A builder preloaded with the program's schemas, declared domains and rule constants.
pub fn database_builder(program: &CheckedProgram) -> DatabaseBuilder {
    let mut b = DatabaseBuilder::new(program.schemas.clone(), program.declared_domains.clone());
    for (d, c) in &program.constants {
        b.note_constant(d, c.clone());
    }
    b
}

/// Auto-selection: elimination for linear single-POPS systems with a known
/// stability parameter, differential evaluation on dioids, otherwise naive.
pub fn choose_engine(system: &GroundedSystem, linear_p: Option<u32>) -> EngineChoice {
    if linear::eligibility(system, linear_p).is_ok() {
        EngineChoice::Linear
    } else if seminaive_ineligibility(system).is_none() {
        EngineChoice::Seminaive
    } else {
        EngineChoice::Naive
    }
}

/// Solves one grounded system with the requested engine.
pub fn solve(
    system: &GroundedSystem,
    engine: EngineChoice,
    opts: &RunOptions,
    linear_hint: bool,
) -> Result<(EngineChoice, IterationCap, Solution), EngineError> {
    let engine = match engine {
        EngineChoice::Auto => choose_engine(system, opts.linear_p),
        e => e,
    };
    let cap = compute_cap(system, linear_hint && system.is_linear(), opts.max_iters);
    let solution = match engine {
        EngineChoice::Naive | EngineChoice::Auto => naive_eval(system, cap, &opts.eval)?,
        EngineChoice::Seminaive => seminaive_eval(system, cap, &opts.eval)?,
        EngineChoice::Linear => {
            let p = linear::eligibility(system, opts.linear_p)
                .map_err(|e| EngineError::Unsupported { engine: "linear solver", reason: e.to_string() })?;
            linear::linear_lfp(system, p)?
        }
    };
    Ok((engine, cap, solution))
}

fn stratum_system(
    program: &CheckedProgram,
    db: &Database,
    stratum: &Stratum,
    opts: &RunOptions,
    notices: &mut Vec<String>,
) -> Result<GroundedSystem, EngineError> {
    let system = Grounder::new(program, db).with_budget(opts.budget).ground(stratum)?;
    if !opts.restrict {
        return Ok(system);
    }
    let explicit = stratum.rules.iter().any(|&r| program.rules[r].has_explicit_range);
    let (restricted, note) = system.active_domain_restrict(explicit)?;
    notices.extend(note);
    Ok(restricted)
}

/// Grounds one stratum against a database that already holds lower strata.
pub fn ground_stratum(
    program: &CheckedProgram,
    db: &Database,
    index: usize,
    opts: &RunOptions,
) -> Result<(GroundedSystem, Vec<String>), EngineError> {
    let mut notices = Vec::new();
    let sys = stratum_system(program, db, &program.strata[index], opts, &mut notices)?;
    Ok((sys, notices))
}

/// Copies a stratum's assignment into its IDB relations.
pub fn store_solution(
    db: &mut Database,
    program: &CheckedProgram,
    stratum: &Stratum,
    system: &GroundedSystem,
    values: &[Value],
) -> Result<(), EngineError> {
    for name in &stratum.idbs {
        let schema = program.schema(name).expect("stratum IDBs are declared");
        let mut rel = db.empty_relation(schema)?;
        for (var, v) in system.vars.iter().zip(values).filter(|(var, _)| var.rel == *name) {
            rel.put_combine(var.key.clone(), v.clone(), Combine::Replace)?;
        }
        db.insert_relation(rel);
    }
    Ok(())
}

/// Evaluates strata in order, freezing each as input to the next. Stops at
/// the first stratum that exceeds its cap.
pub fn run_program(program: &CheckedProgram, mut db: Database, opts: &RunOptions) -> Result<RunResult, EngineError> {
    let mut reports = Vec::new();
    for (index, stratum) in program.strata.iter().enumerate() {
        let mut notices = Vec::new();
        let system = stratum_system(program, &db, stratum, opts, &mut notices)?;
        let (engine, cap, solution) = solve(&system, opts.engine, opts, stratum.linear)?;
        info!(
            "stratum {index} ({}): {} vars, {} monomials, engine {engine}, cap {cap}",
            stratum.idbs.join(","),
            system.len(),
            system.monomial_count()
        );
        store_solution(&mut db, program, stratum, &system, &solution.assignment)?;
        let stop = !solution.converged();
        reports.push(StratumReport { index, idbs: stratum.idbs.clone(), engine, cap, system, solution, notices });
        if stop {
            break;
        }
    }
    Ok(RunResult { strata: reports, database: db })
}
