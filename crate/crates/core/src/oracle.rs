//! Brute-force reference implementations for cross-checking the engine.
//!
//! Nothing here calls into the evaluators; the fixpoint iterator re-derives
//! polynomial evaluation from the POPS operations alone.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

use crate::ast::Wrap;
use crate::ground::GroundedSystem;
use crate::pops::{Pops, PopsError, Tri, Value};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("edge {from}->{to} has negative weight {weight}")]
    NegativeWeight { from: usize, to: usize, weight: i64 },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Pops(#[from] PopsError),
}

/// Directed graph over nodes `0..n` with integer weights.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize, i64)>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize, i64)>) -> Self {
        Graph { n, edges }
    }

    fn adjacency(&self) -> Result<Vec<Vec<(usize, u64)>>, OracleError> {
        let mut adj = vec![Vec::new(); self.n];
        for &(from, to, weight) in &self.edges {
            if weight < 0 {
                return Err(OracleError::NegativeWeight { from, to, weight });
            }
            adj[from].push((to, weight as u64));
        }
        Ok(adj)
    }
}

/// Shortest distances from `src`; `None` is unreachable.
pub fn dijkstra(g: &Graph, src: usize) -> Result<Vec<Option<u64>>, OracleError> {
    let adj = g.adjacency()?;
    let mut dist: Vec<Option<u64>> = vec![None; g.n];
    let mut heap = BinaryHeap::new();
    dist[src] = Some(0);
    heap.push(Reverse((0u64, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u].is_some_and(|best| d > best) {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if dist[v].is_none_or(|old| nd < old) {
                dist[v] = Some(nd);
                heap.push(Reverse((nd, v)));
            }
        }
    }
    Ok(dist)
}

/// Costs of the `k` cheapest walks from `src` to each node, ascending, padded with `None`.
pub fn k_lowest_walks(g: &Graph, src: usize, k: usize) -> Result<Vec<Vec<Option<u64>>>, OracleError> {
    if k == 0 {
        return Err(OracleError::ZeroK);
    }
    let adj = g.adjacency()?;
    let mut found: Vec<Vec<Option<u64>>> = vec![Vec::new(); g.n];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if found[u].len() >= k {
            continue;
        }
        found[u].push(Some(d));
        for &(v, w) in &adj[u] {
            if found[v].len() < k {
                heap.push(Reverse((d + w, v)));
            }
        }
    }
    for f in &mut found {
        f.resize(k, None);
    }
    Ok(found)
}

/// Nodes reachable from `src` by walks of length ≥ 0.
pub fn reach(g: &Graph, src: usize) -> Vec<bool> {
    let mut adj = vec![Vec::new(); g.n];
    for &(from, to, _) in &g.edges {
        adj[from].push(to);
    }
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([src]);
    seen[src] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteSolution {
    pub assignment: Vec<Value>,
    /// Every iterate `R_0, R_1, …` up to the last one computed.
    pub iterates: Vec<Vec<Value>>,
    pub converged: bool,
}

fn wrapped(wrap: &Wrap, from: &Pops, to: &Pops, v: &Value) -> Result<Value, PopsError> {
    match (wrap, v) {
        (Wrap::Plain, _) => Ok(v.clone()),
        (Wrap::Cast, Value::Bit(true)) => Ok(to.one()),
        (Wrap::Cast, Value::Bit(false)) => Ok(to.bottom()),
        (Wrap::Cast, other) => Err(PopsError::CarrierMismatch { pops: from.to_string(), value: other.to_string() }),
        (Wrap::Apply(f), _) => f.apply(from, to, v),
    }
}

/// Plain Kleene iteration from ⊥, stopping at `R_t = R_{t-1}` or after `cap + 1` steps.
pub fn brute_fixpoint(system: &GroundedSystem, cap: u64) -> Result<BruteSolution, OracleError> {
    let mut current: Vec<Value> = system.vars.iter().map(|v| v.pops.bottom()).collect();
    let mut iterates = vec![current.clone()];
    for _ in 0..=cap {
        let mut next = Vec::with_capacity(current.len());
        for (k, poly) in system.polys.iter().enumerate() {
            let pops = &system.vars[k].pops;
            let mut sum = pops.zero();
            for (i, m) in poly.iter().enumerate() {
                let mut prod = m.coeff.clone();
                for f in &m.factors {
                    let v = wrapped(&f.wrap, &system.vars[f.var].pops, pops, &current[f.var])?;
                    for _ in 0..f.power {
                        prod = pops.times(&prod, &v)?;
                    }
                }
                sum = if i == 0 { prod } else { pops.plus(&sum, &prod)? };
            }
            next.push(sum);
        }
        iterates.push(next.clone());
        if next == current {
            return Ok(BruteSolution { assignment: next, iterates, converged: true });
        }
        current = next;
    }
    Ok(BruteSolution { assignment: current, iterates, converged: false })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WellFounded {
    /// `I_0, I_1, …` until both alternating subsequences repeat.
    pub iterates: Vec<Vec<bool>>,
    pub model: Vec<Tri>,
}

/// Alternating fixpoint for `Win(x) :- move(x,y), not Win(y)`.
pub fn well_founded_winmove(n: usize, moves: &[(usize, usize)]) -> WellFounded {
    let step = |prev: &[bool]| -> Vec<bool> {
        let mut next = vec![false; n];
        for &(x, y) in moves {
            if !prev[y] {
                next[x] = true;
            }
        }
        next
    };
    let mut iterates = vec![vec![false; n]];
    loop {
        let next = step(iterates.last().expect("non-empty"));
        iterates.push(next);
        let len = iterates.len();
        if len >= 4 && iterates[len - 1] == iterates[len - 3] && iterates[len - 2] == iterates[len - 4] {
            break;
        }
    }
    let len = iterates.len();
    let (a, b) = (&iterates[len - 1], &iterates[len - 2]);
    // The even-indexed limit under-approximates winners; the odd one over-approximates.
    let (under, over) = if (len - 1) % 2 == 0 { (a, b) } else { (b, a) };
    let model = (0..n)
        .map(|x| match (under[x], over[x]) {
            (true, _) => Tri::True,
            (false, false) => Tri::False,
            (false, true) => Tri::Unknown,
        })
        .collect();
    WellFounded { iterates, model }
}
