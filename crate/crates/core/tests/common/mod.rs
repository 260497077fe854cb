#![allow(dead_code)]

use std::path::PathBuf;

use datalogo::ast::{check, CheckedProgram};
use datalogo::engine::database_builder;
use datalogo::ground::{GroundedSystem, Grounder};
use datalogo::oracle::Graph;
use datalogo::parser::parse;
use datalogo::pops::Value;
use datalogo::store::Database;
use rand::Rng;

pub type Fact = (String, Vec<String>, String);

pub fn programs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("programs")
}

pub fn checked(src: &str) -> CheckedProgram {
    check(&parse(src).unwrap_or_else(|e| panic!("{e}\n{src}"))).unwrap_or_else(|d| panic!("{d:?}\n{src}"))
}

pub fn load(src: &str, facts: &[Fact]) -> (CheckedProgram, Database) {
    let program = checked(src);
    let mut b = database_builder(&program);
    for (rel, keys, v) in facts {
        let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
        b.add_fact(rel, &keys, v).unwrap();
    }
    (program, b.build().unwrap().0)
}

pub fn load_dir(file: &str, dir: &str) -> (CheckedProgram, Database) {
    let root = programs_dir();
    let program = checked(&std::fs::read_to_string(root.join(file)).unwrap());
    let mut b = database_builder(&program);
    b.load_dir(&root.join(dir)).unwrap();
    (program, b.build().unwrap().0)
}

pub fn ground_first(src: &str, facts: &[Fact]) -> GroundedSystem {
    let (p, db) = load(src, facts);
    Grounder::new(&p, &db).ground(&p.strata[0]).unwrap()
}

pub fn routes() -> Graph {
    Graph::new(4, vec![(0, 1, 1), (1, 0, 2), (0, 2, 5), (1, 2, 3), (2, 3, 4)])
}

pub fn node(i: usize) -> String {
    format!("n{i}")
}

pub fn node_domain(n: usize) -> String {
    let names: Vec<String> = (0..n).map(node).collect();
    format!("domain node = {{{}}}.\n", names.join(", "))
}

/// Random simple digraph: each ordered pair (self-loops included) with probability `density`.
pub fn random_graph(rng: &mut impl Rng, n: usize, max_weight: i64, density: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.gen_bool(density) {
                edges.push((i, j, rng.gen_range(0..=max_weight)));
            }
        }
    }
    Graph::new(n, edges)
}

pub fn edge_facts(g: &Graph, rel: &str, value: impl Fn(i64) -> String) -> Vec<Fact> {
    g.edges.iter().map(|&(i, j, w)| (rel.to_string(), vec![node(i), node(j)], value(w))).collect()
}

/// Values of a unary relation in node order, read off the grounded variables.
pub fn by_node(system: &GroundedSystem, values: &[Value], n: usize) -> Vec<Value> {
    let mut out = vec![None; n];
    for (var, v) in system.vars.iter().zip(values) {
        let idx: usize = var.key[0].to_string()[1..].parse().unwrap();
        out[idx] = Some(v.clone());
    }
    out.into_iter().map(|v| v.expect("every node grounded")).collect()
}

pub fn single_source(pops: &str, n: usize) -> String {
    format!(
        "{}edb E(node, node): {pops}.\nidb L(node): {pops}.\nL(x) :- [x = n0] + sum(z){{ L(z) * E(z, x) }}.",
        node_domain(n)
    )
}
