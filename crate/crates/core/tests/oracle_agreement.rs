//! Engine results against the brute-force graph oracles on random graphs.

mod common;

use common::*;
use datalogo::engine::{compute_cap, naive_eval, run_program, EvalOptions, RunOptions};
use datalogo::ground::Grounder;
use datalogo::oracle::{brute_fixpoint, dijkstra, k_lowest_walks, reach, well_founded_winmove};
use datalogo::pops::{Cost, Tri, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solve_first(src: &str, facts: &[Fact], n: usize) -> Vec<Value> {
    let (program, db) = load(src, facts);
    let result = run_program(&program, db, &RunOptions::default()).unwrap();
    let r = &result.strata[0];
    assert!(r.solution.converged(), "{src}");
    by_node(&r.system, &r.solution.assignment, n)
}

fn cost(c: Option<u64>) -> Value {
    c.map_or(Value::Cost(Cost::Inf), |c| Value::cost(c as i64))
}

#[test]
fn min_plus_program_matches_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5553);
    for _ in 0..50 {
        let n = rng.gen_range(1..=30);
        let density = rng.gen_range(0.05..0.3);
        let g = random_graph(&mut rng, n, 20, density);
        let got = solve_first(&single_source("tropplus", n), &edge_facts(&g, "E", |w| w.to_string()), n);
        let want: Vec<Value> = dijkstra(&g, 0).unwrap().into_iter().map(cost).collect();
        assert_eq!(got, want, "{g:?}");
    }
}

#[test]
fn boolean_program_matches_bfs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbf5);
    for _ in 0..50 {
        let n = rng.gen_range(1..=30);
        let density = rng.gen_range(0.02..0.2);
        let g = random_graph(&mut rng, n, 0, density);
        let got = solve_first(&single_source("bool", n), &edge_facts(&g, "E", |_| "true".into()), n);
        let want: Vec<Value> = reach(&g, 0).into_iter().map(Value::Bit).collect();
        assert_eq!(got, want, "{g:?}");
    }
}

#[test]
fn bag_program_matches_k_lowest_walks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xba95);
    for _ in 0..30 {
        let p = rng.gen_range(0..=3u32);
        let n = rng.gen_range(1..=10);
        let density = rng.gen_range(0.1..0.4);
        let g = random_graph(&mut rng, n, 20, density);
        let src = single_source(&format!("trop_p({p})"), n);
        let got = solve_first(&src, &edge_facts(&g, "E", |w| w.to_string()), n);
        let want: Vec<Value> = k_lowest_walks(&g, 0, p as usize + 1)
            .unwrap()
            .into_iter()
            .map(|walks| Value::bag(&walks.iter().map(|w| w.map(|c| c as i64)).collect::<Vec<_>>()))
            .collect();
        assert_eq!(got, want, "p={p} {g:?}");
    }
}

#[test]
fn three_valued_game_matches_alternating_fixpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a1);
    for _ in 0..30 {
        let n = rng.gen_range(1..=8);
        let density = rng.gen_range(0.1..0.4);
        let g = random_graph(&mut rng, n, 0, density);
        let src = format!(
            "{}edb Move(node, node): bool.\nidb Win(node): three.\nWin(x) :- sum(y){{ not(Win(y)) | Move(x, y) }}.",
            node_domain(n)
        );
        let got = solve_first(&src, &edge_facts(&g, "Move", |_| "true".into()), n);
        let moves: Vec<(usize, usize)> = g.edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let want: Vec<Value> = well_founded_winmove(n, &moves).model.into_iter().map(Value::Tri).collect();
        assert_eq!(got, want, "{moves:?}");
    }
}

#[test]
fn brute_iterator_agrees_with_naive_engine() {
    let facts = edge_facts(&routes(), "E", |w| w.to_string());
    let (p, db) = load(&single_source("tropplus", 4), &facts);
    let system = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
    let cap = compute_cap(&system, true, None);
    let engine = naive_eval(&system, cap, &EvalOptions::default()).unwrap();
    let brute = brute_fixpoint(&system, cap.limit.unwrap()).unwrap();
    assert!(brute.converged);
    assert_eq!(engine.assignment, brute.assignment);
    assert_eq!(engine.iterations as usize, brute.iterates.len() - 1);
}

#[test]
fn brute_iterator_second_game_row() {
    let (p, db) = load_dir("winmove.dl", "wm");
    let system = Grounder::new(&p, &db).ground(&p.strata[0]).unwrap();
    let brute = brute_fixpoint(&system, 20).unwrap();
    let u = Value::Tri(Tri::Unknown);
    assert_eq!(
        brute.iterates[2],
        vec![u.clone(), u.clone(), u.clone(), u, Value::Tri(Tri::True), Value::Tri(Tri::False)]
    );
}
