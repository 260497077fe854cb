//! Naive, semi-naive, elimination and the brute iterator must agree exactly.

mod common;

use common::*;
use datalogo::engine::{compute_cap, naive_eval, seminaive_eval, seminaive_ineligibility, EvalOptions};
use datalogo::ground::GroundedSystem;
use datalogo::linear::{eligibility, linear_lfp};
use datalogo::oracle::brute_fixpoint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POPS: [&str; 4] = ["bool", "tropplus", "trop_p(1)", "trop_p(2)"];

fn weight(pops: &str, w: i64) -> String {
    if pops == "bool" {
        "true".into()
    } else {
        w.to_string()
    }
}

/// `L(x) :- S(x) + Σ_z L(z)·E(z,x)` with random sources and edges.
fn random_sources_system(rng: &mut impl Rng, pops: &str) -> GroundedSystem {
    let n = rng.gen_range(1..=12);
    let density = rng.gen_range(0.05..0.5);
    let g = random_graph(rng, n, 9, density);
    let mut facts = edge_facts(&g, "E", |w| weight(pops, w));
    for i in 0..n {
        if rng.gen_bool(0.3) {
            let w = rng.gen_range(0..5);
            facts.push(("S".into(), vec![node(i)], weight(pops, w)));
        }
    }
    let src = format!(
        "{}edb E(node, node): {pops}.\nedb S(node): {pops}.\nidb L(node): {pops}.\n\
         L(x) :- S(x) + sum(z){{ L(z) * E(z, x) }}.",
        node_domain(n)
    );
    ground_first(&src, &facts)
}

/// Right-linear closure on at most three nodes, so at most nine ground atoms.
fn random_closure_system(rng: &mut impl Rng, pops: &str) -> GroundedSystem {
    let n = rng.gen_range(1..=3);
    let density = rng.gen_range(0.2..0.8);
    let g = random_graph(rng, n, 9, density);
    let src = format!(
        "{}edb E(node, node): {pops}.\nidb P(node, node): {pops}.\n\
         P(x, y) :- E(x, y) + sum(z){{ P(x, z) * E(z, y) }}.",
        node_domain(n)
    );
    ground_first(&src, &edge_facts(&g, "E", |w| weight(pops, w)))
}

fn assert_all_agree(system: &GroundedSystem) -> bool {
    assert!(system.is_linear());
    let cap = compute_cap(system, true, None);
    let opts = EvalOptions::default();
    let naive = naive_eval(system, cap, &opts).unwrap();
    assert!(naive.converged(), "{}", system.dump());

    let brute = brute_fixpoint(system, cap.limit.unwrap()).unwrap();
    assert!(brute.converged);
    assert_eq!(naive.assignment, brute.assignment, "{}", system.dump());

    let p = eligibility(system, None).unwrap();
    let closed = linear_lfp(system, p).unwrap();
    assert_eq!(naive.assignment, closed.assignment, "{}", system.dump());

    let semi_eligible = seminaive_ineligibility(system).is_none();
    if semi_eligible {
        let semi = seminaive_eval(system, cap, &opts).unwrap();
        assert_eq!(naive.assignment, semi.assignment, "{}", system.dump());
        assert_eq!(naive.iterations, semi.iterations);
    }
    semi_eligible
}

#[test]
fn random_linear_systems_agree_across_engines() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc405);
    let (mut systems, mut with_semi) = (0, 0);
    for round in 0..40 {
        for pops in POPS {
            let system = if round % 2 == 0 {
                random_sources_system(&mut rng, pops)
            } else {
                random_closure_system(&mut rng, pops)
            };
            assert!(system.len() <= 12);
            systems += 1;
            with_semi += usize::from(assert_all_agree(&system));
        }
    }
    assert!(systems >= 100);
    assert!(with_semi >= 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn differential_matches_naive_on_quadratic_closure(
        n in 1usize..5,
        edges in proptest::collection::vec((0usize..5, 0usize..5, 0i64..7), 0..12),
        tropical in any::<bool>(),
    ) {
        let pops = if tropical { "tropplus" } else { "bool" };
        let facts: Vec<Fact> = edges
            .iter()
            .filter(|(i, j, _)| *i < n && *j < n)
            .map(|&(i, j, w)| ("E".to_string(), vec![node(i), node(j)], weight(pops, w)))
            .collect();
        let src = format!(
            "{}edb E(node, node): {pops}.\nidb T(node, node): {pops}.\n\
             T(x, y) :- E(x, y) + sum(z){{ T(x, z) * T(z, y) }}.",
            node_domain(n)
        );
        let system = ground_first(&src, &facts);
        let cap = compute_cap(&system, false, None);
        let naive = naive_eval(&system, cap, &EvalOptions::default()).unwrap();
        let semi = seminaive_eval(&system, cap, &EvalOptions::default()).unwrap();
        prop_assert!(naive.converged());
        prop_assert_eq!(&naive.assignment, &semi.assignment);
        prop_assert_eq!(naive.iterations, semi.iterations);
    }

    #[test]
    fn parallel_operator_matches_sequential(seed in any::<u64>(), threads in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = random_sources_system(&mut rng, "tropplus");
        let a = system.bottom();
        let once = system.ico_apply(&a).unwrap();
        prop_assert_eq!(system.ico_apply_parallel(&a, threads).unwrap(), once.clone());
        prop_assert_eq!(system.ico_apply_parallel(&once, threads).unwrap(), system.ico_apply(&once).unwrap());
    }
}
