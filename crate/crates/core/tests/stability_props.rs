//! Empirical stability indices stay within their theoretical bounds, and no
//! run converges later than the cap computed for it.

mod common;

use common::*;
use datalogo::analysis::{poly_stability_index, random_poly, simple_linear_iterate, UniPoly};
use datalogo::engine::{compute_cap, naive_eval, EvalOptions, IterationCap};
use datalogo::linear::{matrix_stability_index, SemiringMatrix};
use datalogo::pops::{Pops, PopsId, Value};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Instances with a known stability parameter.
fn stable_instances() -> Vec<Pops> {
    [PopsId::Bool, PopsId::TropPlus, PopsId::TropP(1), PopsId::TropP(2), PopsId::TropP(3)]
        .into_iter()
        .map(Pops::new)
        .collect()
}

#[test]
fn random_polynomials_respect_their_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9017);
    let mut checked = 0;
    for pops in stable_instances() {
        let p = pops.known_stability_p.expect("stable instance");
        for _ in 0..150 {
            let f = random_poly(&pops, 4, &mut rng);
            let index = poly_stability_index(&pops, &f, 64).unwrap().expect("converges within 64");
            let bound = match (p, f.degree()) {
                (0, _) => 1,
                (_, 0 | 1) => p + 1,
                _ => p + 2,
            };
            assert!(index <= bound, "{pops}: {f:?} has index {index} > {bound}");
            checked += 1;
        }
    }
    assert!(checked >= 500);
}

#[test]
fn closed_form_linear_iterate_matches_repetition() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1111);
    for pops in stable_instances().into_iter().chain([Pops::new(PopsId::LiftedReal), Pops::new(PopsId::Nat)]) {
        for _ in 0..20 {
            let a = datalogo::analysis::sample_value(&pops, &mut rng);
            let b = datalogo::analysis::sample_value(&pops, &mut rng);
            let f = UniPoly::linear(a.clone(), b.clone());
            let mut x = pops.bottom();
            for q in 0..=20 {
                assert_eq!(simple_linear_iterate(&pops, &a, &b, q).unwrap(), x, "{pops} a={a} b={b} q={q}");
                x = f.eval(&pops, &x).unwrap();
            }
        }
    }
}

#[test]
fn element_stability_bounds_affine_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ab);
    for pops in stable_instances() {
        for _ in 0..100 {
            let a = datalogo::analysis::sample_value(&pops, &mut rng);
            let p = pops.element_stability_index(&a, 64).unwrap().expect("stable element");
            let f = UniPoly::linear(a.clone(), pops.one());
            let index = poly_stability_index(&pops, &f, 64).unwrap().unwrap();
            assert!(index <= p + 1, "{pops}: a={a} p={p} index={index}");
        }
    }
}

fn random_program(rng: &mut impl Rng) -> (String, Vec<Fact>) {
    let n = rng.gen_range(1..=4);
    let density = rng.gen_range(0.2..0.7);
    let g = random_graph(rng, n, 6, density);
    let dom = node_domain(n);
    match rng.gen_range(0..5) {
        0 | 1 => {
            let pops = ["bool", "tropplus", "trop_p(1)", "capped_max(3)"][rng.gen_range(0..4)];
            let w = move |w: i64| match pops {
                "bool" => "true".to_string(),
                "capped_max(3)" => (w % 4).to_string(),
                _ => w.to_string(),
            };
            let src = format!(
                "{dom}edb E(node, node): {pops}.\nidb T(node, node): {pops}.\n\
                 T(x, y) :- E(x, y) + sum(z){{ T(x, z) * T(z, y) }}."
            );
            (src, edge_facts(&g, "E", w))
        }
        2 => {
            let pops = ["trop_p(1)", "trop_p(2)"][rng.gen_range(0..2)];
            (single_source(pops, n), edge_facts(&g, "E", |w| w.to_string()))
        }
        3 => {
            let src = format!(
                "{dom}edb Sub(node, node): bool.\nedb C(node): real_bot.\nidb T(node): real_bot.\n\
                 T(x) :- C(x) + sum(y){{ T(y) | Sub(x, y) }}."
            );
            let mut facts = edge_facts(&g, "Sub", |_| "true".into());
            facts.extend((0..n).map(|i| ("C".to_string(), vec![node(i)], (i + 1).to_string())));
            (src, facts)
        }
        _ => {
            let src = format!(
                "{dom}edb Move(node, node): bool.\nidb Win(node): three.\n\
                 Win(x) :- sum(y){{ not(Win(y)) | Move(x, y) }}."
            );
            (src, edge_facts(&g, "Move", |_| "true".into()))
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn converged_runs_stay_within_computed_cap(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, facts) = random_program(&mut rng);
        let system = ground_first(&src, &facts);
        let cap = compute_cap(&system, system.is_linear(), None);
        let run = naive_eval(&system, IterationCap::unbounded(), &EvalOptions::default()).unwrap();
        prop_assert!(run.converged(), "{src}");
        if let Some(limit) = cap.limit {
            prop_assert!(run.fixpoint_at().unwrap() <= limit, "{src}\ncap {cap}, fixpoint at {:?}", run.fixpoint_at());
        }
        let capped = naive_eval(&system, cap, &EvalOptions::default()).unwrap();
        prop_assert!(capped.converged());
        prop_assert_eq!(capped.assignment, run.assignment);
    }

    #[test]
    fn user_cap_is_never_exceeded(seed in any::<u64>(), user in 0u64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, facts) = random_program(&mut rng);
        let system = ground_first(&src, &facts);
        let cap = compute_cap(&system, system.is_linear(), Some(user));
        prop_assert!(cap.limit.unwrap() <= user);
        let run = naive_eval(&system, cap, &EvalOptions::default()).unwrap();
        prop_assert!(run.iterations <= cap.limit.unwrap() + 1);
    }
}

#[test]
fn constant_polynomial_is_one_stable() {
    let pops = Pops::new(PopsId::TropP(2));
    let f = UniPoly::constant(Value::bag(&[Some(1), Some(2), Some(2)]));
    assert_eq!(poly_stability_index(&pops, &f, 8).unwrap(), Some(1));
}

fn unit_cycle(pops: &Pops, n: usize) -> SemiringMatrix {
    let mut m = SemiringMatrix::zeros(pops, n);
    for i in 0..n {
        m.set(i, (i + 1) % n, pops.one());
    }
    m
}

#[test]
fn unit_cycle_index_is_p_plus_one_times_n_minus_one() {
    for p in 0..=3u32 {
        let pops = Pops::new(PopsId::TropP(p));
        for n in 2..=6usize {
            let index = matrix_stability_index(&unit_cycle(&pops, n), 400).unwrap();
            assert_eq!(index, Some((p + 1) * n as u32 - 1), "N={n} p={p}");
        }
    }
}

#[test]
fn random_bag_matrices_within_cycle_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a7);
    for _ in 0..200 {
        let p = rng.gen_range(0..=3u32);
        let n = rng.gen_range(2..=6usize);
        let pops = Pops::new(PopsId::TropP(p));
        let mut m = SemiringMatrix::zeros(&pops, n);
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(0.4) {
                    m.set(i, j, pops.parse_value(&rng.gen_range(0..10).to_string()).unwrap());
                }
            }
        }
        let index = matrix_stability_index(&m, 400).unwrap().expect("stable within 400");
        assert!(index < (p + 1) * n as u32, "N={n} p={p} index={index}");
    }
}
