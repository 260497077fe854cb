//! Algebraic laws for every built-in instance, difference-operator laws on
//! dioids, and bag/set normalization identities.

use datalogo::analysis::{all_values, samples};
use datalogo::pops::tropical::{min_eta, min_p};
use datalogo::pops::{check_axioms, Cost, Pops, PopsId, Rational};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instances() -> Vec<PopsId> {
    vec![
        PopsId::Bool,
        PopsId::Nat,
        PopsId::NonNegRational,
        PopsId::LiftedReal,
        PopsId::LiftedNat,
        PopsId::Trop,
        PopsId::TropPlus,
        PopsId::TropP(0),
        PopsId::TropP(1),
        PopsId::TropP(3),
        PopsId::TropEta(Rational::new(13, 2)),
        PopsId::TropEta(Rational::from_integer(0)),
        PopsId::Three,
        PopsId::CappedMax(4),
        PopsId::Product(Box::new(PopsId::Bool), Box::new(PopsId::Three)),
        PopsId::Product(Box::new(PopsId::TropPlus), Box::new(PopsId::TropP(1))),
    ]
}

#[test]
fn every_instance_satisfies_its_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a55);
    for id in instances() {
        let pops = Pops::new(id);
        if let Some(all) = all_values(&pops) {
            let report = check_axioms(&pops, &all);
            assert!(report.passed(), "{pops}: {:?}", report.violations);
            continue;
        }
        // Independent batches until at least 1000 triples have been checked.
        let mut triples = 0;
        while triples < 1000 {
            let s = samples(&pops, 11, &mut rng);
            triples += s.len().pow(3);
            let report = check_axioms(&pops, &s);
            assert!(report.passed(), "{pops}: {:?}", report.violations);
        }
    }
}

#[test]
fn exhaustive_carriers_are_complete() {
    assert_eq!(all_values(&Pops::new(PopsId::Bool)).unwrap().len(), 2);
    assert_eq!(all_values(&Pops::new(PopsId::Three)).unwrap().len(), 3);
}

#[test]
fn difference_laws_on_dioids() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd10d);
    for id in [PopsId::Bool, PopsId::Trop, PopsId::TropPlus] {
        let pops = Pops::new(id.clone());
        let mut triples = 0;
        let target = if id == PopsId::Bool { 8 } else { 1000 };
        while triples < target {
            let s = all_values(&pops).unwrap_or_else(|| samples(&pops, 12, &mut rng));
            for a in &s {
                for b in &s {
                    if pops.leq(a, b).unwrap() {
                        assert_eq!(pops.plus(a, &pops.minus(b, a).unwrap()).unwrap(), *b, "{pops} a={a} b={b}");
                    }
                    for c in &s {
                        let ac = pops.plus(a, c).unwrap();
                        let lhs = pops.minus(&pops.plus(a, b).unwrap(), &ac).unwrap();
                        let rhs = pops.minus(b, &ac).unwrap();
                        assert_eq!(lhs, rhs, "{pops} a={a} b={b} c={c}");
                        triples += 1;
                    }
                }
            }
        }
    }
}

#[test]
fn difference_refused_without_dioid() {
    for id in [PopsId::Nat, PopsId::TropP(1), PopsId::Three] {
        let pops = Pops::new(id);
        assert!(pops.minus(&pops.one(), &pops.zero()).is_err());
    }
}

fn costs() -> impl Strategy<Value = Vec<Cost>> {
    proptest::collection::vec(prop_oneof![9 => (0i64..30).prop_map(Cost::int), 1 => Just(Cost::Inf)], 0..6)
}

fn union(x: &[Cost], y: &[Cost]) -> Vec<Cost> {
    x.iter().chain(y).cloned().collect()
}

fn sums(x: &[Cost], y: &[Cost]) -> Vec<Cost> {
    x.iter().flat_map(|a| y.iter().map(move |b| (*a).checked_add(*b).unwrap())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bag_normalization_commutes_with_union_and_sum(x in costs(), y in costs(), p in 0u32..4) {
        let (nx, ny) = (min_p(x.clone(), p), min_p(y.clone(), p));
        prop_assert_eq!(min_p(union(&x, &y), p), min_p(union(&nx, &ny), p));
        prop_assert_eq!(min_p(sums(&x, &y), p), min_p(sums(&nx, &ny), p));
    }

    #[test]
    fn set_normalization_commutes_with_union_and_sum(x in costs(), y in costs(), eta2 in 0i64..16) {
        let eta = Rational::new(eta2, 2);
        let (nx, ny) = (min_eta(x.clone(), eta).unwrap(), min_eta(y.clone(), eta).unwrap());
        prop_assert_eq!(min_eta(union(&x, &y), eta).unwrap(), min_eta(union(&nx, &ny), eta).unwrap());
        prop_assert_eq!(min_eta(sums(&x, &y), eta).unwrap(), min_eta(sums(&nx, &ny), eta).unwrap());
    }
}
