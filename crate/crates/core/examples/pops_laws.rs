//! Runs the algebraic law checks over every built-in instance.

use datalogo::analysis::{all_values, samples};
use datalogo::pops::{check_axioms, Pops, PopsId, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let ids = [
        PopsId::Bool,
        PopsId::Nat,
        PopsId::NonNegRational,
        PopsId::LiftedReal,
        PopsId::LiftedNat,
        PopsId::Trop,
        PopsId::TropPlus,
        PopsId::TropP(2),
        PopsId::TropEta(Rational::new(13, 2)),
        PopsId::Three,
        PopsId::CappedMax(3),
        PopsId::Product(Box::new(PopsId::Bool), Box::new(PopsId::TropP(1))),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for id in ids {
        let pops = Pops::new(id);
        let (elems, how) = match all_values(&pops) {
            Some(v) => (v, "exhaustive"),
            None => (samples(&pops, 12, &mut rng), "sampled"),
        };
        let report = check_axioms(&pops, &elems);
        let verdict = if report.passed() { "ok" } else { "FAILED" };
        println!("{:<24} {how:<10} {:>6} checks  {verdict}", pops.to_string(), report.checks);
    }
}
