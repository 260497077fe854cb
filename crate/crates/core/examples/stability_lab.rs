//! Empirical stability indices: cycle matrices over bag semirings and
//! random univariate polynomials.

use datalogo::analysis::{poly_stability_index, random_poly};
use datalogo::linear::{matrix_stability_index, SemiringMatrix};
use datalogo::pops::{Pops, PopsId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_cycle(pops: &Pops, n: usize) -> SemiringMatrix {
    let mut m = SemiringMatrix::zeros(pops, n);
    for i in 0..n {
        m.set(i, (i + 1) % n, pops.one());
    }
    m
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("N\tp\tindex");
    for p in 0..=3 {
        let pops = Pops::new(PopsId::TropP(p));
        for n in 2..=6 {
            let index = matrix_stability_index(&unit_cycle(&pops, n), 200)?;
            println!("{n}\t{p}\t{}", index.map_or("-".into(), |i| i.to_string()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for id in [PopsId::Bool, PopsId::TropPlus, PopsId::TropP(1), PopsId::TropP(3)] {
        let pops = Pops::new(id);
        let mut worst = 0;
        for _ in 0..200 {
            let f = random_poly(&pops, 4, &mut rng);
            worst = worst.max(poly_stability_index(&pops, &f, 64)?.unwrap_or(u32::MAX));
        }
        println!("{pops}: largest index over 200 polynomials = {worst}");
    }
    Ok(())
}
