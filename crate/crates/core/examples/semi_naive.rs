//! Naive against differential evaluation on a non-linear closure.

use datalogo::ast::check;
use datalogo::engine::{compute_cap, database_builder, naive_eval, seminaive_eval, EvalOptions};
use datalogo::ground::Grounder;
use datalogo::parser::parse;

const PROGRAM: &str = "edb E(node, node): bool.\nidb T(node, node): bool.\n\
                       T(x, y) :- E(x, y) + sum(z){ T(x, z) * T(z, y) }.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = check(&parse(PROGRAM)?).map_err(|d| format!("{d:?}"))?;
    let mut builder = database_builder(&program);
    // A path of 12 nodes.
    for i in 0..11 {
        builder.add_fact("E", &[&format!("n{i}"), &format!("n{}", i + 1)], "true")?;
    }
    let (db, _) = builder.build()?;
    let system = Grounder::new(&program, &db).ground(&program.strata[0])?;
    let cap = compute_cap(&system, false, None);
    let opts = EvalOptions::default();

    let naive = naive_eval(&system, cap, &opts)?;
    let semi = seminaive_eval(&system, cap, &opts)?;
    assert_eq!(naive.assignment, semi.assignment);
    println!("{} ground atoms, {} monomials", system.len(), system.monomial_count());
    println!("naive:      {} iterations", naive.iterations);
    println!("semi-naive: {} iterations, delta sizes {:?}", semi.iterations, semi.delta_sizes);
    Ok(())
}
