//! Closed-form solving of a linear system by variable elimination.

use datalogo::ast::check;
use datalogo::engine::{compute_cap, database_builder, naive_eval, EvalOptions};
use datalogo::ground::Grounder;
use datalogo::linear::{eligibility, linear_lfp, to_matrix_form};
use datalogo::parser::parse;

const PROGRAM: &str = "domain node = {a, b, c, d}.\nedb E(node, node): trop_p(1).\nidb L(node): trop_p(1).\n\
                       L(x) :- [x = a] + sum(z){ L(z) * E(z, x) }.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = check(&parse(PROGRAM)?).map_err(|d| format!("{d:?}"))?;
    let mut builder = database_builder(&program);
    for (from, to, w) in [("a", "b", "1"), ("b", "a", "2"), ("a", "c", "5"), ("b", "c", "3"), ("c", "d", "4")] {
        builder.add_fact("E", &[from, to], w)?;
    }
    let (db, _) = builder.build()?;
    let system = Grounder::new(&program, &db).ground(&program.strata[0])?;

    let form = to_matrix_form(&system)?;
    println!("A =\n{}", form.a);
    let p = eligibility(&system, None)?;
    let solved = linear_lfp(&system, p)?;
    let iterated = naive_eval(&system, compute_cap(&system, true, None), &EvalOptions::default())?;
    assert_eq!(solved.assignment, iterated.assignment);
    println!("elimination: {} semiring operations", solved.ops);
    println!("iteration:   {} steps", iterated.iterations);
    for (var, v) in system.vars.iter().zip(&solved.assignment) {
        println!("{var} = {v}");
    }
    Ok(())
}
