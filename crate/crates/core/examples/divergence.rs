//! The same recursive cost query settles over lifted reals and runs away
//! over the naturals; the iteration cap turns that into a report.

use datalogo::ast::check;
use datalogo::engine::{database_builder, run_program, RunOptions};
use datalogo::parser::parse;

fn program(pops: &str) -> String {
    format!(
        "domain part = {{a, b, c, d}}.\nedb Sub(part, part): bool.\nedb C(part): {pops}.\nidb T(part): {pops}.\n\
         T(x) :- C(x) + sum(y){{ T(y) | Sub(x, y) }}."
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (pops, cap) in [("real_bot", None), ("nat", Some(100))] {
        let program = check(&parse(&program(pops))?).map_err(|d| format!("{d:?}"))?;
        let mut builder = database_builder(&program);
        for (x, y) in [("a", "b"), ("a", "c"), ("b", "a"), ("b", "c"), ("c", "d")] {
            builder.add_fact("Sub", &[x, y], "true")?;
        }
        builder.add_fact("C", &["c"], "1")?;
        builder.add_fact("C", &["d"], "10")?;
        let (db, _) = builder.build()?;
        let opts = RunOptions { max_iters: cap, ..RunOptions::default() };
        let result = run_program(&program, db, &opts)?;
        let r = &result.strata[0];
        println!("{pops}: {:?} after {} iterations, cap {}", r.solution.status, r.solution.iterations, r.cap);
        for line in r.solution.divergence_diff(&r.system) {
            println!("  still changing: {line}");
        }
        let values: Vec<String> = r.solution.assignment.iter().map(ToString::to_string).collect();
        println!("  T = ({})", values.join(", "));
    }
    Ok(())
}
