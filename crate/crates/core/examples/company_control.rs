//! Share ownership over non-negative rationals feeding a Boolean control
//! relation through a threshold, all in one recursive stratum.

use datalogo::ast::check;
use datalogo::engine::{database_builder, run_program, RunOptions};
use datalogo::parser::parse;

const PROGRAM: &str =
    "edb S(co, co): nnrat.\nidb CV(co, co, co): nnrat.\nidb T(co, co): nnrat.\nidb C(co, co): bool.\n\
                       CV(x, z, y) :- [z = x] * S(x, y) + [C(x, z)] * S(z, y).\n\
                       T(x, y) :- sum(z){ CV(x, z, y) }.\n\
                       C(x, y) :- threshold(0.5, T(x, y)).";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = check(&parse(PROGRAM)?).map_err(|d| format!("{d:?}"))?;
    println!("{} stratum, IDBs {:?}", program.strata.len(), program.strata[0].idbs);
    let mut builder = database_builder(&program);
    for (x, y, share) in
        [("a", "b", "0.6"), ("a", "c", "0.3"), ("b", "c", "0.3"), ("c", "d", "0.51"), ("b", "d", "0.2")]
    {
        builder.add_fact("S", &[x, y], share)?;
    }
    let (db, _) = builder.build()?;
    let result = run_program(&program, db, &RunOptions::default())?;
    let control = result.database.relation("C")?;
    for row in control.emit_table() {
        if row.last().is_some_and(|v| v == "true") {
            println!("{} controls {}", row[0], row[1]);
        }
    }
    Ok(())
}
