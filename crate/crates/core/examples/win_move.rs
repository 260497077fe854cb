//! The win-move game over three-valued logic, next to the alternating
//! fixpoint computed directly on the graph.

use datalogo::ast::check;
use datalogo::engine::{database_builder, run_program, RunOptions};
use datalogo::oracle::well_founded_winmove;
use datalogo::parser::parse;

const PROGRAM: &str = "domain pos = {a, b, c, d, e, f}.\nedb Move(pos, pos): bool.\nidb Win(pos): three.\n\
                       Win(x) :- sum(y){ not(Win(y)) | Move(x, y) }.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let moves = [(0, 1), (0, 2), (1, 0), (2, 3), (2, 4), (3, 4), (4, 5)];
    let names = ["a", "b", "c", "d", "e", "f"];
    let program = check(&parse(PROGRAM)?).map_err(|d| format!("{d:?}"))?;
    let mut builder = database_builder(&program);
    for (x, y) in moves {
        builder.add_fact("Move", &[names[x], names[y]], "true")?;
    }
    let (db, _) = builder.build()?;
    let result = run_program(&program, db, &RunOptions::default())?;
    let report = &result.strata[0];

    let wf = well_founded_winmove(names.len(), &moves);
    for (i, row) in wf.iterates.iter().enumerate() {
        let bits: String = row.iter().map(|&b| if b { '1' } else { '0' }).collect();
        println!("I{i} = {bits}");
    }
    println!("fixpoint reached at W{}", report.solution.fixpoint_at().unwrap_or(0));
    for (k, var) in report.system.vars.iter().enumerate() {
        println!("{var} = {}  (alternating: {})", report.solution.assignment[k], wf.model[k]);
    }
    Ok(())
}
