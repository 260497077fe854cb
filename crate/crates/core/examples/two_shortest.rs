//! Bags of the p+1 smallest costs: arithmetic, then the two cheapest walks
//! per node, checked against a best-first enumeration.

use std::path::Path;

use datalogo::ast::check;
use datalogo::engine::{database_builder, run_program, RunOptions};
use datalogo::oracle::{k_lowest_walks, Graph};
use datalogo::parser::parse;
use datalogo::pops::{Pops, PopsId, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bags = Pops::new(PopsId::TropP(2));
    let x = Value::bag(&[Some(3), Some(7), Some(9)]);
    let y = Value::bag(&[Some(3), Some(7), Some(7)]);
    println!("{x} + {y} = {}", bags.plus(&x, &y)?);
    println!("{x} * {y} = {}", bags.times(&x, &y)?);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("programs");
    let program = check(&parse(&std::fs::read_to_string(dir.join("sssp_two.dl"))?)?).map_err(|d| format!("{d:?}"))?;
    let mut builder = database_builder(&program);
    builder.load_dir(&dir.join("routes"))?;
    let (db, _) = builder.build()?;
    let result = run_program(&program, db, &RunOptions::default())?;
    let report = &result.strata[0];

    let graph = Graph::new(4, vec![(0, 1, 1), (1, 0, 2), (0, 2, 5), (1, 2, 3), (2, 3, 4)]);
    let walks = k_lowest_walks(&graph, 0, 2)?;
    for (k, var) in report.system.vars.iter().enumerate() {
        let w: Vec<String> = walks[k].iter().map(|c| c.map_or("inf".into(), |c| c.to_string())).collect();
        println!("{var} = {}  walks: {}", report.solution.assignment[k], w.join(", "));
    }
    Ok(())
}
