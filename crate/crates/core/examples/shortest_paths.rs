//! Single-source shortest paths over min-plus costs, iterate by iterate.
//!
//! Run with `cargo run --example shortest_paths`.

use std::path::Path;

use datalogo::ast::check;
use datalogo::engine::{compute_cap, database_builder, naive_eval, EvalOptions, TraceMode};
use datalogo::ground::Grounder;
use datalogo::oracle::{dijkstra, Graph};
use datalogo::parser::parse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("programs");
    let program = check(&parse(&std::fs::read_to_string(dir.join("sssp.dl"))?)?).map_err(|d| format!("{d:?}"))?;
    let mut builder = database_builder(&program);
    builder.load_dir(&dir.join("routes"))?;
    let (db, _) = builder.build()?;

    let system = Grounder::new(&program, &db).ground(&program.strata[0])?;
    print!("{}", system.dump());

    let cap = compute_cap(&system, true, None);
    let opts = EvalOptions { trace: TraceMode::Full, threads: 1 };
    let solution = naive_eval(&system, cap, &opts)?;
    print!("{}", solution.format_trace(&system));
    println!("converged in {} iterations (cap {cap})", solution.iterations);

    let graph = Graph::new(4, vec![(0, 1, 1), (1, 0, 2), (0, 2, 5), (1, 2, 3), (2, 3, 4)]);
    let expected = dijkstra(&graph, 0)?;
    for (var, (got, want)) in system.vars.iter().zip(solution.assignment.iter().zip(&expected)) {
        println!("{var} = {got}  (dijkstra: {})", want.map_or("inf".to_string(), |d| d.to_string()));
    }
    Ok(())
}
