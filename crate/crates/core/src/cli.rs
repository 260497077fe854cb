//! Command-line front end: `run`, `check`, `ground` and `analyze`.
//!
//! [`run_cli`] takes its output streams as arguments so tests can capture
//! them; the binary only forwards `std::env::args`.

use std::fmt::Write as _;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::analysis::{pops_report, AnalysisError};
use crate::ast::{check, CheckedProgram, Diagnostic, Severity};
use crate::engine::{
    database_builder, run_program, solve, store_solution, EngineChoice, EngineError, EvalOptions, RunOptions,
    RunResult, StratumReport, TraceMode,
};
use crate::ground::{GroundedSystem, Grounder, DEFAULT_MONOMIAL_BUDGET};
use crate::linear::{matrix_stability_index, LinearError, SemiringMatrix};
use crate::parser::{parse, ParseError};
use crate::pops::{Pops, PopsError, PopsId};
use crate::store::{read_rows, Database, StoreError};

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    Diverged = 2,
    Limit = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{path}: {} error(s)", .diagnostics.iter().filter(|d| d.severity == Severity::Error).count())]
    Invalid { path: String, diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Pops(#[from] PopsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Engine(e) if e.is_limit() => Exit::Limit,
            CliError::Pops(PopsError::Overflow) => Exit::Limit,
            _ => Exit::Usage,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "datalogo", version, about = "Datalog over partially ordered pre-semirings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a program and print its IDB relations.
    Run(RunArgs),
    /// Validate a program and report strata and linearity.
    Check(CheckArgs),
    /// Print the grounded polynomial system of each stratum.
    Ground(GroundArgs),
    /// Algebraic and stability report for a POPS, or the stability index of a matrix.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EngineArg {
    Auto,
    Naive,
    Seminaive,
    Linear,
}

impl From<EngineArg> for EngineChoice {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Auto => EngineChoice::Auto,
            EngineArg::Naive => EngineChoice::Naive,
            EngineArg::Seminaive => EngineChoice::Seminaive,
            EngineArg::Linear => EngineChoice::Linear,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceArg {
    Off,
    Summary,
    Full,
}

impl From<TraceArg> for TraceMode {
    fn from(t: TraceArg) -> Self {
        match t {
            TraceArg::Off => TraceMode::Off,
            TraceArg::Summary => TraceMode::Summary,
            TraceArg::Full => TraceMode::Full,
        }
    }
}

/// `auto` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxIters(pub Option<u64>);

fn parse_max_iters(s: &str) -> Result<MaxIters, String> {
    if s == "auto" {
        return Ok(MaxIters(None));
    }
    s.parse().map(|n| MaxIters(Some(n))).map_err(|_| format!("expected `auto` or a number, got `{s}`"))
}

#[derive(Debug, Args)]
pub struct GroundingArgs {
    /// Directory holding `<Relation>.csv` or `.tsv` files.
    #[arg(long)]
    pub edb: Option<PathBuf>,
    /// Drop ground atoms that can never leave ⊥.
    #[arg(long)]
    pub restrict: bool,
    /// Maximum number of monomials across a grounded stratum.
    #[arg(long, default_value_t = DEFAULT_MONOMIAL_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub grounding: GroundingArgs,
    #[arg(long, value_enum, default_value = "auto")]
    pub engine: EngineArg,
    #[arg(long, value_parser = parse_max_iters, default_value = "auto")]
    pub max_iters: MaxIters,
    #[arg(long, value_enum, default_value = "off")]
    pub trace: TraceArg,
    /// Write every IDB relation as CSV into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recorded in the JSON report; evaluation itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Stability parameter for the linear solver when the POPS has none.
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub program: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub grounding: GroundingArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// POPS name, e.g. `tropplus`, `trop_p(2)`, `product(bool,three)`.
    #[arg(long)]
    pub pops: String,
    /// Include empirical stability indices of random elements and polynomials.
    #[arg(long)]
    pub stability: bool,
    /// Tab-separated square matrix over the POPS; reports its stability index.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Largest index tried for `--matrix`.
    #[arg(long, default_value_t = 256)]
    pub cap: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

struct Out<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
    color: bool,
}

impl Out<'_> {
    fn line(&mut self, s: &str) {
        let _ = writeln!(self.stdout, "{s}");
    }

    fn diag(&mut self, severity: Severity, s: &str) {
        let (label, code) = match severity {
            Severity::Error => ("error", "31"),
            Severity::Warning => ("warning", "33"),
        };
        let label = if self.color { format!("\x1b[1;{code}m{label}\x1b[0m") } else { label.to_string() };
        let _ = writeln!(self.stderr, "{label}: {s}");
    }
}

fn color_enabled() -> bool {
    std::env::var("DATALOGO_COLOR").map_or(true, |v| v != "0") && std::io::stderr().is_terminal()
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return Exit::Usage as i32;
            }
            let _ = write!(stdout, "{text}");
            return Exit::Ok as i32;
        }
    };
    let mut out = Out { stdout, stderr, color: color_enabled() };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, &mut out),
        Command::Check(a) => cmd_check(a, &mut out),
        Command::Ground(a) => cmd_ground(a, &mut out),
        Command::Analyze(a) => cmd_analyze(a, &mut out),
    };
    match result {
        Ok(code) => code as i32,
        Err(e) => {
            if let CliError::Invalid { path, diagnostics } = &e {
                for d in diagnostics {
                    out.diag(d.severity, &format!("{path}: {}", strip_severity(d)));
                }
            }
            out.diag(Severity::Error, &e.to_string());
            e.exit() as i32
        }
    }
}

fn strip_severity(d: &Diagnostic) -> String {
    format!("{}:{}: {}", d.span.line, d.span.col, d.message)
}

/// Reads, parses and checks a program file; warnings go to stderr.
fn load_program(path: &Path, out: &mut Out<'_>) -> Result<CheckedProgram, CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: shown.clone(), source })?;
    let ast = parse(&text).map_err(|source| CliError::Parse { path: shown.clone(), source })?;
    let program = check(&ast).map_err(|diagnostics| CliError::Invalid { path: shown.clone(), diagnostics })?;
    for w in &program.warnings {
        out.diag(Severity::Warning, &format!("{shown}: {}", strip_severity(w)));
    }
    Ok(program)
}

fn load_database(program: &CheckedProgram, edb: Option<&Path>) -> Result<Database, CliError> {
    let mut builder = database_builder(program);
    if let Some(dir) = edb {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{}: not a directory", dir.display())));
        }
        builder.load_dir(dir)?;
    }
    let (db, notices) = builder.build()?;
    for n in notices {
        log::info!("{n}");
    }
    Ok(db)
}

fn run_options(a: &RunArgs) -> RunOptions {
    RunOptions {
        engine: a.engine.into(),
        max_iters: a.max_iters.0,
        eval: EvalOptions { trace: a.trace.into(), threads: a.threads.max(1) },
        restrict: a.grounding.restrict,
        budget: a.grounding.budget,
        linear_p: a.p,
    }
}

fn outcome_line(report: &StratumReport) -> String {
    let s = &report.solution;
    match (report.engine, s.converged()) {
        (EngineChoice::Linear, _) => {
            format!("solved by elimination in {} semiring operations", s.ops)
        }
        (_, true) => format!("converged in {} iterations", s.iterations),
        (_, false) => format!("cap exceeded after {} iterations; cap {}", s.iterations, report.cap),
    }
}

/// Relation name with `(key, value)` rows.
type Table = (String, Vec<(Vec<String>, String)>);

/// Full table of a stratum's ground atoms, including ⊥ entries.
fn stratum_tables(report: &StratumReport) -> Vec<Table> {
    let mut tables: Vec<Table> = report.idbs.iter().map(|name| (name.clone(), Vec::new())).collect();
    for (var, value) in report.system.vars.iter().zip(&report.solution.assignment) {
        if let Some((_, rows)) = tables.iter_mut().find(|(name, _)| *name == var.rel) {
            rows.push((var.key.iter().map(ToString::to_string).collect(), value.to_string()));
        }
    }
    tables
}

fn write_outputs(result: &RunResult, dir: &Path) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: dir.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(io)?;
    for report in &result.strata {
        for name in &report.idbs {
            let path = dir.join(format!("{name}.csv"));
            let file = std::fs::File::create(&path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            result.database.relation(name)?.write_csv(file)?;
        }
    }
    Ok(())
}

fn run_json(a: &RunArgs, result: &RunResult) -> Json {
    let strata: Vec<Json> = result
        .strata
        .iter()
        .map(|r| {
            let tables: serde_json::Map<String, Json> = stratum_tables(r)
                .into_iter()
                .map(|(name, rows)| {
                    let rows = rows.into_iter().map(|(mut k, v)| {
                        k.push(v);
                        Json::from(k)
                    });
                    (name, Json::Array(rows.collect()))
                })
                .collect();
            json!({
                "index": r.index,
                "idbs": r.idbs,
                "engine": r.engine.to_string(),
                "cap": r.cap.to_string(),
                "status": if r.solution.converged() { "converged" } else { "cap_exceeded" },
                "iterations": r.solution.iterations,
                "semiring_ops": r.solution.ops,
                "ground_atoms": r.system.len(),
                "monomials": r.system.monomial_count(),
                "notices": r.notices,
                "still_changing": r.solution.divergence_diff(&r.system),
                "trace": r.solution.format_trace(&r.system).lines().collect::<Vec<_>>(),
                "relations": tables,
            })
        })
        .collect();
    json!({
        "program": a.program.display().to_string(),
        "engine": EngineChoice::from(a.engine).to_string(),
        "seed": a.seed,
        "strata": strata,
    })
}

fn cmd_run(a: &RunArgs, out: &mut Out<'_>) -> Result<Exit, CliError> {
    let program = load_program(&a.program, out)?;
    let db = load_database(&program, a.grounding.edb.as_deref())?;
    let result = run_program(&program, db, &run_options(a))?;
    if let Some(dir) = &a.out {
        write_outputs(&result, dir)?;
    }
    if a.json {
        out.line(&serde_json::to_string_pretty(&run_json(a, &result)).expect("json values serialize"));
    } else {
        for r in &result.strata {
            out.line(&format!(
                "stratum {} [{}]: engine {}, {} ground atoms, {} monomials, cap {}",
                r.index,
                r.idbs.join(", "),
                r.engine,
                r.system.len(),
                r.system.monomial_count(),
                r.cap
            ));
            for n in &r.notices {
                out.line(&format!("  note: {n}"));
            }
            if a.trace != TraceArg::Off {
                for l in r.solution.format_trace(&r.system).lines() {
                    out.line(&format!("  {l}"));
                }
            }
            out.line(&outcome_line(r));
            for (name, rows) in stratum_tables(r) {
                out.line(&name);
                for (keys, v) in rows {
                    out.line(&format!("{}\t{v}", keys.join("\t")));
                }
            }
        }
    }
    if let Some(r) = result.diverged() {
        let mut msg = format!(
            "stratum {} [{}] did not converge within {} iterations; cap {}",
            r.index,
            r.idbs.join(", "),
            r.solution.iterations,
            r.cap
        );
        let diff = r.solution.divergence_diff(&r.system);
        if !diff.is_empty() {
            let _ = write!(msg, "; still changing: {}", diff.join(", "));
        }
        out.diag(Severity::Error, &msg);
        return Ok(Exit::Diverged);
    }
    Ok(Exit::Ok)
}

fn cmd_check(a: &CheckArgs, out: &mut Out<'_>) -> Result<Exit, CliError> {
    let program = load_program(&a.program, out)?;
    let n = program.strata.len();
    let linear = |b: bool| if b { "yes" } else { "no" };
    if a.json {
        let strata: Vec<Json> = program
            .strata
            .iter()
            .enumerate()
            .map(|(i, s)| json!({ "index": i, "idbs": s.idbs, "rules": s.rules.len(), "linear": s.linear }))
            .collect();
        let warnings: Vec<String> = program.warnings.iter().map(ToString::to_string).collect();
        out.line(&serde_json::to_string_pretty(&json!({ "strata": strata, "warnings": warnings })).expect("json"));
        return Ok(Exit::Ok);
    }
    let all = program.strata.iter().all(|s| s.linear);
    let none = program.strata.iter().all(|s| !s.linear);
    let summary = if all {
        "yes"
    } else if none {
        "no"
    } else {
        "mixed"
    };
    let noun = if n == 1 { "stratum" } else { "strata" };
    out.line(&format!("{n} {noun}, linear: {summary}"));
    if n > 1 {
        for (i, s) in program.strata.iter().enumerate() {
            out.line(&format!("  stratum {i} [{}]: linear: {}", s.idbs.join(", "), linear(s.linear)));
        }
    }
    Ok(Exit::Ok)
}

fn cmd_ground(a: &GroundArgs, out: &mut Out<'_>) -> Result<Exit, CliError> {
    let program = load_program(&a.program, out)?;
    let mut db = load_database(&program, a.grounding.edb.as_deref())?;
    let opts = RunOptions { budget: a.grounding.budget, restrict: a.grounding.restrict, ..RunOptions::default() };
    let many = program.strata.len() > 1;
    for (i, stratum) in program.strata.iter().enumerate() {
        let mut system: GroundedSystem =
            Grounder::new(&program, &db).with_budget(opts.budget).ground(stratum).map_err(EngineError::from)?;
        if opts.restrict {
            let explicit = stratum.rules.iter().any(|&r| program.rules[r].has_explicit_range);
            let (restricted, note) = system.active_domain_restrict(explicit)?;
            if let Some(n) = note {
                out.diag(Severity::Warning, &n);
            }
            system = restricted;
        }
        if many {
            out.line(&format!("# stratum {i}: {}", stratum.idbs.join(", ")));
        }
        let _ = write!(out.stdout, "{}", system.dump());
        if i + 1 < program.strata.len() {
            // Later strata read this one's values.
            let (_, _, solution) = solve(&system, EngineChoice::Auto, &opts, stratum.linear)?;
            if !solution.converged() {
                out.diag(Severity::Error, &format!("stratum {i} did not converge; later strata cannot be grounded"));
                return Ok(Exit::Diverged);
            }
            store_solution(&mut db, &program, stratum, &system, &solution.assignment)?;
        }
    }
    Ok(Exit::Ok)
}

fn read_matrix(path: &Path, pops: &Pops) -> Result<SemiringMatrix, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let mut rows = Vec::new();
    for raw in read_rows(file, b'\t')? {
        let mut row = Vec::with_capacity(raw.keys.len() + 1);
        for field in raw.keys.iter().chain(std::iter::once(&raw.value)) {
            row.push(pops.parse_value(field)?);
        }
        rows.push(row);
    }
    Ok(SemiringMatrix::from_rows(pops, rows)?)
}

fn cmd_analyze(a: &AnalyzeArgs, out: &mut Out<'_>) -> Result<Exit, CliError> {
    let id: PopsId = a.pops.parse()?;
    let pops = Pops::new(id);
    let report = match &a.matrix {
        Some(path) => {
            let m = read_matrix(path, &pops)?;
            let index = matrix_stability_index(&m, a.cap)?;
            json!({ "pops": pops.to_string(), "dim": m.dim(), "cap": a.cap, "stability_index": index })
        }
        None => serde_json::to_value(pops_report(&pops, a.seed, a.stability)?).expect("reports serialize"),
    };
    out.line(&serde_json::to_string_pretty(&report).expect("json values serialize"));
    Ok(Exit::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> (i32, String, String) {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let code = run_cli(std::iter::once("datalogo").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn max_iters_values() {
        assert_eq!(parse_max_iters("auto"), Ok(MaxIters(None)));
        assert_eq!(parse_max_iters("12"), Ok(MaxIters(Some(12))));
        assert!(parse_max_iters("-1").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(invoke(&[]).0, 1);
        assert_eq!(invoke(&["run"]).0, 1);
        assert_eq!(invoke(&["run", "/nonexistent.dl"]).0, 1);
        assert_eq!(invoke(&["analyze", "--pops", "nope"]).0, 1);
        assert_eq!(invoke(&["--help"]).0, 0);
    }

    #[test]
    fn analyze_emits_json() {
        let (code, out, _) = invoke(&["analyze", "--pops", "three", "--seed", "3"]);
        assert_eq!(code, 0);
        let v: Json = serde_json::from_str(&out).unwrap();
        assert_eq!(v["seed"], 3);
        assert_eq!(v["flags"]["strict_times"], false);
    }
}
