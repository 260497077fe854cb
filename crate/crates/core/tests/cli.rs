//! Golden outputs and exit statuses of the command-line front end.

mod common;

use std::process::Command;

use common::programs_dir;
use datalogo::cli::run_cli;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let dir = programs_dir();
    let args: Vec<String> = args
        .iter()
        .map(|a| {
            if a.ends_with(".dl") || a.starts_with("@") {
                dir.join(a.trim_start_matches('@')).display().to_string()
            } else {
                a.to_string()
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("datalogo".to_string()).chain(args), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn shortest_paths_run() {
    let (code, out, _) = invoke(&["run", "sssp.dl", "--edb", "@routes", "--engine", "naive"]);
    assert_eq!(code, 0);
    assert!(out.contains("converged in 5 iterations"), "{out}");
    assert!(out.ends_with("L\na\t0\nb\t1\nc\t4\nd\t8\n"), "{out}");

    let (code, auto, _) = invoke(&["run", "sssp.dl", "--edb", "@routes"]);
    assert_eq!(code, 0);
    assert!(auto.contains("engine linear"));
    assert!(auto.ends_with("L\na\t0\nb\t1\nc\t4\nd\t8\n"), "{auto}");
}

#[test]
fn full_trace_lists_changes() {
    let (_, out, _) = invoke(&["run", "sssp.dl", "--edb", "@routes", "--engine", "naive", "--trace", "full"]);
    assert!(out.contains("  t=1 L(a)=0\n  t=2 L(b)=1 L(c)=5\n  t=3 L(c)=4 L(d)=9\n  t=4 L(d)=8\n  t=5\n"), "{out}");
}

#[test]
fn natural_number_parts_diverge() {
    let (code, out, err) = invoke(&["run", "parts_nat.dl", "--edb", "@parts", "--max-iters", "100"]);
    assert_eq!(code, 2);
    assert!(out.contains("cap exceeded after 101 iterations"), "{out}");
    assert!(err.contains("stratum 0 [T] did not converge"), "{err}");
    assert!(err.contains("T(a)"), "{err}");
}

#[test]
fn lifted_parts_converge() {
    let (code, out, _) = invoke(&["run", "parts_real.dl", "--edb", "@parts"]);
    assert_eq!(code, 0);
    assert!(out.contains("converged in 3 iterations"));
    assert!(out.ends_with("T\na\tbot\nb\tbot\nc\t11\nd\t10\n"), "{out}");
}

#[test]
fn game_table() {
    let (code, out, _) = invoke(&["run", "winmove.dl", "--edb", "@wm"]);
    assert_eq!(code, 0);
    assert!(out.ends_with("Win\na\tU\nb\tU\nc\tT\nd\tF\ne\tT\nf\tF\n"), "{out}");
}

#[test]
fn check_reports_strata_and_linearity() {
    assert_eq!(invoke(&["check", "apsp.dl"]).1, "1 stratum, linear: yes\n");
    assert_eq!(invoke(&["check", "tc_quadratic.dl"]).1, "1 stratum, linear: no\n");
    let (_, out, _) = invoke(&["check", "unreachable.dl"]);
    assert!(out.starts_with("2 strata, linear: yes\n"), "{out}");
    let (_, json, _) = invoke(&["check", "company.dl", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["strata"][0]["idbs"], serde_json::json!(["CV", "T", "C"]));
}

#[test]
fn ground_golden() {
    let (code, out, _) = invoke(&["ground", "sssp.dl", "--edb", "@routes"]);
    assert_eq!(code, 0);
    assert_eq!(
        out,
        "x_1: L(a) = 0 + 2 * x_2\nx_2: L(b) = 1 * x_1\nx_3: L(c) = 5 * x_1 + 3 * x_2\nx_4: L(d) = 4 * x_3\n"
    );
    let (_, strata, _) = invoke(&["ground", "unreachable.dl", "--edb", "@routes_bool"]);
    assert!(strata.contains("# stratum 1: U\n"));
    assert!(strata.contains("U(e) = true\n"), "{strata}");
}

#[test]
fn json_report_is_deterministic() {
    let args = ["run", "company.dl", "--edb", "@company", "--json", "--seed", "9"];
    let (code, a, _) = invoke(&args);
    let (_, b, _) = invoke(&args);
    assert_eq!(code, 0);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["seed"], 9);
    let c = &v["strata"][0]["relations"]["C"];
    assert!(c.as_array().unwrap().contains(&serde_json::json!(["a", "c", "true"])));
}

#[test]
fn csv_tables_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, _, _) = invoke(&["run", "sssp_two.dl", "--edb", "@routes", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join("L.csv")).unwrap();
    assert_eq!(csv, "k1,value\na,\"[0,3]\"\nb,\"[1,4]\"\nc,\"[4,5]\"\nd,\"[8,9]\"\n");
}

#[test]
fn failures_map_to_exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dl");
    std::fs::write(&bad, "idb L(node): tropplus.\nL(x) :- +.\n").unwrap();
    let (code, _, err) = invoke(&["run", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 2, column 9"), "{err}");

    let unsafe_rule = dir.path().join("unsafe.dl");
    std::fs::write(&unsafe_rule, "edb E(n, n): bool.\nidb T(n): bool.\nT(x) :- E(y, y).\n").unwrap();
    let (code, _, err) = invoke(&["check", unsafe_rule.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("error"), "{err}");

    let (code, _, err) = invoke(&["run", "apsp.dl", "--edb", "@routes", "--budget", "3"]);
    assert_eq!(code, 3, "{err}");

    let (code, _, err) = invoke(&["run", "tc_quadratic.dl", "--edb", "@routes_bool", "--engine", "linear"]);
    assert_eq!(code, 1);
    assert!(err.contains("linear"), "{err}");
}

#[test]
fn analyze_reports() {
    let (code, out, _) = invoke(&["analyze", "--pops", "trop_p(2)", "--stability", "--seed", "4"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["flags"]["known_stability_p"], 2);
    assert!(v["stability"]["polynomials"].is_object(), "{out}");

    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("cycle.tsv");
    std::fs::write(&m, "inf\t0\t inf\ninf\tinf\t0\n0\tinf\tinf\n").unwrap();
    let (code, out, err) = invoke(&["analyze", "--pops", "trop_p(1)", "--matrix", m.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["stability_index"], 5);
}

#[test]
fn binary_exit_codes_and_plain_output() {
    let bin = env!("CARGO_BIN_EXE_datalogo");
    let dir = programs_dir();
    let status = Command::new(bin)
        .args(["run", "parts_nat.dl", "--edb", "parts", "--max-iters", "10"])
        .current_dir(&dir)
        .env("DATALOGO_COLOR", "0")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let err = String::from_utf8(status.stderr).unwrap();
    assert!(err.starts_with("error: "), "{err}");
    assert!(!err.contains('\x1b'));

    let ok = Command::new(bin).args(["check", "sssp.dl"]).current_dir(&dir).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8(ok.stdout).unwrap(), "1 stratum, linear: yes\n");
}
