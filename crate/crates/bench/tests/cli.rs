//! End-to-end runs of the qpbench binary: generate instance files, solve
//! them, and read back the CSV reports.

use std::path::Path;
use std::process::{Command, Output};

use qpbench::format::parse_csv;

fn qpbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpbench"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn read_report(path: &Path) -> Vec<Vec<String>> {
    parse_csv(&std::fs::read_to_string(path).expect("report file should exist"))
}

fn col(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

#[test]
fn gen_proj_then_solve_proj_reports_tiny_violation() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("proj.qpinst");
    let report = dir.path().join("proj.csv");

    let gen = qpbench(&["gen-proj", "--n", "500", "--seed", "3", "--out", instance.to_str().unwrap()]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

    let solve = qpbench(&[
        "solve-proj",
        "--instance",
        instance.to_str().unwrap(),
        "--grad-tol",
        "1e-12",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));

    let rows = read_report(&report);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][col(&rows, "n")], "500");
    let violation: f64 = rows[1][col(&rows, "violation")].parse().unwrap();
    let iterations: usize = rows[1][col(&rows, "iterations")].parse().unwrap();
    assert!(violation <= 1e-12);
    assert!(iterations <= 50);
}

#[test]
fn gen_qp_then_solve_qp_recovers_planted_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("qp.qpinst");
    let report = dir.path().join("qp.csv");

    let gen = qpbench(&[
        "gen-qp",
        "--n",
        "60",
        "--cond",
        "1e3",
        "--ratio",
        "0.5",
        "--seed",
        "4",
        "--out",
        instance.to_str().unwrap(),
    ]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

    let solve = qpbench(&[
        "solve-qp",
        "--instance",
        instance.to_str().unwrap(),
        "--solver",
        "vem",
        "--tol",
        "1e-12",
        "--term",
        "gap",
        "--max-iter",
        "1000000",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));

    let rows = read_report(&report);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][col(&rows, "solver")], "vem");
    assert_eq!(rows[1][col(&rows, "termination")], "gap");
    let relerr: f64 = rows[1][col(&rows, "relerr")].parse().unwrap();
    assert!(relerr <= 1e-8, "relerr {relerr:e}");

    // Same instance under the projected-gradient residual rule.
    let solve_kkt = qpbench(&[
        "solve-qp",
        "--instance",
        instance.to_str().unwrap(),
        "--solver",
        "vem",
        "--tol",
        "1e-9",
        "--term",
        "kkt",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(solve_kkt.status.success());
    let rows = read_report(&report);
    assert_eq!(rows[1][col(&rows, "termination")], "kkt");
}

#[test]
fn solve_qp_rejects_projection_instances() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("proj.qpinst");
    qpbench(&["gen-proj", "--n", "50", "--seed", "1", "--out", instance.to_str().unwrap()]);

    let solve = qpbench(&[
        "solve-qp",
        "--instance",
        instance.to_str().unwrap(),
        "--solver",
        "vem",
    ]);
    assert!(!solve.status.success());
    let stderr = String::from_utf8_lossy(&solve.stderr);
    assert!(stderr.contains("projection"), "stderr: {stderr}");
}

#[test]
fn dopt_report_reaches_stop_decrement() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("dopt.csv");
    let run = qpbench(&[
        "dopt",
        "--n",
        "60",
        "--p",
        "6",
        "--seed",
        "5",
        "--qp-solver",
        "fw",
        "--lambda-stop",
        "1e-3",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let rows = read_report(&report);
    assert_eq!(rows[1][col(&rows, "qp_solver")], "fw");
    let lambda: f64 = rows[1][col(&rows, "lambda")].parse().unwrap();
    assert!(lambda <= 1e-3);
    let ttime: f64 = rows[1][col(&rows, "ttime_s")].parse().unwrap();
    let qptime: f64 = rows[1][col(&rows, "qptime_s")].parse().unwrap();
    assert!(qptime <= ttime);
}

#[test]
fn qp_table_markdown_goes_to_stdout() {
    let run = qpbench(&[
        "qp-table",
        "--n",
        "40",
        "--conds",
        "1e2",
        "--ratios",
        "0.4",
        "--solvers",
        "vem",
        "--seed",
        "2",
        "--format",
        "md",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with("| ratio | metric |"), "stdout: {stdout}");
    assert!(stdout.contains("relerr"));
    assert!(stdout.contains("time_s"));
}

#[test]
fn proj_table_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("proj_table.csv");
    let run = qpbench(&[
        "proj-table",
        "--sizes",
        "50,120",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let rows = read_report(&out);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], vec!["size", "violation", "time_s", "iterations"]);
    assert_eq!(rows[1][0], "50");
    assert_eq!(rows[2][0], "120");
}
