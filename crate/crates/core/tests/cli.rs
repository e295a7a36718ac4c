use std::fs;
use std::process::Command;

use siplb_core::cli::load_instance;
use siplb_core::builtin_counterexample;

const CEX_FILE: &str = "\
# the counterexample
name cex
xvars 1
yvars 1
xdom 1 -1 1
ydom 1 -1 1
objective -x1
constraint 2*x1 - y1
";

fn siplb(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_siplb"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn summary_value<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim_start_matches(':').trim()))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{stdout}"))
}

fn read_trace(path: &std::path::Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().clone();
    let rows = rdr.records().map(Result::unwrap).collect();
    (header, rows)
}

#[test]
fn instance_file_matches_builtin() {
    assert_eq!(load_instance(CEX_FILE).unwrap(), builtin_counterexample());
}

#[test]
fn exact_oracle_on_builtin() {
    let (code, out, _) = siplb(&["solve", "--builtin", "cex", "--oracle", "exact"]);
    assert_eq!(code, 0);
    assert_eq!(summary_value(&out, "status"), "converged-optimal");
    assert_eq!(summary_value(&out, "iterations"), "2");
    let bound: f64 = summary_value(&out, "final lower bound").parse().unwrap();
    assert!((bound - 0.5).abs() <= 1e-4);
}

#[test]
fn scripted_trace_halves() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let (code, out, _) = siplb(&[
        "solve", "--builtin", "cex", "--oracle", "scripted", "--max-iter", "12", "--trace",
        trace.to_str().unwrap(), "--quiet",
    ]);
    assert_eq!(code, 2);
    assert_eq!(summary_value(&out, "status"), "max-iter-reached");
    let (header, rows) = read_trace(&trace);
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["k", "f_lbd", "incumbent_value", "x1", "oracle_status", "y1", "g_value", "g_star_estimate"]
    );
    assert_eq!(rows.len(), 12);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), i + 1);
        let f: f64 = row[1].parse().unwrap();
        assert!((f + 0.5f64.powi(i as i32)).abs() <= 1e-4, "row {i}: {f}");
        assert_eq!(&row[4], "violation");
        assert_eq!(&row[7], "", "identity map reports no g* estimate");
    }
    let last: f64 = summary_value(&out, "final lower bound").parse().unwrap();
    assert!((last + 2f64.powi(-11)).abs() <= 1e-4);
}

#[test]
fn converged_trace_ends_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let (code, ..) = siplb(&[
        "solve", "--builtin", "cex", "--oracle", "alpha", "--alpha", "0.5", "--max-iter", "50",
        "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (_, rows) = read_trace(&trace);
    assert_eq!(&rows.last().unwrap()[4], "feasible");
    let f: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] >= w[0]));
    assert!((f.last().unwrap() - 0.5).abs() <= 1e-3);
}

#[test]
fn infeasible_instance_is_definitive() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inf.sip");
    let trace = dir.path().join("inf.csv");
    fs::write(
        &inst,
        "xvars 1\nyvars 1\nxdom 1 0 1\nydom 1 0 1\nobjective x1\nconstraint 1 + x1 + y1\n",
    )
    .unwrap();
    let (code, out, _) = siplb(&[
        "solve", "--instance", inst.to_str().unwrap(), "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(summary_value(&out, "status"), "infeasible-sip");
    let (_, rows) = read_trace(&trace);
    assert!(!rows.is_empty());
    let last = rows.last().unwrap();
    assert_eq!(&last[1], "inf");
    assert_eq!(&last[4], "lbd-infeasible");
}

#[test]
fn instance_file_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("cex.sip");
    fs::write(&inst, CEX_FILE).unwrap();
    let (code, out, _) = siplb(&["solve", "--instance", inst.to_str().unwrap(), "--quiet"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn bad_instance_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("bad.sip");
    fs::write(&inst, CEX_FILE.replace("xdom 1 -1 1", "xdom 1 2 1")).unwrap();
    let (code, _, err) = siplb(&["solve", "--instance", inst.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("line 5") && err.contains("empty interval"), "{err}");
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        vec!["solve"],
        vec!["solve", "--builtin", "cex", "--oracle", "alpha"],
        vec!["solve", "--builtin", "cex", "--oracle", "alpha", "--alpha", "1.5"],
        vec!["solve", "--builtin", "cex", "--oracle", "bogus"],
        vec!["solve", "--builtin", "cex", "--oracle", "scripted", "--map", "1,2,3"],
        vec!["solve", "--builtin", "cex", "--max-iter", "0"],
        vec!["frobnicate"],
    ] {
        let (code, _, err) = siplb(&args);
        assert_eq!(code, 64, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn missing_instance_file_is_a_failure() {
    let (code, _, err) = siplb(&["solve", "--instance", "/nonexistent/path.sip"]);
    assert_eq!(code, 3);
    assert!(err.contains("/nonexistent/path.sip"));
}

#[test]
fn unwritable_trace_names_path() {
    let (code, _, err) = siplb(&["solve", "--builtin", "cex", "--trace", "/nonexistent/dir/t.csv"]);
    assert_eq!(code, 3);
    assert!(err.contains("/nonexistent/dir/t.csv"), "{err}");
}
