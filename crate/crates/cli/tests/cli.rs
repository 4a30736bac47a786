use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumrules")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV document as (header → field) lookups.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (header, rows) = csv(text);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn exact_sweep_matches_reference() {
    let o = run(&["exact", "--d", "3", "--p", "2", "--kappa", "0:2:0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(column(&text, "kappa"), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    assert!(column(&text, "abs_diff").iter().all(|&e| e <= 1e-6));
    let (header, rows) = csv(&text);
    let prov = header.iter().position(|h| h == "provenance").unwrap();
    let cut = header.iter().position(|h| h == "ell_cut").unwrap();
    assert!(rows.iter().all(|r| r[prov] == "exact-engine" && r[cut] == "200"));
}

#[test]
fn divergent_order_is_rejected() {
    let o = run(&["exact", "--d", "4", "--p", "2", "--kappa", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("divergent sum rule for d=4, p=2"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn positivity_bound_is_reported() {
    let o = run(&["exact", "--d", "3", "--p", "2", "--kappa", "2.3"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("positivity bound violated") && msg.contains("2.2214"), "{msg}");
}

#[test]
fn shifted_traces_approach_the_exact_value() {
    let o = run(&["exact", "--d", "3", "--p", "3", "--kappa", "1", "--gamma", "1e-2,1e-3,1e-4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gaps = column(&stdout(&o), "abs_diff");
    assert_eq!(gaps.len(), 3);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn hybrid_d3_sweep_is_accurate() {
    let o = run(&["hybrid", "--d", "3", "--p", "3", "--lmax", "30", "--kappa", "0:2:0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let diffs = column(&stdout(&o), "difference");
    assert_eq!(diffs.len(), 9);
    assert!(diffs.iter().all(|d| d.abs() <= 2e-3));
    let spread = diffs.iter().cloned().fold(f64::MIN, f64::max) - diffs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 2e-3);
}

#[test]
fn hybrid_d5_error_exceeds_d3() {
    let d5 = run(&["hybrid", "--d", "5", "--p", "3", "--lmax", "15", "--kappa", "1"]);
    let d3 = run(&["hybrid", "--d", "3", "--p", "3", "--lmax", "30", "--kappa", "1"]);
    let e5 = column(&stdout(&d5), "difference")[0].abs();
    let e3 = column(&stdout(&d3), "difference")[0].abs();
    assert!(e5 > e3, "{e5} vs {e3}");
}

#[test]
fn delta_scan_is_decreasing() {
    let o = run(&["delta", "--d", "3", "--s", "2", "--lmax", "10:100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let deltas = column(&text, "delta");
    assert_eq!(deltas.len(), 91);
    assert!(deltas.windows(2).all(|w| w[1] < w[0]));
    let (header, rows) = csv(&text);
    let fit = header.iter().position(|h| h == "fit_value").unwrap();
    assert!(rows.iter().all(|r| r[fit].is_empty()));
}

#[test]
fn delta_fit_report_in_json() {
    let o = run(&["delta", "--d", "5", "--s", "3", "--lmax", "4:60:4", "--fit", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let fit = &doc["fit"];
    for key in ["a", "b", "c", "residual"] {
        assert!(fit[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert_eq!(fit["n_samples"].as_u64(), Some(15));
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 15);
    for r in rows {
        let rel = (r["fit_value"].as_f64().unwrap() / r["delta"].as_f64().unwrap() - 1.0).abs();
        assert!(rel < 0.2, "{r}");
    }
}

#[test]
fn delta_below_minimal_order_is_divergent() {
    let o = run(&["delta", "--d", "4", "--s", "2", "--lmax", "10:20"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("divergent"));
}

#[test]
fn spectrum_csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    let o = run(&["spectrum", "--d", "3", "--kappa", "1", "--lmax", "4"]);
    assert!(o.status.success());
    let values = column(&stdout(&o), "E_n");
    let mult = column(&stdout(&o), "multiplicity");
    assert_eq!(values[0], 0.0);
    assert_eq!(mult.iter().sum::<f64>(), 55.0);
    let j = run(&["spectrum", "--d", "3", "--kappa", "1", "--lmax", "4", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(j.status.success() && j.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let from_json: Vec<f64> = doc.as_array().unwrap().iter().map(|r| r["E_n"].as_f64().unwrap()).collect();
    assert_eq!(from_json.len(), values.len());
    for (a, b) in values.iter().zip(&from_json) {
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
    }
}

#[test]
fn coefficient_file_density() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.json");
    std::fs::write(&path, r#"[{"ell": 1, "m": [0, 0], "re": 1.0, "im": 0.0}]"#).unwrap();
    let o = run(&["exact", "--d", "3", "--p", "3", "--coeffs", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let k = run(&["exact", "--d", "3", "--p", "3", "--kappa", "1"]);
    let a = column(&stdout(&o), "value")[0];
    let b = column(&stdout(&k), "value")[0];
    assert!((a - b).abs() < 1e-12);

    std::fs::write(&path, r#"[{"ell": 1, "m": [0, 0], "re": 5.0, "im": 0.0}]"#).unwrap();
    let bad = run(&["exact", "--d", "3", "--p", "3", "--coeffs", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn green_table() {
    let o = run(&["green", "--d", "3", "--q", "1", "--theta", "0.5:2.5:0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(column(&text, "theta").len(), 5);
    assert!(column(&text, "tail_bound").iter().all(|&t| t < 1e-5));
    let o = run(&["green", "--d", "3", "--q", "0", "--theta", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["green", "--d", "3", "--q", "0", "--theta", "1", "--abel"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn validate_suite() {
    let o = run(&["validate"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let (header, rows) = csv(&stdout(&o));
    let passed = header.iter().position(|h| h == "passed").unwrap();
    assert!(rows.len() >= 10 && rows.iter().all(|r| r[passed] == "true"));

    let tight = run(&["validate", "--tolerance", "1e-15"]);
    assert_eq!(tight.status.code(), Some(1));
    let (header, rows) = csv(&stdout(&tight));
    let (p, r) = (header.iter().position(|h| h == "passed").unwrap(), header.iter().position(|h| h == "residual").unwrap());
    let failed: Vec<_> = rows.iter().filter(|row| row[p] == "false").collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|row| row[r].parse::<f64>().unwrap() > 1e-15));

    let only = run(&["validate", "--module", "sumrules"]);
    assert!(only.status.success());
    let (_, rows) = csv(&stdout(&only));
    assert!(rows.iter().all(|r| r[0] == "sumrules"));
    assert_eq!(run(&["validate", "--module", "nope"]).status.code(), Some(1));
}

#[test]
fn output_is_deterministic() {
    let args = ["exact", "--d", "5", "--p", "3", "--kappa", "0:1:0.25", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_exit_with_validation_code() {
    assert_eq!(run(&["exact", "--d", "3"]).status.code(), Some(1));
    assert_eq!(run(&["exact", "--d", "3", "--p", "2", "--kappa", "2:1"]).status.code(), Some(1));
    assert_eq!(run(&["hybrid", "--d", "3", "--p", "3", "--lmax", "4", "--retain", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
