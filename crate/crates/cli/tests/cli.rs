use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ghz(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghz-amp"))
        .args(args)
        .current_dir(dir)
        .env("GHZ_AMP_OUT_DIR", dir.join("out"))
        .output()
        .unwrap()
}

fn json(dir: &Path, args: &[&str]) -> Value {
    let out = ghz(dir, args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn thresholds_values() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(dir.path(), &["thresholds"]);
    assert!((v["r_trivial"].as_f64().unwrap() - 0.792481).abs() < 1e-6);
    assert!((v["r_max"].as_f64().unwrap() - 0.830482).abs() < 1e-6);
    assert!((v["r_h"].as_f64().unwrap() - 0.896241).abs() < 1e-6);
    assert_eq!(v["seed"], 0);
    assert_eq!(v["generator"], "adversary::Thresholds::compute");
    assert!(dir.path().join("out/thresholds.json").exists());
}

#[test]
fn documented_examples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(json(d, &["run", "classical-bound"])["value"], "3/4");
    let v = json(d, &["run", "resend-attack", "--n", "4", "--mode", "exact"]);
    assert_eq!(v["bias"], 0.5);
    assert_eq!(v["abort_prob"], 0.0);
    assert_eq!(v["generator"], "engine::run_exact");
    let v = json(d, &["run", "honest-run", "--n", "2", "--mode", "exact"]);
    assert_eq!(v["bias"], 0.125);
    let v = json(d, &["run", "appendix-bias", "--k", "3", "--s", "2"]);
    assert_eq!(v["closed_form"], "1/16");
    assert_eq!(v["agree"], true);
    let v = json(d, &["run", "extractor-bound", "--n", "8", "--trials", "200", "--seed", "3"]);
    assert_eq!(v["violations"], 0);
    assert_eq!(v["seed"], 3);
}

#[test]
fn risking_attack_reports_guess_probability() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(dir.path(), &["run", "risking-attack", "--n", "2", "--mode", "exact"]);
    assert_eq!(v["leaves"], 16);
    assert_eq!(v["abort_leaves"], 4);
    assert!((v["abort_prob"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((v["p_guess"].as_f64().unwrap() - 0.75).abs() < 1e-12);

    let v = json(dir.path(), &["run", "risking-attack", "--n", "4", "--mode", "exact", "--epsilon", "0.02"]);
    assert!(v["induced_epsilon"].as_f64().unwrap() >= 0.02 - 1e-12);
    let completion = v["completion_prob"].as_f64().unwrap();
    assert!((completion - v["p_guess"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["run", "honest-run", "--n", "6", "--mode", "mc", "--trials", "20000", "--seed", "11"];
    let a = ghz(d, &args);
    let b = ghz(d, &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = ghz(d, &["run", "honest-run", "--n", "6", "--mode", "mc", "--trials", "20000", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);

    let curve = ["bias-curve", "--n", "2,4,6", "--epsilon", "0,0.05", "--seed", "5"];
    assert_eq!(ghz(d, &curve).stdout, ghz(d, &curve).stdout);
}

#[test]
fn bias_curve_rows_stay_below_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(dir.path(), &["bias-curve", "--n", "2,4,6,8", "--epsilon", "0.05,0.1,0.2"]);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 12);
    for row in rows {
        assert_eq!(row["generator"], "adversary::bias_bound");
        if let Some(bias) = row["exact_bias"].as_f64() {
            assert!(bias <= row["bias_bound"].as_f64().unwrap() + 1e-9, "{row}");
        } else {
            assert_eq!(row["epsilon"], 0.2);
        }
    }
}

#[test]
fn csv_format_and_explicit_out() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested/curve.csv");
    let out = ghz(
        dir.path(),
        &["bias-curve", "--n", "2", "--epsilon", "0,0.05", "--format", "csv", "--out", target.to_str().unwrap()],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&target).unwrap();
    assert_eq!(text.as_bytes(), out.stdout.as_slice());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("n,epsilon,p_cheat_bound,bias_bound"));
    assert!(lines[1].ends_with(",0,adversary::bias_bound"));
}

#[test]
fn env_var_sets_default_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = ghz(dir.path(), &["run", "classical-bound", "--format", "csv"]);
    assert!(out.status.success());
    let written = std::fs::read(dir.path().join("out/classical-bound.csv")).unwrap();
    assert_eq!(written, out.stdout);
}

#[test]
fn transcripts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = ghz(
        dir.path(),
        &["run", "resend-attack", "--n", "2", "--mode", "mc", "--trials", "5", "--transcripts", path.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("trial,round,r1r2,xyz,abc,win\n"));
    assert_eq!(text.lines().count(), 1 + 5 * 2);
}

#[test]
fn invalid_input_names_the_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [(&[&str], &str); 6] = [
        (&["run", "resend-attack", "--n", "3", "--mode", "exact"], "adversary::build_resend_tree"),
        (&["run", "honest-run", "--n", "4", "--mode", "mc"], "--trials"),
        (&["run", "honest-run", "--n", "4", "--mode", "mc", "--trials", "0"], "engine::run_montecarlo"),
        (&["run", "appendix-bias", "--k", "2", "--s", "3"], "adversary::resend_bias_closed_form"),
        (&["run", "extractor-bound", "--n", "40", "--trials", "5"], "extractor::flat_family_check"),
        (&["run", "risking-attack", "--n", "2", "--mode", "exact", "--epsilon", "0.5"], "adversary::build_risking_tree"),
    ];
    for (args, needle) in cases {
        let out = ghz(d, args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
        assert!(out.stdout.is_empty());
    }
    let out = ghz(d, &["run", "honest-run", "--mode", "fast"]);
    assert!(!out.status.success());
}
