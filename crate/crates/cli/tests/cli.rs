use std::process::Command;

use boundent::game::paper_strategy_d3;
use boundent::qobjects::DensityMatrix;
use serde_json::Value;

fn boundent(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_boundent")).arg("--json").args(args).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json)
}

fn num(v: &Value, key: &str) -> f64 {
    v["results"][key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

#[test]
fn verify_state_reports_rank_ppt_and_ccnr() {
    let (code, r) = boundent(&["verify-state"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["rank"], 7);
    assert_eq!(r["results"]["ppt"], true);
    assert!((num(&r, "ccnr") - 1.16646).abs() < 1e-5);
    assert_eq!(r["command"], "verify-state");
    assert!(r["version"].is_string());
}

#[test]
fn eval_paper_strategy_with_and_without_noise() {
    let (code, r) = boundent(&["eval", "--d", "3", "--strategy", "paper"]);
    assert_eq!(code, 0);
    assert!((num(&r, "value") - 0.538675).abs() < 1e-6);
    assert_eq!(r["results"]["violation"], true);

    let (_, r) = boundent(&["eval", "--noise", "0.5"]);
    let expected = (3.0 + 2.0 * 3f64.sqrt() - (2.0 * 3f64.sqrt() - 1.0) * 0.5) / 12.0;
    assert!((num(&r, "value") - expected).abs() < 1e-9);
}

#[test]
fn eval_strategy_file_with_maximally_mixed_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.json");
    let s = paper_strategy_d3().with_state(DensityMatrix::maximally_mixed(3, 3));
    std::fs::write(&path, serde_json::to_string(&s).unwrap()).unwrap();
    let (code, r) = boundent(&["eval", "--strategy", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((num(&r, "value") - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(r["results"]["violation"], false);

    std::fs::write(&path, "{ not json").unwrap();
    let (code, r) = boundent(&["eval", "--strategy", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(r["error"].as_str().unwrap().contains("malformed"));
}

#[test]
fn noise_sweep_writes_csv_and_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let (code, r) = boundent(&["noise-sweep", "--steps", "11", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((num(&r, "threshold") - 0.188345).abs() < 1e-6);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "nu,value,violated");
    assert_eq!(lines.len(), 12);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert!((first[1].parse::<f64>().unwrap() - 0.538675).abs() < 1e-6);
    let last: Vec<&str> = lines[11].split(',').collect();
    assert_eq!(last[0], "1");
    assert!((last[1].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(last[2], "false");

    let (code, _) = boundent(&["noise-sweep", "--steps", "1"]);
    assert_eq!(code, 1);
}

#[test]
fn classical_d3_is_one_half() {
    let (code, r) = boundent(&["classical", "--d", "3"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["ratio"], "162/324");
    assert_eq!(num(&r, "value"), 0.5);
    assert_eq!(r["results"]["classes"], 3281);
    assert_eq!(r["results"]["first_digit_optimal"], true);
    assert_eq!(boundent(&["classical", "--d", "5"]).0, 1);
}

#[test]
fn seesaw_is_reproducible_and_writes_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let args = ["seesaw", "--d", "3", "--restarts", "3", "--seed", "7", "--out", out.to_str().unwrap()];
    let (code, a) = boundent(&args);
    assert_eq!(code, 0);
    let (_, b) = boundent(&args);
    assert_eq!(a["results"]["restart_values"], b["results"]["restart_values"]);
    assert!(out.join("manifest.json").exists());
    let (code, e) = boundent(&["eval", "--strategy", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((num(&e, "value") - num(&a, "best_value")).abs() < 1e-9);
}

#[test]
fn bound_d3_with_certificate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let sdpa = dir.path().join("reduced.dat-s");
    let (code, r) =
        boundent(&["bound", "--d", "3", "--certificate", cert.to_str().unwrap(), "--sdpa", sdpa.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((num(&r, "primal_value") - 0.5).abs() < 1e-6);
    assert!((num(&r, "dual_value") - 0.5).abs() < 1e-6);
    assert!(num(&r, "certified_bound") <= 0.5 + 1e-6);
    assert!(std::fs::metadata(&sdpa).unwrap().len() > 0);

    let (code, v) = boundent(&["verify-certificate", "--d", "3", "--certificate", cert.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(num(&v, "certified_bound"), num(&r, "certified_bound"));

    // a corrupted certificate is a numerical failure
    let mut c: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    c["objective"] = Value::from(0.4);
    std::fs::write(&cert, c.to_string()).unwrap();
    let (code, v) = boundent(&["verify-certificate", "--d", "3", "--certificate", cert.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains("stored objective"));
}

#[test]
fn bound_argument_errors() {
    assert_eq!(boundent(&["bound", "--d", "4"]).0, 1);
    assert_eq!(boundent(&["bound", "--d", "5", "--no-symmetrize"]).0, 1);
    assert_eq!(boundent(&["eval", "--noise", "1.5"]).0, 1);
    let out = Command::new(env!("CARGO_BIN_EXE_boundent")).args(["eval", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bound_d3_unsymmetrized_matches() {
    let (code, r) = boundent(&["bound", "--d", "3", "--no-symmetrize", "--tol", "1e-9"]);
    assert_eq!(code, 0);
    assert!((num(&r, "primal_value") - 0.5).abs() < 2e-6);
    assert_eq!(r["results"]["size"], 139);
}
