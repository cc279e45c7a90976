use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agnostic-sim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path) -> String {
    let cfg = r#"{
        "scenario": {
            "marginal": {"kind": "gaussian_isotropic", "dim": 3},
            "target": {"wstar": [0.0, 1.0, 0.0], "link": {"kind": "leaky_relu", "slope": 0.5}},
            "seed": 2
        },
        "learner": {"t0_cap": 2, "T_cap": 3, "J_cap": 2, "m_batch": 256, "m_init": 256, "m_test": 512},
        "probes": [{"kind": "misalignment", "angles_deg": [10, 80], "n_mc": 10000}],
        "output": {"eval_samples": 5000, "opt_samples": 5000}
    }"#;
    let path = dir.join("exp.json");
    fs::write(&path, cfg).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_fit_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().to_str().unwrap();
    let gen = run(&["gen", "--config", &cfg, "--out", out, "-n", "500"]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let data = tmp.path().join("data.csv");
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 501);

    let data_s = data.to_str().unwrap();
    let fit = ok_json(&run(&["fit", "--data", data_s, "--w", "0,1,0", "--a", "0.5", "--b", "1", "--out", out]));
    assert!(fit["train_loss"].as_f64().unwrap() < 1e-12);

    let h = tmp.path().join("hypothesis.json");
    let eval = ok_json(&run(&["eval", "--hypothesis", h.to_str().unwrap(), "--data", data_s]));
    assert_eq!(eval["n"], 500);
    assert!((eval["loss"].as_f64().unwrap() - fit["train_loss"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn train_writes_summary_and_respects_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (d1, d2) = (tmp.path().join("w1"), tmp.path().join("w3"));
    ok_json(&run(&["train", "--config", &cfg, "--out", d1.to_str().unwrap(), "--workers", "1"]));
    ok_json(&run(&["train", "--config", &cfg, "--out", d2.to_str().unwrap(), "--workers", "3"]));
    for f in ["hypothesis.json", "candidates.csv", "trace.csv"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(d1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trained"], true);
    assert!(summary["probes"].as_array().unwrap().is_empty());
}

#[test]
fn train_on_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().to_str().unwrap();
    assert!(run(&["gen", "--config", &cfg, "--out", out, "-n", "2000"]).status.success());
    let data = tmp.path().join("data.csv");
    let res = ok_json(&run(&["train", "--data", data.to_str().unwrap(), "--config", &cfg, "--out", out]));
    assert!(res["test_loss"].as_f64().unwrap() < 0.05);
    assert!(tmp.path().join("hypothesis.json").exists());
}

#[test]
fn probe_runs_configured_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let res = ok_json(&run(&["probe", "misalignment", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]));
    let probes = res["probes"].as_array().unwrap();
    assert_eq!(probes.len(), 1);
    assert!(probes[0]["summary"]["min_ratio"].as_f64().unwrap() > 0.0);
    assert!(tmp.path().join("probe_0_misalignment.csv").exists());
}

#[test]
fn repro_example_matches_closed_form() {
    let res = ok_json(&run(&["repro-example", "-m", "200000", "--seed", "3"]));
    assert!(res["estimate"].as_f64().unwrap() < 0.0);
    assert!(res["z"].as_f64().unwrap().abs() < 4.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = run(&["train", "--config", tmp.path().join("none.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, fs::read_to_string(write_config(tmp.path())).unwrap().replace("T_cap", "T_cpa")).unwrap();
    assert_eq!(run(&["train", "--config", bad.to_str().unwrap()]).status.code(), Some(1));

    let no_config = run(&["gen"]);
    assert_eq!(no_config.status.code(), Some(1));
}
