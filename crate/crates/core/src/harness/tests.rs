use super::*;
use crate::synth::{MarginalSpec, NoiseModel};
use std::f64::consts::PI;

fn gaussian(wstar: Vec<f64>, link: Link, noise: NoiseModel) -> Scenario {
    let d = wstar.len();
    ScenarioSpec::new(MarginalSpec::gaussian(d), wstar, link, noise, 21).build().unwrap()
}

fn fitted(a: f64, b: f64) -> SharpnessOptions {
    SharpnessOptions { trials: 20, seed: 3, activation: ProbeActivation::Fitted { a, b, tol: 1e-9 } }
}

#[test]
fn rotation_has_requested_angle_and_norm() {
    let wstar = vec![0.0, 2.0, 0.0, 0.0];
    for theta in [0.1, 1.0, PI / 2.0, 3.0] {
        let w = rotate_towards_random(&wstar, theta, 1, 2).unwrap();
        assert!((crate::metrics::norm(&w) - 2.0).abs() < 1e-12);
        assert!((crate::metrics::angle(&w, &wstar).unwrap() - theta).abs() < 1e-9);
    }
    assert!(rotate_towards_random(&[0.0, 0.0], 1.0, 1, 2).is_err());
}

#[test]
fn sharpness_vanishes_near_alignment() {
    let sc = gaussian(vec![1.0, 0.0, 0.0], Link::Linear { slope: 1.0 }, NoiseModel::None);
    let r = probe_sharpness(&sc, &[1e-4], 1024, &fitted(1.0, 1.0)).unwrap();
    for (v, c) in r.column("v_norm_sq").unwrap().into_iter().zip(r.column("grad_dot_err").unwrap()) {
        assert!(v.unwrap() < 1e-7);
        assert!(c.unwrap().abs() < 1e-3);
    }
}

#[test]
fn sharpness_is_positive_at_45_degrees() {
    let sc = gaussian(vec![0.6, 0.8, 0.0, 0.0, 0.0], Link::Linear { slope: 1.0 }, NoiseModel::None);
    let opts = SharpnessOptions { trials: 100, ..fitted(1.0, 1.0) };
    let r = probe_sharpness(&sc, &[PI / 4.0], 4096, &opts).unwrap();
    assert!(r.stat("frac_positive[45.0]").unwrap() >= 0.95);
    assert_eq!(r.rows.len(), 100);
}

#[test]
fn frozen_activation_points_the_wrong_way() {
    let sc = gaussian(vec![1.0, 0.0, 0.0, 0.0], Link::Linear { slope: 1.0 }, NoiseModel::None);
    let opts = SharpnessOptions {
        activation: ProbeActivation::Fixed(Activation::linear(4.0, 0.0, 4.0).unwrap()),
        ..fitted(1.0, 4.0)
    };
    // Fixed u(z) = 4z at ‖w‖ = ‖w*‖ overshoots along w, so g·(w − w*) stays positive;
    // the failure needs the shrunken w = w*/2, checked through the example below.
    let r = probe_sharpness(&sc, &[0.5], 4096, &opts).unwrap();
    assert_eq!(r.rows.len(), 20);
    let ex = example_negative_correlation(4, 1.0, 4.0, 200_000, 5).unwrap();
    assert!(ex.estimate.mean < 0.0);
    assert!(ex.z_score().abs() < 4.0, "{ex:?}");
}

#[test]
fn sharpness_guards() {
    let sc = gaussian(vec![1.0, 0.0], Link::Relu, NoiseModel::None);
    assert!(probe_sharpness(&sc, &[0.5], 100, &fitted(0.5, 1.0)).is_err());
    assert!(probe_sharpness(&sc, &[0.0], 512, &fitted(0.5, 1.0)).is_err());
    assert!(probe_sharpness(&sc, &[PI], 512, &fitted(0.5, 1.0)).is_err());
    let zero = gaussian(vec![0.0, 0.0], Link::Relu, NoiseModel::None);
    assert!(probe_sharpness(&zero, &[0.5], 512, &fitted(0.5, 1.0)).is_err());
}

fn family() -> Vec<Activation> {
    default_family()
        .iter()
        .map(|l| {
            let (a, b) = l.class_bounds();
            l.to_activation(a, b).unwrap()
        })
        .collect()
}

#[test]
fn misalignment_parallel_row_is_degenerate() {
    let sc = gaussian(vec![1.0, 0.0, 0.0], Link::Linear { slope: 1.0 }, NoiseModel::None);
    let r = probe_misalignment(&sc, &family(), &[0.0, PI / 2.0], 10_000, 1).unwrap();
    // Row order: f-major, angle-minor. The identity at angle 0 reproduces u*.
    let identity_parallel = 2;
    assert!(r.degenerate[identity_parallel]);
    assert_eq!(r.rows[identity_parallel][2], Some(0.0));
    assert_eq!(r.rows[identity_parallel][5], None);
}

#[test]
fn zero_function_at_right_angle_has_unit_ratio() {
    let sc = gaussian(vec![0.0, 1.0, 0.0], Link::Linear { slope: 1.0 }, NoiseModel::None);
    let r = probe_misalignment(&sc, &family()[..1], &[PI / 2.0], 200_000, 2).unwrap();
    let row = &r.rows[0];
    let (err, se, v_sq) = (row[2].unwrap(), row[3].unwrap(), row[4].unwrap());
    assert!((v_sq - 1.0).abs() < 1e-12);
    assert!((err - 1.0).abs() <= 3.0 * se, "{err} ± {se}");
    assert!((row[5].unwrap() - err).abs() < 1e-9);
}

#[test]
fn misalignment_needs_enough_samples() {
    let sc = gaussian(vec![1.0, 0.0], Link::Relu, NoiseModel::None);
    assert!(probe_misalignment(&sc, &family(), &[0.5], 9_999, 1).is_err());
}

fn linear_contraction_config() -> LearnerConfig {
    LearnerConfig { a: 1.0, b: 1.0, mu: Some(1.0), eps: 1e-6, t_cap: 10, m_batch: 1024, ..Default::default() }
}

#[test]
fn realizable_linear_scenario_contracts() {
    let sc = gaussian(vec![1.0, 0.0, 0.0, 0.0, 0.0], Link::Linear { slope: 1.0 }, NoiseModel::None);
    let opts = ContractionOptions { seeds: 20, init_angle: PI / 3.0, opt_proxy: Some(0.0) };
    let r = probe_contraction(&sc, &linear_contraction_config(), &opts).unwrap();
    assert!(r.stat("eligible_steps").unwrap() > 0.0);
    assert!(r.stat("contracting_fraction").unwrap() >= 0.8, "{:?}", r.summary);
}

#[test]
fn zero_step_gives_unit_ratios() {
    let sc = gaussian(vec![1.0, 0.0, 0.0], Link::Relu, NoiseModel::None);
    let cfg = LearnerConfig { eta_opt: Some(0.0), ..linear_contraction_config() };
    let opts = ContractionOptions { seeds: 3, init_angle: 1.0, opt_proxy: Some(0.0) };
    let r = probe_contraction(&sc, &cfg, &opts).unwrap();
    for ratio in r.column("ratio").unwrap() {
        assert!((ratio.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn contraction_rejects_zero_target() {
    let sc = gaussian(vec![0.0, 0.0], Link::Relu, NoiseModel::None);
    let opts = ContractionOptions { seeds: 1, init_angle: 1.0, opt_proxy: Some(0.0) };
    assert!(probe_contraction(&sc, &linear_contraction_config(), &opts).is_err());
}

fn tiny_experiment(dir: &Path) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "scenario": {{
                "marginal": {{"kind": "gaussian_isotropic", "dim": 3}},
                "target": {{"wstar": [1.0, 0.0, 0.0], "link": {{"kind": "relu"}}}},
                "noise": {{"kind": "zero_out", "p": 0.1}},
                "seed": 4
            }},
            "learner": {{"t0_cap": 2, "T_cap": 3, "J_cap": 3, "m_batch": 128, "m_init": 128, "m_test": 256}},
            "probes": [
                {{"kind": "sharpness", "angles_deg": [30], "m": 256, "trials": 3}},
                {{"kind": "misalignment", "angles_deg": [0, 45], "n_mc": 10000}},
                {{"kind": "contraction", "seeds": 2}}
            ],
            "output": {{"dir": {:?}, "eval_samples": 2000, "opt_samples": 2000}}
        }}"#,
        dir.to_str().unwrap()
    );
    serde_json::from_str(&text).unwrap()
}

#[test]
fn summary_has_every_key() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_experiment(&tiny_experiment(tmp.path())).unwrap();
    let obj = report.summary.as_object().unwrap();
    for key in SUMMARY_KEYS {
        assert!(obj.contains_key(key), "missing {key}");
    }
    assert_eq!(obj.len(), SUMMARY_KEYS.len());
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report.summary);
    assert_eq!(obj["probes"].as_array().unwrap().len(), 3);
    let h: crate::hypothesis::Hypothesis =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("hypothesis.json")).unwrap()).unwrap();
    assert_eq!(h, report.learned.unwrap().hypothesis);
}

#[test]
fn csv_outputs_are_rectangular() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_experiment(&tiny_experiment(tmp.path())).unwrap();
    for f in report.files.iter().filter(|f| f.extension().unwrap() == "csv") {
        let mut rdr = csv::Reader::from_path(f).unwrap();
        let width = rdr.headers().unwrap().len();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), width, "{f:?}");
            assert!(!rec.iter().any(|c| c.contains("NaN")));
            rows += 1;
        }
        assert!(rows > 0, "{f:?} is empty");
    }
}

#[test]
fn repeated_runs_write_identical_files() {
    let (t1, t2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run_experiment(&tiny_experiment(t1.path())).unwrap();
    run_experiment(&tiny_experiment(t2.path())).unwrap();
    for f in &r1.files {
        let name = f.file_name().unwrap();
        let a = fs::read(f).unwrap();
        let b = fs::read(t2.path().join(name)).unwrap();
        if name == "summary.json" {
            // Only the output directory differs.
            let strip = |v: &[u8]| {
                String::from_utf8(v.to_vec())
                    .unwrap()
                    .replace(t1.path().to_str().unwrap(), "")
                    .replace(t2.path().to_str().unwrap(), "")
            };
            assert_eq!(strip(&a), strip(&b));
        } else {
            assert_eq!(a, b, "{name:?}");
        }
    }
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    let good = serde_json::to_string(&tiny_experiment(tmp.path())).unwrap();
    fs::write(&path, good.replace("\"m_batch\"", "\"m_bacth\"")).unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let missing = ExperimentConfig::load(&tmp.path().join("nope.json")).unwrap_err();
    assert_eq!(missing.exit_code(), 2);
}

#[test]
fn approximation_factor_needs_positive_opt() {
    let loss = Estimate { mean: 0.06, se: 0.001 };
    assert_eq!(approximation_factor(loss, Estimate { mean: 0.0, se: 0.0 }, 0.01), None);
    let c = approximation_factor(loss, Estimate { mean: 0.05, se: 0.0 }, 0.01).unwrap();
    assert!((c.mean - 1.0).abs() < 1e-12);
    assert!((c.se - 0.02).abs() < 1e-12);
}
