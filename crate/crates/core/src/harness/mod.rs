//! Experiment configuration, probes and result files.
//!
//! An experiment is a JSON document with `scenario`, `learner`, `probes` and
//! `output` sections; unknown keys anywhere are rejected. Running it trains
//! on the scenario and/or runs the listed probes, then writes (under
//! `output.dir`):
//!
//! * `summary.json`: the keys in [`SUMMARY_KEYS`];
//! * `hypothesis.json`: the selected hypothesis;
//! * `candidates.csv`, `trace.csv`: the candidate pool and per-step log;
//! * `probe_<i>_<kind>.csv`: one table per probe, in configuration order.
//!
//! All files are a deterministic function of the configuration.

mod probes;
mod table;

pub use probes::{
    example_negative_correlation, probe_contraction, probe_misalignment, probe_sharpness, rotate_towards_random,
    ContractionOptions, ExampleReport, ProbeActivation, SharpnessOptions, DEGENERATE_V_SQ,
};
pub use table::{ProbeMeta, ProbeResult};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::activation::{Activation, Link};
use crate::config::LearnerConfig;
use crate::error::{Error, Result};
use crate::learner::{learn, LearnOutput, SampleSource, TraceRecord};
use crate::rng::{stream_id, tag};
use crate::synth::{estimate_opt, Estimate, Scenario, ScenarioSpec};
use table::fmt_cell;

/// Keys of `summary.json`, always all present (`null` when not applicable).
pub const SUMMARY_KEYS: [&str; 14] = [
    "scenario",
    "learner",
    "trained",
    "selected",
    "test_loss",
    "final_loss",
    "final_loss_se",
    "opt_proxy",
    "opt_proxy_se",
    "c_emp",
    "c_emp_se",
    "eps",
    "n_candidates",
    "probes",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Run the learner (otherwise only probes).
    #[serde(default = "default_true")]
    pub train: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Fresh samples for the final loss.
    pub eval_samples: usize,
    /// Samples for the OPT proxy.
    pub opt_samples: usize,
    pub write_trace: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), eval_samples: 100_000, opt_samples: 100_000, write_trace: true }
    }
}

/// One probe to run; angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSpec {
    Sharpness {
        angles_deg: Vec<f64>,
        m: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        /// Freeze the activation at `u(z) = slope·z` instead of fitting it.
        #[serde(default)]
        fixed_slope: Option<f64>,
    },
    Misalignment {
        angles_deg: Vec<f64>,
        n_mc: usize,
        #[serde(default = "default_family")]
        family: Vec<Link>,
    },
    Contraction {
        seeds: usize,
        #[serde(default = "default_init_angle")]
        init_angle_deg: f64,
        #[serde(default)]
        opt_proxy: Option<f64>,
    },
}

fn default_trials() -> usize {
    100
}

fn default_init_angle() -> f64 {
    60.0
}

/// `f ≡ 0`, the identity and the ramp `max(z, −1)`.
pub fn default_family() -> Vec<Link> {
    vec![Link::Linear { slope: 0.0 }, Link::Linear { slope: 1.0 }, Link::SaturatingRamp]
}

impl ProbeSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProbeSpec::Sharpness { .. } => "sharpness",
            ProbeSpec::Misalignment { .. } => "misalignment",
            ProbeSpec::Contraction { .. } => "contraction",
        }
    }

    /// Runs the probe against `scenario`, with seeds and class from `learner`.
    pub fn run(&self, scenario: &Scenario, learner: &LearnerConfig) -> Result<ProbeResult> {
        match self {
            ProbeSpec::Sharpness { angles_deg, m, trials, fixed_slope } => {
                let activation = match fixed_slope {
                    Some(s) => ProbeActivation::Fixed(Activation::linear(*s, 0.0, s.max(0.0))?),
                    None => ProbeActivation::Fitted { a: learner.a, b: learner.b, tol: learner.fit_tol },
                };
                let opts = SharpnessOptions { trials: *trials, seed: learner.seed, activation };
                probe_sharpness(scenario, &radians(angles_deg), *m, &opts)
            }
            ProbeSpec::Misalignment { angles_deg, n_mc, family } => {
                let fs = family
                    .iter()
                    .map(|l| {
                        let (a, b) = l.class_bounds();
                        l.to_activation(a, b)
                    })
                    .collect::<Result<Vec<_>>>()?;
                probe_misalignment(scenario, &fs, &radians(angles_deg), *n_mc, learner.seed)
            }
            ProbeSpec::Contraction { seeds, init_angle_deg, opt_proxy } => {
                let opts = ContractionOptions {
                    seeds: *seeds,
                    init_angle: init_angle_deg.to_radians(),
                    opt_proxy: *opt_proxy,
                };
                probe_contraction(scenario, learner, &opts)
            }
        }
    }
}

fn radians(deg: &[f64]) -> Vec<f64> {
    deg.iter().map(|d| d.to_radians()).collect()
}

impl ExperimentConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.build()?;
        self.learner.validate()?;
        if self.output.eval_samples == 0 {
            return Err(Error::InvalidConfig("output.eval_samples must be at least 1".into()));
        }
        if self.output.opt_samples < 1000 {
            return Err(Error::InvalidConfig("output.opt_samples must be at least 1000".into()));
        }
        Ok(())
    }
}

/// In-memory outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Value,
    pub learned: Option<LearnOutput>,
    pub probes: Vec<ProbeResult>,
    pub files: Vec<PathBuf>,
}

/// Squared loss on a fresh evaluation batch, with standard error.
pub fn evaluate(h: &crate::hypothesis::Hypothesis, source: &dyn SampleSource, m: usize, seed: u64) -> Result<Estimate> {
    let data = source.draw(m, stream_id(&[seed, tag::EVAL]))?;
    let proj = data.project(&h.w)?;
    Ok(Estimate::from_values(proj.iter().zip(data.labels()).map(|(&p, &y)| (h.activation.eval(p) - y).powi(2))))
}

/// `(loss − ε)/OPT` with a delta-method standard error.
pub fn approximation_factor(loss: Estimate, opt: Estimate, eps: f64) -> Option<Estimate> {
    if !(opt.mean > 0.0) {
        return None;
    }
    let mean = (loss.mean - eps) / opt.mean;
    let se = ((loss.se / opt.mean).powi(2) + ((loss.mean - eps) * opt.se / (opt.mean * opt.mean)).powi(2)).sqrt();
    Some(Estimate { mean, se })
}

/// Trains and/or probes, then writes every output file.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let scenario = config.scenario.build()?;
    let learner = &config.learner;
    let opt = estimate_opt(&config.scenario, config.output.opt_samples)?;

    let learned = if config.train { Some(learn(learner, &scenario)?) } else { None };
    let final_loss = match &learned {
        Some(out) => Some(evaluate(&out.hypothesis, &scenario, config.output.eval_samples, learner.seed)?),
        None => None,
    };
    let c_emp = final_loss.and_then(|l| approximation_factor(l, opt, learner.eps));
    let probes = config.probes.iter().map(|p| p.run(&scenario, learner)).collect::<Result<Vec<_>>>()?;

    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut probe_entries = Vec::new();
    for (i, p) in probes.iter().enumerate() {
        let name = format!("probe_{i}_{}.csv", p.name);
        let path = dir.join(&name);
        p.write_csv(BufWriter::new(fs::File::create(&path)?))?;
        files.push(path);
        let summary: serde_json::Map<String, Value> = p.summary.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        probe_entries.push(json!({ "kind": p.name, "file": name, "rows": p.rows.len(), "summary": summary }));
    }

    let selected = learned.as_ref().map(|out| {
        let c = &out.candidates.candidates[out.selection.index];
        json!({
            "index": out.selection.index,
            "restart": c.task.map(|t| t.restart),
            "grid": c.task.map(|t| t.grid),
            "beta": c.beta,
            "hypothesis": c.hypothesis,
        })
    });
    let summary = json!({
        "scenario": config.scenario,
        "learner": learner,
        "trained": config.train,
        "selected": selected,
        "test_loss": learned.as_ref().map(|o| o.selection.losses[o.selection.index]),
        "final_loss": final_loss.map(|e| e.mean),
        "final_loss_se": final_loss.map(|e| e.se),
        "opt_proxy": opt.mean,
        "opt_proxy_se": opt.se,
        "c_emp": c_emp.map(|e| e.mean),
        "c_emp_se": c_emp.map(|e| e.se),
        "eps": learner.eps,
        "n_candidates": learned.as_ref().map(|o| o.candidates.len()),
        "probes": probe_entries,
    });

    if let Some(out) = &learned {
        let path = dir.join("hypothesis.json");
        fs::write(&path, serde_json::to_string_pretty(&out.hypothesis)? + "\n")?;
        files.push(path);
        let path = dir.join("candidates.csv");
        write_candidates(out, BufWriter::new(fs::File::create(&path)?))?;
        files.push(path);
        if config.output.write_trace {
            let path = dir.join("trace.csv");
            write_trace(&out.trace, BufWriter::new(fs::File::create(&path)?))?;
            files.push(path);
        }
    }
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    files.push(path);

    Ok(ExperimentReport { summary, learned, probes, files })
}

fn opt_cell(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(fmt_cell).unwrap_or_default()
}

/// `index,restart,grid,beta,w_norm,test_loss`; the zero hypothesis has
/// empty provenance cells.
pub fn write_candidates<W: Write>(out: &LearnOutput, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "restart", "grid", "beta", "w_norm", "test_loss"])?;
    for (i, (c, loss)) in out.candidates.candidates.iter().zip(&out.selection.losses).enumerate() {
        wtr.write_record([
            i.to_string(),
            c.task.map(|t| t.restart.to_string()).unwrap_or_default(),
            c.task.map(|t| t.grid.to_string()).unwrap_or_default(),
            fmt_cell(c.beta),
            fmt_cell(c.hypothesis.norm()),
            fmt_cell(*loss),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One line per [`TraceRecord`]; unknown quantities are empty cells.
pub fn write_trace<W: Write>(trace: &[TraceRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "restart",
        "grid",
        "beta",
        "t",
        "w_norm",
        "misalignment",
        "loss",
        "grad_norm",
        "grad_dot_err",
        "step_err",
    ])?;
    for r in trace {
        wtr.write_record([
            r.restart.to_string(),
            r.grid.to_string(),
            fmt_cell(r.beta),
            r.t.to_string(),
            fmt_cell(r.w_norm),
            opt_cell(r.misalignment),
            fmt_cell(r.loss),
            fmt_cell(r.grad_norm),
            opt_cell(r.grad_dot_err),
            opt_cell(r.step_err),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
