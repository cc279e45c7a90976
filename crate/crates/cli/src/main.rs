//! Command-line driver.
//!
//! Exit codes: 0 on success, 1 for invalid configuration or arguments,
//! 2 for I/O failures.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agnostic_sim::harness::{
    example_negative_correlation, run_experiment, write_candidates, write_trace, ExperimentConfig, ProbeSpec,
};
use agnostic_sim::learner::{learn, Bootstrap};
use agnostic_sim::metrics::l2_loss;
use agnostic_sim::synth::Estimate;
use agnostic_sim::{fit_activation, Dataset, Error, Hypothesis, LearnerConfig, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "agnostic-sim", version, about = "Single-index model learning under agnostic label noise")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario and learner seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from the configured scenario and write `data.csv`.
    Gen {
        #[arg(short = 'n', long, default_value_t = 1000)]
        samples: usize,
    },
    /// Fit an activation to a dataset projected on a fixed direction.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated direction.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
    },
    /// Run the full learner.
    ///
    /// With `--data`, batches are bootstrap resamples of the CSV and the
    /// learner section comes from `--config` (a learner-only JSON or a full
    /// experiment). Otherwise the configured experiment is run without probes.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the configured probes of one kind (defaults if none are configured).
    Probe { kind: ProbeKind },
    /// Squared loss of a stored hypothesis on a dataset.
    Eval {
        #[arg(long)]
        hypothesis: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fixed activation `u(z) = b·z` at `w = w*/2`: estimates
    /// `∇L_sur(w)·(w − w*)` and its closed form.
    ReproExample {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 4.0)]
        b: f64,
        #[arg(short = 'm', long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbeKind {
    Sharpness,
    Misalignment,
    Contraction,
}

impl ProbeKind {
    fn default_spec(self) -> ProbeSpec {
        match self {
            ProbeKind::Sharpness => ProbeSpec::Sharpness {
                angles_deg: vec![15.0, 30.0, 60.0, 90.0],
                m: 4096,
                trials: 100,
                fixed_slope: None,
            },
            ProbeKind::Misalignment => ProbeSpec::Misalignment {
                angles_deg: vec![5.0, 15.0, 30.0, 60.0, 90.0],
                n_mc: 100_000,
                family: agnostic_sim::harness::default_family(),
            },
            ProbeKind::Contraction => ProbeSpec::Contraction { seeds: 20, init_angle_deg: 60.0, opt_proxy: None },
        }
    }

    fn name(self) -> &'static str {
        match self {
            ProbeKind::Sharpness => "sharpness",
            ProbeKind::Misalignment => "misalignment",
            ProbeKind::Contraction => "contraction",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.common.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("cannot build worker pool: {e}"))),
        },
        None => run(&cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Gen { samples } => {
            let cfg = experiment(c)?;
            let data = cfg.scenario.build()?.sample(*samples, 0)?;
            let path = out_dir(c, &cfg)?.join("data.csv");
            data.write_csv(BufWriter::new(File::create(&path)?))?;
            println!("{}", path.display());
        }
        Command::Fit { data, w, a, b } => {
            let data = read_dataset(data)?;
            if w.len() != data.dim() {
                return Err(Error::DimensionMismatch { expected: data.dim(), got: w.len() });
            }
            let u = fit_activation(&data.project(w)?, data.labels(), *a, *b, LearnerConfig::default().fit_tol)?;
            let h = Hypothesis::new(w.clone(), u);
            let loss = l2_loss(&h, &data)?;
            emit_json(c, "hypothesis.json", &serde_json::to_value(&h)?)?;
            println!("{}", json!({ "train_loss": loss }));
        }
        Command::Train { data: Some(path) } => {
            let data = read_dataset(path)?;
            let mut learner = learner_config(c)?;
            if let Some(s) = c.seed {
                learner.seed = s;
            }
            learner.validate()?;
            let source = Bootstrap::new(data, learner.seed);
            let out = learn(&learner, &source)?;
            let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            fs::create_dir_all(&dir)?;
            write_json(&dir.join("hypothesis.json"), &serde_json::to_value(&out.hypothesis)?)?;
            write_candidates(&out, BufWriter::new(File::create(dir.join("candidates.csv"))?))?;
            write_trace(&out.trace, BufWriter::new(File::create(dir.join("trace.csv"))?))?;
            println!(
                "{}",
                json!({ "selected": out.selection.index, "test_loss": out.selection.losses[out.selection.index] })
            );
        }
        Command::Train { data: None } => {
            let mut cfg = experiment(c)?;
            cfg.train = true;
            cfg.probes.clear();
            report(run_experiment(&cfg)?.summary);
        }
        Command::Probe { kind } => {
            let mut cfg = experiment(c)?;
            cfg.train = false;
            cfg.probes.retain(|p| p.kind() == kind.name());
            if cfg.probes.is_empty() {
                cfg.probes.push(kind.default_spec());
            }
            report(run_experiment(&cfg)?.summary);
        }
        Command::Eval { hypothesis, data } => {
            let h: Hypothesis = serde_json::from_reader(BufReader::new(File::open(hypothesis)?))?;
            let data = read_dataset(data)?;
            if h.w.len() != data.dim() {
                return Err(Error::DimensionMismatch { expected: h.w.len(), got: data.dim() });
            }
            let est = Estimate::from_values(data.iter().map(|(x, y)| (h.predict(x) - y).powi(2)));
            println!("{}", json!({ "loss": est.mean, "se": est.se, "n": data.len() }));
        }
        Command::ReproExample { dim, a, b, samples } => {
            let r = example_negative_correlation(*dim, *a, *b, *samples, c.seed.unwrap_or(0))?;
            let value = json!({
                "estimate": r.estimate.mean,
                "se": r.estimate.se,
                "expected": r.expected,
                "z": r.z_score(),
            });
            if c.out.is_some() {
                emit_json(c, "repro_example.json", &value)?;
            }
            println!("{value}");
        }
    }
    Ok(())
}

fn experiment(c: &Common) -> Result<ExperimentConfig> {
    let path = c.config.as_ref().ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = c.seed {
        cfg.scenario.seed = s;
        cfg.learner.seed = s;
    }
    if let Some(dir) = &c.out {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Learner section from `--config`: a bare learner object or a full experiment.
fn learner_config(c: &Common) -> Result<LearnerConfig> {
    let Some(path) = &c.config else {
        return Ok(LearnerConfig::default());
    };
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if value.get("scenario").is_some() {
        return Ok(serde_json::from_value::<ExperimentConfig>(value)?.learner);
    }
    Ok(serde_json::from_value(value)?)
}

fn out_dir(c: &Common, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(BufReader::new(File::open(path)?))
}

fn emit_json(c: &Common, name: &str, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(name), value)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn report(summary: serde_json::Value) {
    let keys = ["final_loss", "opt_proxy", "c_emp", "test_loss", "n_candidates"];
    let brief: serde_json::Map<_, _> =
        keys.iter().filter_map(|k| summary.get(*k).map(|v| (k.to_string(), v.clone()))).collect();
    let probes = summary.get("probes").cloned().unwrap_or_default();
    println!("{}", json!({ "summary": brief, "probes": probes }));
}
