//! The learning pipeline: initialization, scale-grid optimization and
//! held-out selection.
//!
//! Every batch is requested from a [`SampleSource`] under a stream id built
//! from `(seed, phase, restart, grid index, step)`, so results are
//! bit-identical regardless of how the `(restart, scale)` tasks are
//! scheduled across threads.

mod source;

pub use source::{truncate_label, Bootstrap, Reuse, SampleSource, Truncated};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::config::LearnerConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit_activation, fit_activation_with_values};
use crate::hypothesis::Hypothesis;
use crate::metrics::{dot, misalignment, norm, scale, sub, KahanSum};
use crate::rng::{rng_for, stream_id, tag};
use crate::surrogate::{gradient_at_fitted, GradientReport};

/// Identifies one `(restart, scale)` task of the optimization phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskId {
    pub restart: usize,
    pub grid: usize,
}

/// One row of the optimization log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub restart: usize,
    pub grid: usize,
    pub beta: f64,
    pub t: usize,
    /// `‖ŵᵗ‖`.
    pub w_norm: f64,
    /// `‖(w*)^{⊥ŵᵗ}‖` when the source knows `w*`.
    pub misalignment: Option<f64>,
    /// Empirical squared loss of `(ŵᵗ, ûᵗ)` on the step's batch.
    pub loss: f64,
    pub grad_norm: f64,
    /// `g·(ŵᵗ − w*)`.
    pub grad_dot_err: Option<f64>,
    /// `‖w̄ᵗ⁺¹ − w*‖`; absent on the final row, which takes no step.
    pub step_err: Option<f64>,
}

/// A pool member with its provenance. The zero hypothesis has no task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub hypothesis: Hypothesis,
    pub task: Option<TaskId>,
    pub beta: f64,
}

/// Endpoints of all inner loops; index 0 is always the zero hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn with_zero(dim: usize, a: f64, b: f64) -> Self {
        Self { candidates: vec![Candidate { hypothesis: Hypothesis::zero(dim, a, b), task: None, beta: 0.0 }] }
    }

    pub fn push(&mut self, c: Candidate) {
        self.candidates.push(c);
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = &Hypothesis> {
        self.candidates.iter().map(|c| &c.hypothesis)
    }
}

/// Fits the best activation in `U(a,b)` to the batch projected on `w`.
pub fn fit_on_batch(w: &[f64], data: &Dataset, config: &LearnerConfig) -> Result<Activation> {
    let proj = data.project(w)?;
    fit_activation(&proj, data.labels(), config.a, config.b, config.fit_tol)
}

/// Fitted activation and surrogate gradient at `w` on one batch.
pub fn fit_and_gradient(w: &[f64], data: &Dataset, config: &LearnerConfig) -> Result<(Activation, GradientReport)> {
    let proj = data.project(w)?;
    let (u, fitted) = fit_activation_with_values(&proj, data.labels(), config.a, config.b, config.fit_tol)?;
    let g = gradient_at_fitted(data, &fitted)?;
    Ok((u, g))
}

fn draw(source: &dyn SampleSource, m: usize, path: &[u64]) -> Result<Dataset> {
    let data = source.draw(m, stream_id(path))?;
    if data.dim() != source.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), got: data.dim() });
    }
    Ok(data)
}

/// Gradient descent from `w⁰ = 0` with step `eta_init`, refitting the
/// activation on a fresh batch of `m_init` samples at every step.
///
/// Returns all iterates `w⁰, …, w^{t₀}`.
pub fn initialize(config: &LearnerConfig, source: &dyn SampleSource) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let steps = config.init_steps();
    let eta = config.eta_init();
    let mut w = vec![0.0; source.dim()];
    let mut iterates = Vec::with_capacity(steps + 1);
    iterates.push(w.clone());
    for t in 0..steps {
        let data = draw(source, config.m_init, &[config.seed, tag::INIT, t as u64])?;
        let (_, g) = fit_and_gradient(&w, &data, config)?;
        w = sub(&w, &scale(&g.gradient, eta));
        iterates.push(w.clone());
    }
    Ok(iterates)
}

/// Seeded uniformly random unit vector.
pub fn random_unit(dim: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, stream);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| -> f64 { StandardNormal.sample(&mut rng) }).collect();
        let n = norm(&v);
        if n > 0.0 {
            return scale(&v, 1.0 / n);
        }
    }
}

/// Fixed-scale alternating loop.
///
/// For `t = 0 … T−1`: normalize `ŵᵗ = β·w̄ᵗ/‖w̄ᵗ‖`, fit `ûᵗ` on a fresh
/// batch, step `w̄ᵗ⁺¹ = ŵᵗ − η∇L̂_sur(ŵᵗ; ûᵗ)`. A final normalization and fit
/// give the returned `(ŵᵀ, ûᵀ)`, so `‖ŵᵀ‖ = β`. A zero direction (initially
/// or mid-run) is replaced by a seeded random unit vector.
pub fn run_inner_loop(
    w_init: &[f64],
    beta: f64,
    config: &LearnerConfig,
    source: &dyn SampleSource,
    task: TaskId,
) -> Result<(Hypothesis, Vec<TraceRecord>)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {beta}")));
    }
    if w_init.len() != source.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), got: w_init.len() });
    }
    let steps = config.inner_steps();
    let eta = config.eta_opt();
    let wstar = source.reference();
    let key = [config.seed, tag::INNER, task.restart as u64, task.grid as u64];
    let mut wbar = w_init.to_vec();
    let mut trace = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let len = norm(&wbar);
        if !(len > 0.0 && len.is_finite()) {
            if t > 0 {
                log::info!("direction vanished at step {t} of task {task:?}; restarting from a random direction");
            }
            let dir_key = [config.seed, tag::RESTART_DIRECTION, task.restart as u64, task.grid as u64, t as u64];
            wbar = random_unit(source.dim(), config.seed, stream_id(&dir_key));
        }
        let w_hat = scale(&wbar, beta / norm(&wbar));
        let data = draw(source, config.m_batch, &[key[0], key[1], key[2], key[3], t as u64])?;
        let (u, g) = fit_and_gradient(&w_hat, &data, config)?;
        let last = t == steps;
        if !last {
            wbar = sub(&w_hat, &scale(&g.gradient, eta));
        }
        trace.push(TraceRecord {
            restart: task.restart,
            grid: task.grid,
            beta,
            t,
            w_norm: norm(&w_hat),
            misalignment: wstar.map(|s| misalignment(s, &w_hat)),
            loss: g.loss,
            grad_norm: g.norm_sq.sqrt(),
            grad_dot_err: wstar.map(|s| dot(&g.gradient, &sub(&w_hat, s))),
            step_err: if last { None } else { wstar.map(|s| norm(&sub(&wbar, s))) },
        });
        if last {
            return Ok((Hypothesis::new(w_hat, u), trace));
        }
    }
    unreachable!("the loop returns on its last iteration")
}

/// Initialization, then one inner loop per `(restart, scale)` pair.
///
/// Tasks run on the current rayon pool; the candidate order is
/// `zero, (k=0, j=1), (k=0, j=2), …` independent of scheduling.
pub fn optimize(config: &LearnerConfig, source: &dyn SampleSource) -> Result<(CandidateSet, Vec<TraceRecord>)> {
    let starts = initialize(config, source)?;
    let grid = config.scale_grid();
    let tasks: Vec<(TaskId, &[f64], f64)> = starts
        .iter()
        .enumerate()
        .flat_map(|(k, w)| {
            grid.iter().enumerate().map(move |(j, &beta)| (TaskId { restart: k, grid: j + 1 }, w.as_slice(), beta))
        })
        .collect();
    let results: Vec<Result<(Hypothesis, Vec<TraceRecord>)>> =
        tasks.par_iter().map(|&(task, w, beta)| run_inner_loop(w, beta, config, source, task)).collect();
    let mut set = CandidateSet::with_zero(source.dim(), config.a, config.b);
    let mut trace = Vec::new();
    for ((task, _, beta), res) in tasks.iter().zip(results) {
        let (h, rows) = res?;
        set.push(Candidate { hypothesis: h, task: Some(*task), beta: *beta });
        trace.extend(rows);
    }
    Ok((set, trace))
}

/// Squared loss restricted to `|w·x| ≤ window`, averaged over the full batch.
pub fn truncated_loss(h: &Hypothesis, data: &Dataset, window: f64) -> Result<f64> {
    let proj = data.project(&h.w)?;
    let s: KahanSum = proj
        .iter()
        .zip(data.labels())
        .filter(|(p, _)| p.abs() <= window)
        .map(|(&p, &y)| {
            let r = h.activation.eval(p) - y;
            r * r
        })
        .collect();
    Ok(s.value() / data.len() as f64)
}

/// Outcome of the testing phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    /// Truncated test loss of every candidate, in candidate order.
    pub losses: Vec<f64>,
    pub window: f64,
}

/// Picks the candidate with the least truncated loss on one test batch of
/// `m_test` samples, window `W·r`. Ties go to the lowest index.
pub fn select_hypothesis(
    candidates: &CandidateSet,
    config: &LearnerConfig,
    source: &dyn SampleSource,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let data = draw(source, config.m_test, &[config.seed, tag::TEST])?;
    let window = config.w * config.test_radius();
    let losses = candidates.hypotheses().map(|h| truncated_loss(h, &data, window)).collect::<Result<Vec<_>>>()?;
    let mut index = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[index] {
            index = i;
        }
    }
    Ok(Selection { index, losses, window })
}

/// Everything [`learn`] produces.
#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub hypothesis: Hypothesis,
    pub selection: Selection,
    pub candidates: CandidateSet,
    pub trace: Vec<TraceRecord>,
}

/// Truncates labels at `M = (bW/L)·ln(16b⁴W⁴/ε²)`, optimizes, then selects.
pub fn learn(config: &LearnerConfig, source: &dyn SampleSource) -> Result<LearnOutput> {
    config.validate()?;
    let truncated = Truncated::new(source, config.label_cap());
    let (candidates, trace) = optimize(config, &truncated)?;
    let selection = select_hypothesis(&candidates, config, &truncated)?;
    let hypothesis = candidates.candidates[selection.index].hypothesis.clone();
    Ok(LearnOutput { hypothesis, selection, candidates, trace })
}
