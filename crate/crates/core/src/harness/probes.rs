//! Empirical probes of the structural properties the learner relies on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::{ProbeMeta, ProbeResult};
use crate::activation::{Activation, Link};
use crate::config::LearnerConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::fit_activation;
use crate::learner::{random_unit, run_inner_loop, SampleSource, TaskId};
use crate::metrics::{dot, misalignment, norm, scale, sub};
use crate::rng::{stream_id, tag};
use crate::surrogate::surrogate_gradient;
use crate::synth::{estimate_opt, Estimate, MarginalSpec, NoiseModel, Scenario, ScenarioSpec};

/// Rows whose squared misalignment falls below this are degenerate.
pub const DEGENERATE_V_SQ: f64 = 1e-12;

const SHARPNESS: u64 = 1;
const MISALIGNMENT: u64 = 2;
const CONTRACTION: u64 = 3;
const EXAMPLE: u64 = 4;

/// `w` with `‖w‖ = ‖w*‖` at angle `theta` from `w*`, rotating towards a
/// seeded random direction orthogonal to `w*`.
pub fn rotate_towards_random(wstar: &[f64], theta: f64, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let r = norm(wstar);
    if r == 0.0 {
        return Err(Error::InvalidArgument("w* = 0 has no direction to rotate".into()));
    }
    let e = scale(wstar, 1.0 / r);
    if e.len() == 1 {
        if theta.abs() < 1e-15 {
            return Ok(wstar.to_vec());
        }
        if (theta - std::f64::consts::PI).abs() < 1e-15 {
            return Ok(scale(wstar, -1.0));
        }
        return Err(Error::InvalidArgument("rotations need dimension at least 2".into()));
    }
    let mut k = 0u64;
    let perp = loop {
        let g = random_unit(e.len(), seed, stream_id(&[stream, k]));
        let p = sub(&g, &scale(&e, dot(&g, &e)));
        let n = norm(&p);
        if n > 1e-6 {
            break scale(&p, 1.0 / n);
        }
        k += 1;
    };
    Ok(e.iter().zip(&perp).map(|(ei, pi)| r * (theta.cos() * ei + theta.sin() * pi)).collect())
}

/// Which activation the sharpness probe evaluates the gradient with.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeActivation {
    /// Best fit in `U(a, b)` on each trial's batch.
    Fitted { a: f64, b: f64, tol: f64 },
    /// The same activation for every trial.
    Fixed(Activation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessOptions {
    pub trials: usize,
    pub seed: u64,
    pub activation: ProbeActivation,
}

/// For each angle `θ` and trial: builds `w` at angle `θ` from `w*` with
/// `‖w‖ = ‖w*‖`, draws a fresh batch of `m`, obtains `û_w`, and records
/// `‖(w*)^{⊥w}‖²` and `g·(w − w*)` for the surrogate gradient `g`.
///
/// Columns: `angle, trial, v_norm_sq, grad_dot_err, loss`. Summary keys
/// `frac_positive[<deg>]` give the share of trials with `g·(w − w*) > 0`.
pub fn probe_sharpness(scenario: &Scenario, angles: &[f64], m: usize, opts: &SharpnessOptions) -> Result<ProbeResult> {
    if m < 256 {
        return Err(Error::InvalidArgument(format!("sharpness probe needs m ≥ 256, got {m}")));
    }
    if let Some(t) = angles.iter().find(|t| !(**t > 0.0 && **t < std::f64::consts::PI)) {
        return Err(Error::InvalidArgument(format!("angles must lie in (0, π), got {t}")));
    }
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let wstar = scenario.wstar();
    if norm(wstar) == 0.0 {
        return Err(Error::InvalidArgument("sharpness probe needs w* ≠ 0".into()));
    }
    let meta = ProbeMeta::start(opts.seed, m);
    let jobs: Vec<(usize, usize)> = (0..angles.len()).flat_map(|i| (0..opts.trials).map(move |t| (i, t))).collect();
    let measured = jobs
        .par_iter()
        .map(|&(i, trial)| {
            let key = [opts.seed, tag::PROBE, SHARPNESS, i as u64, trial as u64];
            let w = rotate_towards_random(wstar, angles[i], opts.seed, stream_id(&[&key[..], &[0]].concat()))?;
            let data = scenario.draw(m, stream_id(&[&key[..], &[1]].concat()))?;
            let u = match &opts.activation {
                ProbeActivation::Fitted { a, b, tol } => {
                    fit_activation(&data.project(&w)?, data.labels(), *a, *b, *tol)?
                }
                ProbeActivation::Fixed(u) => u.clone(),
            };
            let g = surrogate_gradient(&w, &u, &data)?;
            let v_sq = misalignment(wstar, &w).powi(2);
            Ok((v_sq, dot(&g.gradient, &sub(&w, wstar)), g.loss))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = ProbeResult::new("sharpness", &["angle", "trial", "v_norm_sq", "grad_dot_err", "loss"], meta);
    let mut positive = vec![0usize; angles.len()];
    for (&(i, trial), &(v_sq, corr, loss)) in jobs.iter().zip(&measured) {
        if corr > 0.0 {
            positive[i] += 1;
        }
        out.push(
            vec![Some(angles[i]), Some(trial as f64), Some(v_sq), Some(corr), Some(loss)],
            v_sq < DEGENERATE_V_SQ,
        )?;
    }
    for (i, &theta) in angles.iter().enumerate() {
        out.summary
            .push((format!("frac_positive[{:.1}]", theta.to_degrees()), positive[i] as f64 / opts.trials as f64));
    }
    out.meta = out.meta.finish();
    Ok(out)
}

/// Monte-Carlo `E[(f(w·x) − u*(w*·x))²]` against `‖(w*)^{⊥w}‖²` for each
/// `f` in the family and each angle, with `‖w‖ = ‖w*‖`.
///
/// Columns: `f_index, angle, error, error_se, v_norm_sq, ratio`. Rows with
/// `‖v‖² < 1e-12` are degenerate and carry no ratio. Summary key
/// `min_ratio` is the infimum over the remaining rows.
pub fn probe_misalignment(
    scenario: &Scenario,
    family: &[Activation],
    angles: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<ProbeResult> {
    if n_mc < 10_000 {
        return Err(Error::InvalidArgument(format!("misalignment probe needs n_mc ≥ 10⁴, got {n_mc}")));
    }
    if family.is_empty() || angles.is_empty() {
        return Err(Error::Empty("probe sweep"));
    }
    if let Some(t) = angles.iter().find(|t| !(**t >= 0.0 && **t <= std::f64::consts::PI)) {
        return Err(Error::InvalidArgument(format!("angles must lie in [0, π], got {t}")));
    }
    let wstar = scenario.wstar();
    let meta = ProbeMeta::start(seed, n_mc);
    let per_angle = angles
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let key = [seed, tag::PROBE, MISALIGNMENT, i as u64];
            let w = rotate_towards_random(wstar, theta, seed, stream_id(&[&key[..], &[0]].concat()))?;
            let data = scenario.draw(n_mc, stream_id(&[&key[..], &[1]].concat()))?;
            let clean: Vec<f64> = data.iter().map(|(x, _)| scenario.clean_label(x)).collect();
            let proj = data.project(&w)?;
            let rows: Vec<Estimate> = family
                .iter()
                .map(|f| Estimate::from_values(proj.iter().zip(&clean).map(|(&p, &c)| (f.eval(p) - c).powi(2))))
                .collect();
            Ok((misalignment(wstar, &w).powi(2), rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out =
        ProbeResult::new("misalignment", &["f_index", "angle", "error", "error_se", "v_norm_sq", "ratio"], meta);
    let mut min_ratio = f64::INFINITY;
    for (fi, _) in family.iter().enumerate() {
        for (i, (v_sq, rows)) in per_angle.iter().enumerate() {
            let e = rows[fi];
            let degenerate = *v_sq < DEGENERATE_V_SQ;
            let ratio = if degenerate { None } else { Some(e.mean / v_sq) };
            if let Some(r) = ratio {
                min_ratio = min_ratio.min(r);
            }
            out.push(vec![Some(fi as f64), Some(angles[i]), Some(e.mean), Some(e.se), Some(*v_sq), ratio], degenerate)?;
        }
    }
    if min_ratio.is_finite() {
        out.summary.push(("min_ratio".into(), min_ratio));
    }
    out.meta = out.meta.finish();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionOptions {
    pub seeds: usize,
    /// Angle between the starting direction and `w*`.
    pub init_angle: f64,
    /// OPT proxy for the gate; estimated from 10⁵ samples when `None`.
    pub opt_proxy: Option<f64>,
}

/// Runs the inner loop at `β = ‖w*‖` for each seed and records the per-step
/// ratio `‖vᵗ⁺¹‖/‖vᵗ‖` of misalignments.
///
/// A step is eligible when `‖vᵗ‖ > (96/μ)·√(OPT + ε)`. Columns:
/// `seed, t, v_norm, v_next_norm, ratio, eligible`. Summary keys:
/// `gate`, `eligible_steps`, `contracting_fraction` (eligible steps with
/// ratio below 1; absent when no step is eligible) and
/// `contracting_fraction_all` over every step.
pub fn probe_contraction(
    scenario: &Scenario,
    config: &LearnerConfig,
    opts: &ContractionOptions,
) -> Result<ProbeResult> {
    config.validate()?;
    let wstar = scenario.wstar();
    let beta = norm(wstar);
    if beta == 0.0 {
        return Err(Error::InvalidArgument("contraction probe needs w* ≠ 0".into()));
    }
    if opts.seeds == 0 {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let opt = match opts.opt_proxy {
        Some(v) => v,
        None => estimate_opt(scenario.spec(), 100_000)?.mean,
    };
    let gate = 96.0 / config.mu() * (opt + config.eps).sqrt();
    let meta = ProbeMeta::start(config.seed, config.m_batch);
    let traces = (0..opts.seeds)
        .into_par_iter()
        .map(|s| {
            let cfg = LearnerConfig { seed: config.seed.wrapping_add(s as u64), ..config.clone() };
            let w0 = rotate_towards_random(wstar, opts.init_angle, cfg.seed, stream_id(&[tag::PROBE, CONTRACTION]))?;
            let (_, trace) = run_inner_loop(&w0, beta, &cfg, scenario, TaskId { restart: s, grid: 0 })?;
            Ok(trace)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = ProbeResult::new("contraction", &["seed", "t", "v_norm", "v_next_norm", "ratio", "eligible"], meta);
    let (mut eligible, mut contracting, mut all, mut all_contracting) = (0usize, 0usize, 0usize, 0usize);
    for (s, trace) in traces.iter().enumerate() {
        for pair in trace.windows(2) {
            let v = pair[0].misalignment.expect("scenario sources know w*");
            let v_next = pair[1].misalignment.expect("scenario sources know w*");
            let degenerate = v * v < DEGENERATE_V_SQ;
            let ratio = if degenerate { None } else { Some(v_next / v) };
            let is_eligible = v > gate;
            if let Some(r) = ratio {
                all += 1;
                all_contracting += usize::from(r < 1.0);
                if is_eligible {
                    eligible += 1;
                    contracting += usize::from(r < 1.0);
                }
            }
            let row = vec![
                Some(config.seed.wrapping_add(s as u64) as f64),
                Some(pair[0].t as f64),
                Some(v),
                Some(v_next),
                ratio,
                Some(f64::from(u8::from(is_eligible))),
            ];
            out.push(row, degenerate)?;
        }
    }
    out.summary.push(("gate".into(), gate));
    out.summary.push(("eligible_steps".into(), eligible as f64));
    if eligible > 0 {
        out.summary.push(("contracting_fraction".into(), contracting as f64 / eligible as f64));
    }
    if all > 0 {
        out.summary.push(("contracting_fraction_all".into(), all_contracting as f64 / all as f64));
    }
    out.meta = out.meta.finish();
    Ok(out)
}

/// Result of the fixed-activation counterexample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    /// Monte-Carlo estimate of `∇L_sur(w; u)·(w − w*)`.
    pub estimate: Estimate,
    /// Closed form `−(b/2 − a)‖w*‖²/2`.
    pub expected: f64,
}

impl ExampleReport {
    /// `(estimate − expected)/se`.
    pub fn z_score(&self) -> f64 {
        (self.estimate.mean - self.expected) / self.estimate.se
    }
}

/// Labels `y = a·(w*·x)` under `N(0, I_d)` with `‖w*‖ = 1`; the activation
/// is frozen at `u(z) = b·z` and `w = w*/2`. For `b > 2a` the surrogate
/// gradient points away from `w*`:
/// `E[(u(w·x) − y) x]·(w − w*) = −(b/2 − a)‖w*‖²/2`.
pub fn example_negative_correlation(d: usize, a: f64, b: f64, m: usize, seed: u64) -> Result<ExampleReport> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let wstar = random_unit(d, seed, stream_id(&[tag::PROBE, EXAMPLE]));
    let spec =
        ScenarioSpec::new(MarginalSpec::gaussian(d), wstar.clone(), Link::Linear { slope: a }, NoiseModel::None, seed);
    let scenario = spec.build()?;
    let w = scale(&wstar, 0.5);
    let diff = sub(&w, &wstar);
    const CHUNK: usize = 1 << 16;
    let chunks: Vec<usize> = (0..m.div_ceil(CHUNK)).map(|i| CHUNK.min(m - i * CHUNK)).collect();
    let values = chunks
        .par_iter()
        .enumerate()
        .map(|(i, &len)| {
            let data: Dataset = scenario.draw(len, stream_id(&[tag::PROBE, EXAMPLE, i as u64]))?;
            Ok(data.iter().map(|(x, y)| (b * dot(&w, x) - y) * dot(x, &diff)).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = Estimate::from_values(values.into_iter().flatten());
    Ok(ExampleReport { estimate, expected: -(b / 2.0 - a) * dot(&wstar, &wstar) / 2.0 })
}
