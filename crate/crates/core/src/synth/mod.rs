//! Synthetic scenarios: a well-behaved marginal, a planted single-index
//! target and an oblivious label-corruption model.

mod marginal;

pub use marginal::{MarginalKind, MarginalSpec};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::activation::{Activation, Link};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learner::SampleSource;
use crate::metrics::{dot, norm, KahanSum};
use crate::rng::rng_for;

/// Planted pair `(w*, u*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetModel {
    pub wstar: Vec<f64>,
    pub link: Link,
}

/// Oblivious per-sample corruption applied to the clean label `y*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    /// With probability `p`, `y = −y*`.
    SignFlip {
        p: f64,
    },
    /// With probability `p`, `y = 0`.
    ZeroOut {
        p: f64,
    },
    /// With probability `p`, `y = y* ± magnitude` (fair random sign).
    AdditiveOutlier {
        p: f64,
        magnitude: f64,
    },
    /// With probability `p`, `y = y* + delta`.
    LabelShift {
        p: f64,
        delta: f64,
    },
}

impl NoiseModel {
    fn probability(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::SignFlip { p }
            | NoiseModel::ZeroOut { p }
            | NoiseModel::AdditiveOutlier { p, .. }
            | NoiseModel::LabelShift { p, .. } => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probability();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("noise probability {p} outside [0, 1]")));
        }
        let finite = match *self {
            NoiseModel::AdditiveOutlier { magnitude, .. } => magnitude.is_finite(),
            NoiseModel::LabelShift { delta, .. } => delta.is_finite(),
            _ => true,
        };
        if !finite {
            return Err(Error::InvalidConfig("noise magnitude must be finite".into()));
        }
        Ok(())
    }

    /// Consumes exactly two uniforms per call.
    fn apply(&self, clean: f64, rng: &mut crate::rng::Rng) -> f64 {
        let hit = rng.random::<f64>() < self.probability();
        let positive = rng.random::<bool>();
        if !hit {
            return clean;
        }
        match *self {
            NoiseModel::None => clean,
            NoiseModel::SignFlip { .. } => -clean,
            NoiseModel::ZeroOut { .. } => 0.0,
            NoiseModel::AdditiveOutlier { magnitude, .. } => {
                if positive {
                    clean + magnitude
                } else {
                    clean - magnitude
                }
            }
            NoiseModel::LabelShift { delta, .. } => clean + delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub marginal: MarginalSpec,
    pub target: TargetModel,
    #[serde(default = "no_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
}

fn no_noise() -> NoiseModel {
    NoiseModel::None
}

impl ScenarioSpec {
    pub fn new(marginal: MarginalSpec, wstar: Vec<f64>, link: Link, noise: NoiseModel, seed: u64) -> Self {
        Self { marginal, target: TargetModel { wstar, link }, noise, seed }
    }

    /// Validates the spec and realizes the target activation.
    pub fn build(&self) -> Result<Scenario> {
        self.marginal.validate()?;
        self.noise.validate()?;
        if self.target.wstar.len() != self.marginal.dim {
            return Err(Error::DimensionMismatch { expected: self.marginal.dim, got: self.target.wstar.len() });
        }
        if !self.target.wstar.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("wstar"));
        }
        let (a, b) = self.target.link.class_bounds();
        let ustar = self.target.link.to_activation(a, b)?;
        Ok(Scenario { spec: self.clone(), ustar })
    }
}

/// A validated scenario; also a [`SampleSource`].
#[derive(Debug, Clone)]
pub struct Scenario {
    spec: ScenarioSpec,
    ustar: Activation,
}

impl Scenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn wstar(&self) -> &[f64] {
        &self.spec.target.wstar
    }

    pub fn ustar(&self) -> &Activation {
        &self.ustar
    }

    /// Clean label `u*(w*·x)`.
    pub fn clean_label(&self, x: &[f64]) -> f64 {
        self.ustar.eval(dot(self.wstar(), x))
    }

    /// `m` i.i.d. draws; a pure function of `(seed, stream, m)`.
    pub fn sample(&self, m: usize, stream: u64) -> Result<Dataset> {
        if m == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        let d = self.spec.marginal.dim;
        let mut rng = rng_for(self.spec.seed, stream);
        let mut features = Vec::with_capacity(m * d);
        let mut labels = Vec::with_capacity(m);
        for i in 0..m {
            self.spec.marginal.sample_into(&mut rng, &mut features);
            let clean = self.clean_label(&features[i * d..]);
            labels.push(self.spec.noise.apply(clean, &mut rng));
        }
        Dataset::from_parts(d, features, labels)
    }
}

impl SampleSource for Scenario {
    fn dim(&self) -> usize {
        self.spec.marginal.dim
    }
    fn draw(&self, m: usize, stream: u64) -> Result<Dataset> {
        self.sample(m, stream)
    }
    fn reference(&self) -> Option<&[f64]> {
        Some(self.wstar())
    }
}

/// `m` draws from the scenario under `stream_id`.
pub fn sample_batch(spec: &ScenarioSpec, m: usize, stream_id: u64) -> Result<Dataset> {
    spec.build()?.sample(m, stream_id)
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut n = 0usize;
        let mut s = KahanSum::new();
        let mut s2 = KahanSum::new();
        for v in values {
            n += 1;
            s.add(v);
            s2.add(v * v);
        }
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let nf = n as f64;
        let mean = s.value() / nf;
        let var = if n > 1 { ((s2.value() - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self { mean, se: (var / nf).sqrt() }
    }
}

/// Stream used by [`estimate_opt`].
pub const OPT_STREAM: u64 = 0x0_0975;

/// Loss of the planted pair, `E[(u*(w*·x) − y)²]`.
///
/// An upper bound on the best achievable loss in the class, used as the
/// OPT proxy throughout.
pub fn estimate_opt(spec: &ScenarioSpec, n_mc: usize) -> Result<Estimate> {
    if n_mc < 1000 {
        return Err(Error::InvalidArgument(format!("n_mc must be at least 1000, got {n_mc}")));
    }
    let sc = spec.build()?;
    let data = sc.sample(n_mc, OPT_STREAM)?;
    Ok(Estimate::from_values(data.iter().map(|(x, y)| {
        let r = sc.clean_label(x) - y;
        r * r
    })))
}

/// Norm of `w*`; convenience for probes.
pub fn wstar_norm(spec: &ScenarioSpec) -> f64 {
    norm(&spec.target.wstar)
}
