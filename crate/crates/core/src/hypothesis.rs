use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::metrics::{dot, norm};

/// A single-index predictor `x ↦ u(w·x)`.
///
/// Serialized as `{"w": [...], "knots": [...], "values": [...], "a": .., "b": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypothesisRepr", into = "HypothesisRepr")]
pub struct Hypothesis {
    pub w: Vec<f64>,
    pub activation: Activation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisRepr {
    w: Vec<f64>,
    knots: Vec<f64>,
    values: Vec<f64>,
    a: f64,
    b: f64,
}

impl TryFrom<HypothesisRepr> for Hypothesis {
    type Error = Error;
    fn try_from(r: HypothesisRepr) -> Result<Self> {
        if r.w.is_empty() {
            return Err(Error::InvalidArgument("hypothesis weight vector is empty".into()));
        }
        if !r.w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("hypothesis weights"));
        }
        Ok(Hypothesis::new(r.w, Activation::new(r.knots, r.values, r.a, r.b)?))
    }
}

impl From<Hypothesis> for HypothesisRepr {
    fn from(h: Hypothesis) -> Self {
        HypothesisRepr {
            w: h.w,
            knots: h.activation.knots().to_vec(),
            values: h.activation.values().to_vec(),
            a: h.activation.a(),
            b: h.activation.b(),
        }
    }
}

impl Hypothesis {
    pub fn new(w: Vec<f64>, activation: Activation) -> Self {
        Self { w, activation }
    }

    /// `(w = 0, u ≡ 0)`, always a member of the candidate pool.
    pub fn zero(dim: usize, a: f64, b: f64) -> Self {
        Self::new(vec![0.0; dim], Activation::zero(a, b))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.activation.eval(dot(&self.w, x))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.w)
    }
}
