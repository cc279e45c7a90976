//! Vector helpers, compensated summation and the evaluation metrics shared by
//! every module: empirical squared loss, misalignment and angles.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hypothesis::Hypothesis;

/// Neumaier-compensated running sum.
///
/// Batch statistics go through this so that results do not depend on the
/// order in which partial sums are combined beyond ~1e-15 relative.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(mut self, other: KahanSum) -> Self {
        self.add(other.sum);
        self.add(other.comp);
        self
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn scale(x: &[f64], c: f64) -> Vec<f64> {
    x.iter().map(|v| v * c).collect()
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Empirical squared loss `(1/m) Σ (u(w·xᵢ) − yᵢ)²`.
pub fn l2_loss(h: &Hypothesis, data: &Dataset) -> Result<f64> {
    check_dim(data.dim(), h.w.len())?;
    let sum: KahanSum = data
        .iter()
        .map(|(x, y)| {
            let r = h.activation.eval(dot(&h.w, x)) - y;
            r * r
        })
        .collect();
    Ok(sum.value() / data.len() as f64)
}

/// Norm of the component of `wstar` orthogonal to `w`; `‖wstar‖` when `w = 0`.
pub fn misalignment(wstar: &[f64], w: &[f64]) -> f64 {
    debug_assert_eq!(wstar.len(), w.len());
    let ww = dot(w, w);
    if ww == 0.0 {
        return norm(wstar);
    }
    let c = dot(wstar, w) / ww;
    wstar
        .iter()
        .zip(w)
        .map(|(s, v)| {
            let r = s - c * v;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Angle between two non-zero vectors, in `[0, π]`.
pub fn angle(w1: &[f64], w2: &[f64]) -> Result<f64> {
    check_dim(w1.len(), w2.len())?;
    let (n1, n2) = (norm(w1), norm(w2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::InvalidArgument("angle of a zero vector".into()));
    }
    Ok((dot(w1, w2) / (n1 * n2)).clamp(-1.0, 1.0).acos())
}
