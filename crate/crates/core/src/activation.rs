//! Piecewise-linear members of the activation class `U(a,b)`.
//!
//! `U(a,b)` holds the non-decreasing, `b`-Lipschitz functions with `u(0) = 0`
//! whose slope on `[0, ∞)` is at least `a`. An [`Activation`] stores strictly
//! increasing knots (one of which is exactly `0.0` with value `0.0`) and
//! interpolates linearly between them.
//!
//! Outside the knot range the end-segment slope is continued. When an end
//! knot is the anchor itself the continuation uses the smallest admissible
//! slope: `a` to the right, `0` to the left.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating-point slack for the segment-wise class checks, in units of the
/// magnitudes involved in each difference.
const ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActivationRepr", into = "ActivationRepr")]
pub struct Activation {
    knots: Vec<f64>,
    values: Vec<f64>,
    anchor: usize,
    a: f64,
    b: f64,
    /// Slope of segment `i` (between knots `i` and `i + 1`).
    slopes: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
    /// `∫₀^{knots[i]} u`.
    integrals: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivationRepr {
    knots: Vec<f64>,
    values: Vec<f64>,
    a: f64,
    b: f64,
}

impl TryFrom<ActivationRepr> for Activation {
    type Error = Error;
    fn try_from(r: ActivationRepr) -> Result<Self> {
        Activation::new(r.knots, r.values, r.a, r.b)
    }
}

impl From<Activation> for ActivationRepr {
    fn from(u: Activation) -> Self {
        ActivationRepr { knots: u.knots, values: u.values, a: u.a, b: u.b }
    }
}

/// Named link functions used to specify targets and probe families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Link {
    /// `c·z`.
    Linear { slope: f64 },
    /// `max(z, 0)`.
    Relu,
    /// `z` for `z ≥ 0`, `slope·z` below.
    LeakyRelu { slope: f64 },
    /// `max(z, −1)`: identity clipped from below.
    SaturatingRamp,
    /// Explicit knots and values (must contain the anchor `(0, 0)`).
    Piecewise { knots: Vec<f64>, values: Vec<f64> },
}

impl Link {
    pub fn name(&self) -> String {
        match self {
            Link::Linear { slope } => format!("linear({slope})"),
            Link::Relu => "relu".into(),
            Link::LeakyRelu { slope } => format!("leaky_relu({slope})"),
            Link::SaturatingRamp => "saturating_ramp".into(),
            Link::Piecewise { knots, .. } => format!("piecewise({} knots)", knots.len()),
        }
    }

    /// Tightest `(a, b)` for which the link lies in `U(a, b)`.
    pub fn class_bounds(&self) -> (f64, f64) {
        match self {
            Link::Linear { slope } => (*slope, *slope),
            Link::Relu | Link::SaturatingRamp => (1.0, 1.0),
            Link::LeakyRelu { slope } => (1.0, slope.max(1.0)),
            Link::Piecewise { knots, values } => {
                let mut a = f64::INFINITY;
                let mut b = 0.0f64;
                for i in 0..knots.len().saturating_sub(1) {
                    let dz = knots[i + 1] - knots[i];
                    if dz > 0.0 {
                        let s = (values[i + 1] - values[i]) / dz;
                        b = b.max(s);
                        if knots[i] >= 0.0 {
                            a = a.min(s);
                        }
                    }
                }
                if a.is_infinite() {
                    a = 0.0;
                }
                (a.max(0.0).min(b), b)
            }
        }
    }

    /// Realizes the link as a piecewise-linear activation tagged with class `(a, b)`.
    pub fn to_activation(&self, a: f64, b: f64) -> Result<Activation> {
        let (knots, values) = match *self {
            Link::Piecewise { ref knots, ref values } => (knots.clone(), values.clone()),
            Link::Linear { slope } => (vec![-1.0, 0.0, 1.0], vec![-slope, 0.0, slope]),
            Link::Relu => (vec![-1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]),
            Link::LeakyRelu { slope } => (vec![-1.0, 0.0, 1.0], vec![-slope, 0.0, 1.0]),
            Link::SaturatingRamp => (vec![-2.0, -1.0, 0.0, 1.0], vec![-1.0, -1.0, 0.0, 1.0]),
        };
        Activation::new(knots, values, a, b)
    }
}

impl Activation {
    /// Validates and builds an activation of class `(a, b)`.
    ///
    /// Knots must be non-decreasing; repeated knots must carry equal values
    /// and are merged. A knot at `0.0` with value `0.0` is required.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || a > b {
            return Err(Error::InvalidActivation(format!("need 0 ≤ a ≤ b, got a = {a}, b = {b}")));
        }
        if knots.len() != values.len() {
            return Err(Error::InvalidActivation("knots and values differ in length".into()));
        }
        if knots.is_empty() {
            return Err(Error::InvalidActivation("no knots".into()));
        }
        if !knots.iter().chain(&values).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("activation"));
        }
        let mut zs: Vec<f64> = Vec::with_capacity(knots.len());
        let mut vs: Vec<f64> = Vec::with_capacity(knots.len());
        for (z, v) in knots.into_iter().zip(values) {
            match zs.last() {
                Some(&last) if z < last => {
                    return Err(Error::InvalidActivation("knots are not sorted".into()));
                }
                Some(&last) if z == last => {
                    if v != *vs.last().unwrap() {
                        return Err(Error::InvalidActivation(format!("repeated knot {z} with different values")));
                    }
                }
                _ => {
                    zs.push(z);
                    vs.push(v);
                }
            }
        }
        let anchor =
            zs.iter().position(|&z| z == 0.0).ok_or_else(|| Error::InvalidActivation("no knot at 0".into()))?;
        if vs[anchor] != 0.0 {
            return Err(Error::InvalidActivation("u(0) must be 0".into()));
        }
        for i in 0..zs.len() - 1 {
            if !segment_admissible(zs[i], zs[i + 1], vs[i], vs[i + 1], a, b) {
                return Err(Error::InvalidActivation(format!(
                    "segment [{}, {}] with values [{}, {}] violates the slope bounds of U({a},{b})",
                    zs[i],
                    zs[i + 1],
                    vs[i],
                    vs[i + 1]
                )));
            }
        }
        Ok(Self::assemble(zs, vs, anchor, a, b))
    }

    /// Builds from already-validated parts.
    pub(crate) fn assemble(knots: Vec<f64>, values: Vec<f64>, anchor: usize, a: f64, b: f64) -> Self {
        let n = knots.len();
        let slopes: Vec<f64> =
            (0..n.saturating_sub(1)).map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i])).collect();
        let left_slope = if anchor == 0 { 0.0 } else { slopes[0].clamp(0.0, b) };
        let right_slope = if anchor == n - 1 { a } else { slopes[n - 2].clamp(a, b) };
        let mut integrals = vec![0.0; n];
        for i in anchor + 1..n {
            integrals[i] = integrals[i - 1] + 0.5 * (knots[i] - knots[i - 1]) * (values[i] + values[i - 1]);
        }
        for i in (0..anchor).rev() {
            integrals[i] = integrals[i + 1] - 0.5 * (knots[i + 1] - knots[i]) * (values[i + 1] + values[i]);
        }
        Self { knots, values, anchor, a, b, slopes, left_slope, right_slope, integrals }
    }

    /// Activation of the zero hypothesis: the anchor alone.
    ///
    /// It is only ever evaluated at `w·x = 0`, where it returns 0.
    pub fn zero(a: f64, b: f64) -> Self {
        Self::assemble(vec![0.0], vec![0.0], 0, a, b)
    }

    pub fn linear(slope: f64, a: f64, b: f64) -> Result<Self> {
        Link::Linear { slope }.to_activation(a, b)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `u(z)`.
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let n = self.knots.len();
        let j = self.knots.partition_point(|&k| k <= z);
        if j == 0 {
            self.values[0] + self.left_slope * (z - self.knots[0])
        } else if j == n {
            self.values[n - 1] + self.right_slope * (z - self.knots[n - 1])
        } else {
            let i = j - 1;
            self.values[i] + self.slopes[i] * (z - self.knots[i])
        }
    }

    /// `∫₀ᵗ u(r) dr`, exact for the piecewise-linear function.
    pub fn integral(&self, t: f64) -> f64 {
        let j = self.knots.partition_point(|&k| k <= t);
        let i = if j == 0 { 0 } else { j - 1 };
        // On the piece starting at the anchor (or the left tail when the anchor
        // is the first knot) the integrand is linear through the origin.
        if i == self.anchor {
            return 0.5 * t * self.eval(t);
        }
        self.integrals[i] + 0.5 * (t - self.knots[i]) * (self.values[i] + self.eval(t))
    }

    /// Exhaustive segment-wise check of membership in `U(a, b)`, including the
    /// extrapolated tails.
    pub fn is_member_of(&self, a: f64, b: f64) -> bool {
        if self.eval(0.0) != 0.0 {
            return false;
        }
        let n = self.knots.len();
        let segments_ok = (0..n - 1)
            .all(|i| segment_admissible(self.knots[i], self.knots[i + 1], self.values[i], self.values[i + 1], a, b));
        // The left tail lies on negatives; the right tail starts at a knot ≥ 0.
        segments_ok && (0.0..=b).contains(&self.left_slope) && (a..=b).contains(&self.right_slope)
    }
}

/// Slope bounds `lo·Δz ≤ Δv ≤ b·Δz` for one segment, where `lo = a` on the
/// non-negative half-line and `0` elsewhere, up to rounding in the operands.
pub(crate) fn segment_admissible(z0: f64, z1: f64, v0: f64, v1: f64, a: f64, b: f64) -> bool {
    let dz = z1 - z0;
    let dv = v1 - v0;
    let lo = if z0 >= 0.0 { a } else { 0.0 };
    let slack = ROUNDING_SLACK * (v0.abs() + v1.abs() + b * (z0.abs() + z1.abs()));
    dv >= lo * dz - slack && dv <= b * dz + slack
}
