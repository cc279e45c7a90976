//! Best-fit activations: least squares over `U(a,b)` on a projected sample.
//!
//! Sorting the sample by projection `zᵢ = w·xᵢ` turns the fit into a
//! chain-constrained least-squares problem on the fitted values `ỹᵢ`:
//!
//! ```text
//! minimize    Σ cᵢ (ỹᵢ − yᵢ)²
//! subject to  ℓᵢ ≤ ỹᵢ₊₁ − ỹᵢ ≤ uᵢ,    ỹ_k = 0
//! ```
//!
//! with `uᵢ = b·Δzᵢ`, `ℓᵢ = a·Δzᵢ` right of the anchor `z_k = 0` and
//! `ℓᵢ = 0` left of it. [`solve_chain_qp`] solves this exactly;
//! [`oracle::brute_fit_oracle`] is an independent check for small instances.

mod chain;
pub mod oracle;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::metrics::KahanSum;

/// A chain-constrained least-squares instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainQp {
    pub targets: Vec<f64>,
    /// Per-node weights (multiplicities); the anchor may have weight 0.
    pub weights: Vec<f64>,
    /// Bounds on `ỹᵢ₊₁ − ỹᵢ`, length `n − 1`.
    pub lowers: Vec<f64>,
    pub uppers: Vec<f64>,
    /// Index of the node pinned to 0.
    pub anchor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub values: Vec<f64>,
    /// Weighted sum of squared residuals.
    pub objective: f64,
    /// Largest violation of the first-order optimality conditions.
    pub kkt_residual: f64,
}

impl ChainQp {
    pub fn new(targets: Vec<f64>, lowers: Vec<f64>, uppers: Vec<f64>, anchor: usize) -> Result<Self> {
        let weights = vec![1.0; targets.len()];
        Self::with_weights(targets, weights, lowers, uppers, anchor)
    }

    pub fn with_weights(
        targets: Vec<f64>,
        weights: Vec<f64>,
        lowers: Vec<f64>,
        uppers: Vec<f64>,
        anchor: usize,
    ) -> Result<Self> {
        let qp = Self { targets, weights, lowers, uppers, anchor };
        qp.validate()?;
        Ok(qp)
    }

    /// Chain for a sorted, de-duplicated set of knots (one of them 0).
    pub fn from_knots(knots: &[f64], targets: Vec<f64>, weights: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        let anchor = knots
            .iter()
            .position(|&z| z == 0.0)
            .ok_or_else(|| Error::InvalidArgument("knots must contain 0".into()))?;
        let (lowers, uppers) = link_bounds(knots, a, b);
        Self::with_weights(targets, weights, lowers, uppers, anchor)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.targets.len();
        if n == 0 {
            return Err(Error::Empty("chain problem"));
        }
        if self.weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.weights.len() });
        }
        for v in [&self.lowers, &self.uppers] {
            if v.len() != n - 1 {
                return Err(Error::DimensionMismatch { expected: n - 1, got: v.len() });
            }
        }
        if self.anchor >= n {
            return Err(Error::InvalidArgument(format!("anchor {} out of range for {n} nodes", self.anchor)));
        }
        let all = [&self.targets, &self.weights, &self.lowers, &self.uppers];
        if !all.iter().all(|v| v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("chain problem"));
        }
        for (i, &c) in self.weights.iter().enumerate() {
            if !(c > 0.0 || (i == self.anchor && c == 0.0)) {
                return Err(Error::InvalidArgument(format!("weight {c} at node {i} must be positive")));
            }
        }
        for (link, (&lower, &upper)) in self.lowers.iter().zip(&self.uppers).enumerate() {
            if lower > upper {
                return Err(Error::Infeasible { link, lower, upper });
            }
        }
        Ok(())
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        let s: KahanSum =
            values.iter().zip(&self.targets).zip(&self.weights).map(|((t, y), c)| c * (t - y) * (t - y)).collect();
        s.value()
    }

    /// Largest violation of stationarity plus complementary slackness.
    ///
    /// Link multipliers follow from the node equations walking inward from
    /// both ends; each must lie in the normal cone of its interval at the
    /// achieved difference. Differences within `tol·(1 + |bound|)` of a
    /// bound count as active.
    pub fn kkt_residual(&self, values: &[f64], tol: f64) -> f64 {
        let n = self.len();
        let k = self.anchor;
        let grad = |j: usize| 2.0 * self.weights[j] * (values[j] - self.targets[j]);
        let violation = |link: usize, nu: f64| {
            let d = values[link + 1] - values[link];
            let (lo, hi) = (self.lowers[link], self.uppers[link]);
            let at_lo = (d - lo).abs() <= tol * (1.0 + lo.abs());
            let at_hi = (d - hi).abs() <= tol * (1.0 + hi.abs());
            let infeasible = (lo - d).max(d - hi).max(0.0);
            let cone = match (at_lo, at_hi) {
                (true, true) => 0.0,
                (true, false) => nu.max(0.0),
                (false, true) => (-nu).max(0.0),
                (false, false) => nu.abs(),
            };
            cone.max(infeasible)
        };
        let mut worst = if values[k] == 0.0 { 0.0 } else { values[k].abs() };
        let mut nu = 0.0;
        for j in (k + 1..n).rev() {
            nu -= grad(j);
            worst = f64::max(worst, violation(j - 1, nu));
        }
        nu = 0.0;
        for j in 0..k {
            nu += grad(j);
            worst = f64::max(worst, violation(j, nu));
        }
        worst
    }

    /// Any feasible point satisfies `|ỹᵢ| ≤` this bound.
    fn feasible_bound(&self) -> f64 {
        let k = self.anchor;
        let reach = |i: usize| self.lowers[i].abs().max(self.uppers[i].abs());
        let right: f64 = (k..self.len() - 1).map(reach).sum();
        let left: f64 = (0..k).map(reach).sum();
        right.max(left)
    }
}

/// `ℓᵢ = a·Δzᵢ` right of the anchor, `0` left of it; `uᵢ = b·Δzᵢ`.
fn link_bounds(knots: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    knots
        .windows(2)
        .map(|w| {
            let dz = w[1] - w[0];
            let lo = if w[0] >= 0.0 { a } else { 0.0 };
            (lo * dz, b * dz)
        })
        .unzip()
}

/// Exact minimizer of a [`ChainQp`].
///
/// Runs in linear time on typical inputs and `O(n²)` in the worst case.
pub fn solve_chain_qp(problem: &ChainQp, tol: f64) -> Result<FitResult> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let values = solve_values(problem);
    let objective = problem.objective(&values);
    let kkt_residual = problem.kkt_residual(&values, tol);
    Ok(FitResult { values, objective, kkt_residual })
}

/// Minimizer of an already validated problem.
fn solve_values(problem: &ChainQp) -> Vec<f64> {
    let n = problem.len();
    let k = problem.anchor;
    let y_max = problem.targets.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let bound = problem.feasible_bound() + y_max;

    let right = chain::solve_half(
        &problem.targets[k + 1..],
        &problem.weights[k + 1..],
        &problem.lowers[k..],
        &problem.uppers[k..],
        bound,
    );
    // The left side walks away from the anchor, so differences flip sign.
    let rev = |v: &[f64]| v[..k].iter().rev().copied().collect::<Vec<_>>();
    let neg_uppers: Vec<f64> = problem.uppers[..k].iter().rev().map(|u| -u).collect();
    let neg_lowers: Vec<f64> = problem.lowers[..k].iter().rev().map(|l| -l).collect();
    let left = chain::solve_half(&rev(&problem.targets), &rev(&problem.weights), &neg_uppers, &neg_lowers, bound);

    let mut values = Vec::with_capacity(n);
    values.extend(left.into_iter().rev());
    values.push(0.0);
    values.extend(right);
    snap_to_links(problem, &mut values);
    values
}

/// Moves each value (walking away from the anchor) by at most a rounding
/// error so that every link holds in floating point, `lᵢ ≤ ỹᵢ₊₁ − ỹᵢ ≤ uᵢ`.
fn snap_to_links(problem: &ChainQp, values: &mut [f64]) {
    let k = problem.anchor;
    for i in k..values.len() - 1 {
        let base = values[i];
        values[i + 1] = snap(values[i + 1], |x| x - base, base, 1.0, problem.lowers[i], problem.uppers[i]);
    }
    for i in (0..k).rev() {
        let base = values[i + 1];
        values[i] = snap(values[i], |x| base - x, base, -1.0, problem.lowers[i], problem.uppers[i]);
    }
}

/// Adjusts `x` so that `lo ≤ diff(x) ≤ hi`, where `diff(x)` is
/// `sign·(x − base)` up to rounding. Gives up after a few ulps.
fn snap(mut x: f64, diff: impl Fn(f64) -> f64, base: f64, sign: f64, lo: f64, hi: f64) -> f64 {
    let d = diff(x);
    if d < lo {
        x = base + sign * lo;
    } else if d > hi {
        x = base + sign * hi;
    }
    for _ in 0..16 {
        let d = diff(x);
        let up = if d < lo {
            sign > 0.0
        } else if d > hi {
            sign < 0.0
        } else {
            return x;
        };
        x = if up { x.next_up() } else { x.next_down() };
    }
    x
}

/// An activation fitted to a projected sample, with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationFit {
    pub activation: Activation,
    /// `Σᵢ (u(zᵢ) − yᵢ)²` over the input sample (unnormalized).
    pub objective: f64,
    pub kkt_residual: f64,
}

/// Best least-squares activation in `U(a,b)` for the pairs `(zᵢ, yᵢ)`.
pub fn fit_activation(projections: &[f64], labels: &[f64], a: f64, b: f64, tol: f64) -> Result<Activation> {
    let (_, prep) = prepare(projections, labels, a, b, tol)?;
    let values = solve_values(&prep.qp);
    Ok(Activation::assemble(prep.knots, values, prep.qp.anchor, a, b))
}

/// [`fit_activation`] together with the fitted value `u(zᵢ)` of every input
/// pair, in input order.
pub fn fit_activation_with_values(
    projections: &[f64],
    labels: &[f64],
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(Activation, Vec<f64>)> {
    let (pairs, prep) = prepare(projections, labels, a, b, tol)?;
    let values = solve_values(&prep.qp);
    let mut fitted = vec![0.0; projections.len()];
    for (&(_, _, i), &g) in pairs.iter().zip(&prep.group_of) {
        if i != ANCHOR {
            fitted[i as usize] = values[g];
        }
    }
    Ok((Activation::assemble(prep.knots, values, prep.qp.anchor, a, b), fitted))
}

/// [`fit_activation`] with objective and optimality residual.
///
/// An anchor `(0, 0)` is added; samples with equal projections are merged
/// into one knot whose target is their mean, weighted by multiplicity.
pub fn fit_activation_report(projections: &[f64], labels: &[f64], a: f64, b: f64, tol: f64) -> Result<ActivationFit> {
    let (pairs, prep) = prepare(projections, labels, a, b, tol)?;
    let values = solve_values(&prep.qp);
    let kkt_residual = prep.qp.kkt_residual(&values, tol);
    let objective: KahanSum = pairs
        .iter()
        .zip(&prep.group_of)
        .filter(|((_, _, i), _)| *i != ANCHOR)
        .map(|(&(_, y, _), &g)| (values[g] - y).powi(2))
        .collect();
    let activation = into_activation(prep.knots, values, a, b)?;
    Ok(ActivationFit { activation, objective: objective.value(), kkt_residual })
}

fn into_activation(knots: Vec<f64>, values: Vec<f64>, a: f64, b: f64) -> Result<Activation> {
    Activation::new(knots, values, a, b)
        .map_err(|e| Error::InvalidActivation(format!("solver produced an inadmissible fit: {e}")))
}

/// Input position of the anchor marker among the sorted pairs.
const ANCHOR: u32 = u32::MAX;

/// `(projection, label, input index)`.
type Triple = (f64, f64, u32);

/// Sorts by projection; within a tie, by label, so that merged targets do
/// not depend on the input order.
fn sort_pairs(pairs: &mut [Triple]) {
    // Order-preserving map of finite floats onto integers (with −0 = +0).
    let key = |z: f64| {
        let bits = (z + 0.0).to_bits();
        if bits >> 63 == 1 {
            !bits
        } else {
            bits | (1 << 63)
        }
    };
    pairs.sort_unstable_by_key(|p| key(p.0));
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 == pairs[start].0 {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_unstable_by(|p, q| p.1.total_cmp(&q.1).then(p.2.cmp(&q.2)));
        }
        start = end;
    }
}

struct Prepared {
    qp: ChainQp,
    knots: Vec<f64>,
    /// Knot index of every sorted pair.
    group_of: Vec<usize>,
}

/// Validates the input and builds the merged, sorted chain problem.
///
/// Also returns the sorted `(z, y, input index)` triples, including the
/// anchor marker (label NaN, index [`ANCHOR`]).
fn prepare(projections: &[f64], labels: &[f64], a: f64, b: f64, tol: f64) -> Result<(Vec<Triple>, Prepared)> {
    if projections.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: projections.len(), got: labels.len() });
    }
    if projections.is_empty() {
        return Err(Error::Empty("projections"));
    }
    if !projections.iter().chain(labels).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("fit input"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !(a >= 0.0 && a <= b && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 ≤ a ≤ b, got a = {a}, b = {b}")));
    }

    if projections.len() >= ANCHOR as usize {
        return Err(Error::InvalidArgument(format!("too many samples to fit: {}", projections.len())));
    }
    let mut pairs: Vec<Triple> =
        projections.iter().zip(labels).enumerate().map(|(i, (&z, &y))| (z, y, i as u32)).collect();
    pairs.push((0.0, f64::NAN, ANCHOR)); // anchor marker, carries no label
    sort_pairs(&mut pairs);

    let mut knots = Vec::with_capacity(pairs.len());
    let mut sums: Vec<KahanSum> = Vec::with_capacity(pairs.len());
    let mut weights = Vec::with_capacity(pairs.len());
    let mut group_of = Vec::with_capacity(pairs.len());
    for &(z, y, _) in &pairs {
        if knots.last() != Some(&z) {
            knots.push(if z == 0.0 { 0.0 } else { z });
            sums.push(KahanSum::new());
            weights.push(0.0);
        }
        if !y.is_nan() {
            sums.last_mut().unwrap().add(y);
            *weights.last_mut().unwrap() += 1.0;
        }
        group_of.push(knots.len() - 1);
    }
    let targets: Vec<f64> =
        sums.iter().zip(&weights).map(|(s, &c)| if c > 0.0 { s.value() / c } else { 0.0 }).collect();
    let (lowers, uppers) = link_bounds(&knots, a, b);
    let anchor = knots.iter().position(|&z| z == 0.0).expect("anchor marker is present");
    // Valid by construction: finite inputs, positive weights off the anchor, ℓ ≤ u.
    let qp = ChainQp { targets, weights, lowers, uppers, anchor };
    Ok((pairs, Prepared { qp, knots, group_of }))
}
