//! The convex surrogate `L_sur(w; u) = E[∫₀^{w·x} (u(r) − y) dr]` and its
//! gradient `E[(u(w·x) − y) x]`, in empirical form.

use crate::activation::Activation;
use crate::data::Dataset;
use crate::error::Result;
use crate::metrics::{check_dim, KahanSum};

const BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub gradient: Vec<f64>,
    pub norm_sq: f64,
    /// Empirical squared loss of `u(w·x)`, computed in the same pass.
    pub loss: f64,
}

/// `∫₀ᵗ u(r) dr`.
pub fn activation_integral(u: &Activation, t: f64) -> f64 {
    u.integral(t)
}

/// `(1/m) Σ [∫₀^{w·xᵢ} u − yᵢ (w·xᵢ)]`; convex in `w` for fixed `u`.
pub fn surrogate_loss(w: &[f64], u: &Activation, data: &Dataset) -> Result<f64> {
    let proj = data.project(w)?;
    let s: KahanSum = proj.iter().zip(data.labels()).map(|(&p, &y)| u.integral(p) - y * p).collect();
    Ok(s.value() / data.len() as f64)
}

/// `(1/m) Σ (u(w·xᵢ) − yᵢ) xᵢ`.
pub fn surrogate_gradient(w: &[f64], u: &Activation, data: &Dataset) -> Result<GradientReport> {
    let proj = data.project(w)?;
    gradient_at_projections(u, data, &proj)
}

/// Gradient given precomputed projections `w·xᵢ`.
pub fn gradient_at_projections(u: &Activation, data: &Dataset, proj: &[f64]) -> Result<GradientReport> {
    check_dim(data.len(), proj.len())?;
    let fitted: Vec<f64> = proj.iter().map(|&p| u.eval(p)).collect();
    gradient_at_fitted(data, &fitted)
}

/// Gradient given the predictions `u(w·xᵢ)`.
pub fn gradient_at_fitted(data: &Dataset, fitted: &[f64]) -> Result<GradientReport> {
    check_dim(data.len(), fitted.len())?;
    let d = data.dim();
    let mut acc = vec![KahanSum::new(); d];
    let mut loss = KahanSum::new();
    // Plain sums over short blocks, compensated across blocks.
    let mut block = vec![0.0; d];
    let mut residuals = Vec::with_capacity(BLOCK);
    for (xs, (ys, ps)) in data.features().chunks(BLOCK * d).zip(data.labels().chunks(BLOCK).zip(fitted.chunks(BLOCK))) {
        residuals.clear();
        residuals.extend(ps.iter().zip(ys).map(|(&f, &y)| f - y));
        block.fill(0.0);
        let mut block_loss = 0.0;
        for (x, &r) in xs.chunks_exact(d).zip(&residuals) {
            block_loss += r * r;
            for (b, xi) in block.iter_mut().zip(x) {
                *b += r * xi;
            }
        }
        loss.add(block_loss);
        for (a, &b) in acc.iter_mut().zip(&block) {
            a.add(b);
        }
    }
    let m = data.len() as f64;
    let gradient: Vec<f64> = acc.iter().map(|a| a.value() / m).collect();
    let norm_sq = gradient.iter().map(|g| g * g).sum();
    Ok(GradientReport { gradient, norm_sq, loss: loss.value() / m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Link;
    use crate::data::Sample;
    use crate::error::Error;
    use crate::hypothesis::Hypothesis;
    use proptest::prelude::*;

    fn id() -> Activation {
        Activation::linear(1.0, 0.5, 2.0).unwrap()
    }

    fn one(x: Vec<f64>, y: f64) -> Dataset {
        Dataset::from_samples(vec![Sample::new(x, y)]).unwrap()
    }

    #[test]
    fn loss_examples() {
        let data = one(vec![1.0], 0.0);
        assert_eq!(surrogate_loss(&[0.0], &id(), &data).unwrap(), 0.0);
        assert_eq!(surrogate_loss(&[2.0], &id(), &data).unwrap(), 2.0);
        assert_eq!(surrogate_loss(&[2.0], &id(), &one(vec![1.0], 1.0)).unwrap(), 0.0);
        assert_eq!(activation_integral(&id(), 1.0), 0.5);
    }

    #[test]
    fn gradient_examples() {
        let g = surrogate_gradient(&[1.0, 0.0], &id(), &one(vec![1.0, 0.0], 0.0)).unwrap();
        assert_eq!(g.gradient, vec![1.0, 0.0]);
        assert_eq!(g.norm_sq, 1.0);
        assert_eq!(g.loss, 1.0);
        assert!(matches!(
            surrogate_gradient(&[1.0], &id(), &one(vec![1.0, 0.0], 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_on_realizable_data() {
        let h = Hypothesis::new(vec![0.4, -0.9], Link::LeakyRelu { slope: 0.5 }.to_activation(0.5, 1.0).unwrap());
        let samples = (0..50)
            .map(|i| {
                let x = vec![(i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.11).cos()];
                let y = h.predict(&x);
                Sample::new(x, y)
            })
            .collect();
        let data = Dataset::from_samples(samples).unwrap();
        let g = surrogate_gradient(&h.w, &h.activation, &data).unwrap();
        assert_eq!(g.norm_sq, 0.0);
    }

    #[test]
    fn gradient_does_not_depend_on_sample_order() {
        let u = Link::SaturatingRamp.to_activation(0.5, 1.0).unwrap();
        let w = [0.7, -0.2, 0.4];
        let rows: Vec<Sample> = (0..5000)
            .map(|i| {
                let t = i as f64;
                let x = vec![(t * 0.731).sin() * 3.0, (t * 0.137).cos(), (t * 1.913).sin() * 1e-3];
                Sample::new(x, (t * 0.05).sin() * 10.0)
            })
            .collect();
        let g = surrogate_gradient(&w, &u, &Dataset::from_samples(rows.clone()).unwrap()).unwrap();
        let mut reference = [KahanSum::new(); 3];
        for r in &rows {
            let res = u.eval(crate::metrics::dot(&w, &r.x)) - r.y;
            for (acc, xj) in reference.iter_mut().zip(&r.x) {
                acc.add(res * xj);
            }
        }
        let mut reversed = rows;
        reversed.reverse();
        let g_rev = surrogate_gradient(&w, &u, &Dataset::from_samples(reversed).unwrap()).unwrap();
        for (j, r) in reference.iter().enumerate() {
            let exact = r.value() / 5000.0;
            assert!((g.gradient[j] - exact).abs() <= 1e-12 * exact.abs().max(1e-300), "{j}");
            assert!((g_rev.gradient[j] - exact).abs() <= 1e-12 * exact.abs().max(1e-300), "{j}");
        }
    }

    fn arb_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Dataset)> {
        (
            prop::collection::vec(-2.0..2.0f64, 3),
            prop::collection::vec(-2.0..2.0f64, 3),
            prop::collection::vec((prop::collection::vec(-2.0..2.0f64, 3), -3.0..3.0f64), 5..40),
        )
            .prop_map(|(w1, w2, rows)| {
                let data = Dataset::from_samples(rows.into_iter().map(|(x, y)| Sample::new(x, y)).collect()).unwrap();
                (w1, w2, data)
            })
    }

    proptest! {
        #[test]
        fn surrogate_is_convex((w1, w2, data) in arb_problem(), lam in 0.01..0.99f64) {
            let u = Link::SaturatingRamp.to_activation(0.5, 1.0).unwrap();
            let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            let lhs = surrogate_loss(&mid, &u, &data).unwrap();
            let rhs = lam * surrogate_loss(&w1, &u, &data).unwrap() + (1.0 - lam) * surrogate_loss(&w2, &u, &data).unwrap();
            prop_assert!(lhs <= rhs + 1e-10);
        }
    }
}
