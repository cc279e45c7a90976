//! Brute-force reference solver for small chain problems.
//!
//! Works in difference coordinates `dᵢ = ỹᵢ₊₁ − ỹᵢ`, where the feasible set
//! is a box and projection is a clamp. Accelerated projected gradient runs to
//! stationarity, then the detected active set is polished by an exact face
//! solve. For `n ≤ 5` every active set (free / at lower / at upper per link)
//! is enumerated instead and the best feasible face minimizer is returned.

use super::{ChainQp, FitResult};
use crate::error::{Error, Result};

pub const MAX_ORACLE_NODES: usize = 10;
const ENUMERATION_NODES: usize = 5;

/// Independent solution of `problem` for `n ≤ 10` nodes.
///
/// `grid_tol` is the stationarity tolerance of the gradient phase.
pub fn brute_fit_oracle(problem: &ChainQp, grid_tol: f64) -> Result<FitResult> {
    problem.validate()?;
    let n = problem.len();
    if n > MAX_ORACLE_NODES {
        return Err(Error::TooLarge(n));
    }
    if !(grid_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("grid_tol must be positive, got {grid_tol}")));
    }
    let map = DiffMap::new(problem);
    let d = if n <= ENUMERATION_NODES {
        enumerate_faces(problem, &map)
    } else {
        let d = projected_gradient(problem, &map, grid_tol);
        polish(problem, &map, &d).unwrap_or(d)
    };
    let values = map.values(&d);
    Ok(FitResult { objective: problem.objective(&values), kkt_residual: problem.kkt_residual(&values, 1e-9), values })
}

/// Linear map from link differences to node values with the anchor at 0.
struct DiffMap {
    n: usize,
    anchor: usize,
}

impl DiffMap {
    fn new(p: &ChainQp) -> Self {
        Self { n: p.len(), anchor: p.anchor }
    }

    /// `∂ỹ_j/∂d_i ∈ {−1, 0, 1}`.
    fn coef(&self, j: usize, i: usize) -> f64 {
        let k = self.anchor;
        if i >= k && j > i {
            1.0
        } else if i < k && j <= i {
            -1.0
        } else {
            0.0
        }
    }

    fn values(&self, d: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n - 1).map(|i| self.coef(j, i) * d[i]).sum()).collect()
    }

    fn gradient(&self, p: &ChainQp, d: &[f64]) -> Vec<f64> {
        let t = self.values(d);
        let r: Vec<f64> = (0..self.n).map(|j| 2.0 * p.weights[j] * (t[j] - p.targets[j])).collect();
        (0..self.n - 1).map(|i| (0..self.n).map(|j| self.coef(j, i) * r[j]).sum()).collect()
    }

    /// Hessian `2 Mᵀ C M` in difference coordinates.
    fn hessian(&self, p: &ChainQp) -> Vec<Vec<f64>> {
        let m = self.n - 1;
        let mut h = vec![vec![0.0; m]; m];
        for (r, row) in h.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..self.n).map(|j| 2.0 * p.weights[j] * self.coef(j, r) * self.coef(j, c)).sum();
            }
        }
        h
    }
}

fn clamp_box(p: &ChainQp, d: &mut [f64]) {
    for (i, v) in d.iter_mut().enumerate() {
        *v = v.clamp(p.lowers[i], p.uppers[i]);
    }
}

/// FISTA with gradient-based restarts.
fn projected_gradient(p: &ChainQp, map: &DiffMap, tol: f64) -> Vec<f64> {
    let m = p.len() - 1;
    if m == 0 {
        return Vec::new();
    }
    let lip = max_eigenvalue(&map.hessian(p)).max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;
    let mut x = vec![0.0; m];
    clamp_box(p, &mut x);
    let mut yk = x.clone();
    let mut momentum = 1.0f64;
    for _ in 0..2_000_000 {
        let g = map.gradient(p, &yk);
        let mut next: Vec<f64> = yk.iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
        clamp_box(p, &mut next);
        // gradient-mapping norm measures stationarity
        let gm = next.iter().zip(&yk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / step;
        let next_m = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let restart = next.iter().zip(&x).zip(&yk).map(|((nx, ox), yy)| (yy - nx) * (nx - ox)).sum::<f64>() > 0.0;
        let beta = if restart { 0.0 } else { (momentum - 1.0) / next_m };
        yk = next.iter().zip(&x).map(|(nx, ox)| nx + beta * (nx - ox)).collect();
        clamp_box(p, &mut yk);
        momentum = if restart { 1.0 } else { next_m };
        x = next;
        if gm <= tol {
            break;
        }
    }
    x
}

fn max_eigenvalue(h: &[Vec<f64>]) -> f64 {
    let m = h.len();
    let mut v = vec![1.0; m];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = h.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        lambda = nrm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / nrm).collect();
    }
    // small safety margin for the power-iteration estimate
    lambda * 1.01
}

#[derive(Clone, Copy, PartialEq)]
enum LinkState {
    Free,
    Lower,
    Upper,
}

/// Minimizes over the face where non-free links sit at their bounds.
/// Returns `None` if the face minimizer leaves the box.
fn face_solve(p: &ChainQp, map: &DiffMap, states: &[LinkState]) -> Option<Vec<f64>> {
    let m = states.len();
    let mut d: Vec<f64> = states
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            LinkState::Lower => p.lowers[i],
            LinkState::Upper => p.uppers[i],
            LinkState::Free => 0.0,
        })
        .collect();
    let free: Vec<usize> = (0..m).filter(|&i| states[i] == LinkState::Free).collect();
    if !free.is_empty() {
        // Newton step from d restricted to the free coordinates is exact
        // for a quadratic.
        let g = map.gradient(p, &d);
        let h = map.hessian(p);
        let sub: Vec<Vec<f64>> = free.iter().map(|&r| free.iter().map(|&c| h[r][c]).collect()).collect();
        let rhs: Vec<f64> = free.iter().map(|&r| -g[r]).collect();
        let delta = solve_dense(sub, rhs)?;
        for (&i, dv) in free.iter().zip(delta) {
            d[i] += dv;
        }
    }
    let slack = 1e-12;
    let inside = free.iter().all(|&i| {
        d[i] >= p.lowers[i] - slack * (1.0 + p.lowers[i].abs())
            && d[i] <= p.uppers[i] + slack * (1.0 + p.uppers[i].abs())
    });
    inside.then(|| {
        clamp_box(p, &mut d);
        d
    })
}

fn enumerate_faces(p: &ChainQp, map: &DiffMap) -> Vec<f64> {
    let m = p.len() - 1;
    let total = 3usize.pow(m as u32);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..total {
        let mut c = code;
        let states: Vec<LinkState> = (0..m)
            .map(|_| {
                let s = [LinkState::Free, LinkState::Lower, LinkState::Upper][c % 3];
                c /= 3;
                s
            })
            .collect();
        if let Some(d) = face_solve(p, map, &states) {
            let obj = p.objective(&map.values(&d));
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, d));
            }
        }
    }
    // every vertex of the box is a feasible face, so `best` is set
    best.map(|(_, d)| d).unwrap_or_default()
}

fn polish(p: &ChainQp, map: &DiffMap, d: &[f64]) -> Option<Vec<f64>> {
    let states: Vec<LinkState> = d
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (lo, hi) = (p.lowers[i], p.uppers[i]);
            if (v - lo).abs() <= 1e-9 * (1.0 + lo.abs()) {
                LinkState::Lower
            } else if (v - hi).abs() <= 1e-9 * (1.0 + hi.abs()) {
                LinkState::Upper
            } else {
                LinkState::Free
            }
        })
        .collect();
    let polished = face_solve(p, map, &states)?;
    let before = p.objective(&map.values(d));
    let after = p.objective(&map.values(&polished));
    (after <= before + 1e-12 * (1.0 + before.abs())).then_some(polished)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for (r, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[col + 1 + r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::solve_chain_qp;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reproduces_hand_examples() {
        let cases = [
            (ChainQp::new(vec![3.0], vec![], vec![], 0).unwrap(), vec![0.0]),
            (ChainQp::new(vec![0.0, 2.0, 1.0], vec![0.1, 0.1], vec![10.0, 10.0], 0).unwrap(), vec![0.0, 1.45, 1.55]),
            (ChainQp::new(vec![0.0, 5.0], vec![0.0], vec![1.0], 0).unwrap(), vec![0.0, 1.0]),
        ];
        for (qp, expected) in cases {
            let r = brute_fit_oracle(&qp, 1e-12).unwrap();
            for (v, e) in r.values.iter().zip(&expected) {
                assert_abs_diff_eq!(v, e, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn interior_optimum_is_shifted_least_squares() {
        // Targets strictly inside every band: the minimizer is the targets
        // themselves, with the anchor pinned to 0 whatever its own target.
        use rand::Rng;
        let mut rng = crate::rng::rng_for(11, 0);
        for _ in 0..50 {
            let n = rng.random_range(2..=10);
            let k = rng.random_range(0..n);
            let mut targets = vec![0.0; n];
            for j in (0..k).rev() {
                targets[j] = targets[j + 1] - rng.random_range(0.2..0.8);
            }
            for j in k + 1..n {
                targets[j] = targets[j - 1] + rng.random_range(0.2..0.8);
            }
            targets[k] = rng.random_range(-0.05..0.05);
            let lowers: Vec<f64> = (0..n - 1).map(|i| if i >= k { 0.1 } else { 0.0 }).collect();
            let qp = ChainQp::new(targets.clone(), lowers, vec![1.0; n - 1], k).unwrap();
            let r = brute_fit_oracle(&qp, 1e-12).unwrap();
            for (j, (&v, &y)) in r.values.iter().zip(&targets).enumerate() {
                let expected = if j == k { 0.0 } else { y };
                assert_abs_diff_eq!(v, expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(
            brute_fit_oracle(&ChainQp::new(vec![0.0; 11], vec![0.0; 10], vec![1.0; 10], 0).unwrap(), 1e-9),
            Err(Error::TooLarge(11))
        ));
        let bad = ChainQp {
            targets: vec![0.0, 1.0],
            weights: vec![1.0, 1.0],
            lowers: vec![2.0],
            uppers: vec![1.0],
            anchor: 0,
        };
        assert!(matches!(brute_fit_oracle(&bad, 1e-9), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn gradient_phase_agrees_with_enumeration() {
        let qp = ChainQp::new(vec![1.0, -3.0, 0.0, 4.0, -2.0], vec![0.0, 0.0, 0.5, 0.5], vec![2.0, 2.0, 2.0, 2.0], 2)
            .unwrap();
        let map = DiffMap::new(&qp);
        let exact = map.values(&enumerate_faces(&qp, &map));
        let pg = map.values(&projected_gradient(&qp, &map, 1e-12));
        for (a, b) in exact.iter().zip(&pg) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        let dp = solve_chain_qp(&qp, 1e-9).unwrap();
        for (a, b) in exact.iter().zip(&dp.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }
}
