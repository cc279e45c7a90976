//! Exact solver for one-sided chains.
//!
//! A half chain starts at a node pinned to 0 and continues through nodes
//! `1..=p` with weighted targets; consecutive differences `t_i − t_{i−1}`
//! must lie in `[lo_i, hi_i]`.
//!
//! The backward pass keeps the derivative of the cost-to-go
//! `F_i(t) = c_i (t − y_i)² + min_{d ∈ [lo_{i+1}, hi_{i+1}]} F_{i+1}(t + d)`.
//! `F_i'` is continuous, piecewise linear and strictly increasing. It is
//! stored as the linear piece containing the current root plus two stacks
//! of breakpoints (left and right of that piece), each with a lazy shift.
//! A breakpoint carries the jump in slope across it. The min-convolution
//! with the link interval splits the derivative at its root, shifts the two
//! halves apart and inserts a zero piece in between; adding the next
//! quadratic only changes the current piece. The forward pass then clamps
//! each recorded root into the window allowed by its predecessor.

#[derive(Debug, Clone, Copy)]
struct Kink {
    at: f64,
    jump: f64,
}

#[derive(Debug, Default)]
struct Derivative {
    left: Vec<Kink>,
    left_shift: f64,
    right: Vec<Kink>,
    right_shift: f64,
    slope: f64,
    intercept: f64,
}

impl Derivative {
    fn left_top(&self) -> Option<f64> {
        self.left.last().map(|k| k.at + self.left_shift)
    }

    fn right_top(&self) -> Option<f64> {
        self.right.last().map(|k| k.at + self.right_shift)
    }

    fn add_quadratic(&mut self, weight: f64, target: f64) {
        self.slope += 2.0 * weight;
        self.intercept -= 2.0 * weight * target;
    }

    /// Value of the current piece at `t`.
    fn at(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }

    /// Moves the current piece onto the one containing the zero crossing
    /// and returns it. `F'` is increasing, so the search only ever moves in
    /// one direction.
    fn root(&mut self) -> f64 {
        while let Some(p) = self.left_top().filter(|&p| self.at(p) > 0.0) {
            let k = self.left.pop().unwrap();
            self.slope -= k.jump;
            self.intercept += k.jump * p;
            self.right.push(Kink { at: p - self.right_shift, jump: k.jump });
            // Rounding can leave the crossing exactly on the kink.
            if self.at(p) <= 0.0 {
                return p;
            }
        }
        while let Some(q) = self.right_top().filter(|&q| self.at(q) < 0.0) {
            let k = self.right.pop().unwrap();
            self.slope += k.jump;
            self.intercept -= k.jump * q;
            self.left.push(Kink { at: q - self.left_shift, jump: k.jump });
            if self.at(q) >= 0.0 {
                return q;
            }
        }
        -self.intercept / self.slope
    }

    /// Replaces `F'` by the derivative of `t ↦ min_{d ∈ [lo, hi]} F(t + d)`,
    /// given the root of `F'`.
    fn min_convolve(&mut self, root: f64, lo: f64, hi: f64) {
        self.left_shift -= hi;
        self.right_shift -= lo;
        if hi > lo {
            let a = self.slope;
            self.left.push(Kink { at: root - hi - self.left_shift, jump: -a });
            self.right.push(Kink { at: root - lo - self.right_shift, jump: a });
            self.slope = 0.0;
            self.intercept = 0.0;
        } else {
            self.intercept += self.slope * hi;
        }
    }
}

/// Solves the half chain; returns `t_1..=t_p`.
///
/// `targets`, `weights`, `lo` and `hi` all have length `p`; `lo[i]`/`hi[i]`
/// bound `t_{i+1} − t_i` (with `t_0 = 0`). Weights must be positive.
/// Roots are clamped to `[−bound, bound]`, a box known to contain every
/// feasible point.
pub(crate) fn solve_half(targets: &[f64], weights: &[f64], lo: &[f64], hi: &[f64], bound: f64) -> Vec<f64> {
    let p = targets.len();
    if p == 0 {
        return Vec::new();
    }
    let mut roots = vec![0.0; p];
    let mut deriv =
        Derivative { left: Vec::with_capacity(2 * p), right: Vec::with_capacity(2 * p), ..Default::default() };
    deriv.add_quadratic(weights[p - 1], targets[p - 1]);
    for i in (0..p).rev() {
        let r = deriv.root().clamp(-bound, bound);
        roots[i] = r;
        if i > 0 {
            deriv.min_convolve(r, lo[i], hi[i]);
            deriv.add_quadratic(weights[i - 1], targets[i - 1]);
        }
    }
    let mut out = Vec::with_capacity(p);
    let mut prev = 0.0;
    for i in 0..p {
        let t = roots[i].clamp(prev + lo[i], prev + hi[i]);
        out.push(t);
        prev = t;
    }
    out
}
