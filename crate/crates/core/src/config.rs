//! Hyperparameters of the learner and the schedule derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Minimum slope of activations on `[0, ∞)`.
    pub a: f64,
    /// Lipschitz constant of activations.
    pub b: f64,
    /// Density floor / tail rate of the marginal.
    #[serde(rename = "L")]
    pub l: f64,
    /// Half-width of the box on which the density floor holds.
    #[serde(rename = "R")]
    pub r: f64,
    /// Norm bound on weight vectors.
    #[serde(rename = "W")]
    pub w: f64,
    pub eps: f64,
    pub delta: f64,
    /// Sharpness constant; `min(1, a²LR⁴/b)` when unset.
    pub mu: Option<f64>,
    /// Initialization step; `μ³/(2⁷b⁴)` when unset.
    pub eta_init: Option<f64>,
    /// Optimization step; `μ/(4b²)` when unset.
    pub eta_opt: Option<f64>,
    pub t0_cap: usize,
    #[serde(rename = "T_cap")]
    pub t_cap: usize,
    #[serde(rename = "J_cap")]
    pub j_cap: usize,
    pub m_batch: usize,
    pub m_test: usize,
    pub m_init: usize,
    pub seed: u64,
    /// Absolute constant inside the test-truncation radius.
    pub test_constant: f64,
    pub fit_tol: f64,
    pub kkt_tol: f64,
    pub fd_tol: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 1.0,
            l: 0.05,
            r: 1.0,
            w: 2.0,
            eps: 1e-2,
            delta: 0.1,
            mu: None,
            eta_init: None,
            eta_opt: None,
            t0_cap: 200,
            t_cap: 500,
            j_cap: 64,
            m_batch: 2048,
            m_test: 4096,
            m_init: 2048,
            seed: 0,
            test_constant: 1.0,
            fit_tol: 1e-9,
            kkt_tol: 1e-7,
            fd_tol: 1e-5,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg()))
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.a, self.b);
        check(a > 0.0 && a <= 1.0 && b >= 1.0 && b.is_finite(), || {
            format!("need 0 < a ≤ 1 ≤ b, got a = {a}, b = {b}")
        })?;
        check(self.l > 0.0 && self.l <= 1.0, || format!("need 0 < L ≤ 1, got {}", self.l))?;
        check(self.r > 0.0 && self.r <= 1.0, || format!("need 0 < R ≤ 1, got {}", self.r))?;
        check(self.w > 0.0 && self.w.is_finite(), || format!("need W > 0, got {}", self.w))?;
        check(self.eps > 0.0 && self.eps < 1.0, || format!("need eps in (0,1), got {}", self.eps))?;
        check(self.delta > 0.0 && self.delta < 1.0, || format!("need delta in (0,1), got {}", self.delta))?;
        if let Some(mu) = self.mu {
            check(mu > 0.0 && mu <= 1.0, || format!("need 0 < mu ≤ 1, got {mu}"))?;
        }
        for (name, eta) in [("eta_init", self.eta_init), ("eta_opt", self.eta_opt)] {
            if let Some(eta) = eta {
                check(eta >= 0.0 && eta.is_finite(), || {
                    format!("{name} must be a finite non-negative step, got {eta}")
                })?;
            }
        }
        check(self.j_cap >= 1, || "J_cap must be at least 1".into())?;
        check(self.m_batch >= 1 && self.m_test >= 1 && self.m_init >= 1, || "batch sizes must be at least 1".into())?;
        check(self.test_constant > 0.0, || "test_constant must be positive".into())?;
        check(self.fit_tol > 0.0 && self.kkt_tol > 0.0 && self.fd_tol > 0.0, || "tolerances must be positive".into())?;
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or_else(|| (self.a * self.a * self.l * self.r.powi(4) / self.b).min(1.0))
    }

    pub fn eta_init(&self) -> f64 {
        self.eta_init.unwrap_or_else(|| self.mu().powi(3) / (128.0 * self.b.powi(4)))
    }

    pub fn eta_opt(&self) -> f64 {
        self.eta_opt.unwrap_or_else(|| self.mu() / (4.0 * self.b * self.b))
    }

    /// Number of initialization steps, `⌈(b/μ)⁶ ln(4b/μ)⌉` capped at `t0_cap`.
    pub fn init_steps(&self) -> usize {
        let ratio = self.b / self.mu();
        cap((ratio.powi(6) * (4.0 * ratio).ln()).ceil(), self.t0_cap)
    }

    /// Number of inner steps per scale, `⌈(b/μ)² ln(1/ε)⌉` capped at `T_cap`.
    pub fn inner_steps(&self) -> usize {
        let ratio = self.b / self.mu();
        cap((ratio * ratio * (1.0 / self.eps).ln()).ceil(), self.t_cap)
    }

    /// Scales `β₁ < … < β_J` in `(0, W]`.
    ///
    /// The natural grid has spacing `η√ε`; when that needs more than `J_cap`
    /// points the grid is replaced by `J_cap` uniform points on `(0, W]`.
    pub fn scale_grid(&self) -> Vec<f64> {
        let spacing = self.eta_opt() * self.eps.sqrt();
        let natural = if spacing > 0.0 { (self.w / spacing).ceil() } else { f64::INFINITY };
        if natural <= self.j_cap as f64 {
            let j = (natural as usize).max(1);
            (1..=j).map(|i| (i as f64 * spacing).min(self.w)).collect()
        } else {
            log::warn!(
                "scale grid capped at {} points (natural size {natural}); resolution is W/J = {}",
                self.j_cap,
                self.w / self.j_cap as f64
            );
            (1..=self.j_cap).map(|i| i as f64 * self.w / self.j_cap as f64).collect()
        }
    }

    /// Label truncation level `M = (bW/L)·ln(16b⁴W⁴/ε²)`.
    pub fn label_cap(&self) -> f64 {
        let bw = self.b * self.w;
        bw / self.l * (16.0 * bw.powi(4) / (self.eps * self.eps)).ln()
    }

    /// Radius `r` of the test-time projection window `|w·x| ≤ W·r`.
    pub fn test_radius(&self) -> f64 {
        let bw = self.b * self.w;
        let inner = self.test_constant * bw.powi(4) / (self.l.powi(6) * self.eps * self.eps);
        let log_term = (bw / self.eps).ln().powi(2).max(1.0);
        ((inner * log_term).ln() / self.l).max(0.0)
    }
}

fn cap(x: f64, limit: usize) -> usize {
    if x.is_finite() && x < limit as f64 {
        x.max(0.0) as usize
    } else {
        limit
    }
}
