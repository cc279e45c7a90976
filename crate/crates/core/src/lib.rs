//! Learning single-index models `x ↦ u(w·x)` with an unknown monotone link
//! under agnostic label noise.
//!
//! The learner alternates two steps at a fixed scale `β = ‖w‖`:
//!
//! * fit the best activation in the class `U(a,b)` (non-decreasing,
//!   `b`-Lipschitz, `u(0) = 0`, slope at least `a` on `[0, ∞)`) to the
//!   projected sample by an exact chain-constrained least-squares solver
//!   ([`fit`]);
//! * take a gradient step on the convex surrogate
//!   `E[∫₀^{w·x} (u(r) − y) dr]` and renormalize onto the sphere of radius `β`
//!   ([`surrogate`], [`learner`]).
//!
//! Scales are swept over a grid, restarts come from a short gradient-descent
//! initialization, and a held-out test batch picks the final hypothesis.
//! [`synth`] generates well-behaved marginals with planted targets and
//! oblivious label corruption; [`harness`] runs experiments and probes of the
//! structural properties the method relies on.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod config;
pub mod data;
pub mod error;
pub mod fit;
pub mod harness;
pub mod hypothesis;
pub mod learner;
pub mod metrics;
pub mod rng;
pub mod surrogate;
pub mod synth;

pub use activation::Activation;
pub use config::LearnerConfig;
pub use data::{Dataset, Sample};
pub use error::{Error, Result};
pub use fit::{fit_activation, solve_chain_qp, ChainQp, FitResult};
pub use hypothesis::Hypothesis;
pub use learner::{learn, LearnOutput, SampleSource};
pub use metrics::{angle, l2_loss, misalignment};
