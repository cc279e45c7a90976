//! Seeded Monte-Carlo checks of the learner's building blocks.

use agnostic_sim::activation::Link;
use agnostic_sim::harness::rotate_towards_random;
use agnostic_sim::learner::{initialize, learn, optimize, run_inner_loop, Reuse, TaskId};
use agnostic_sim::metrics::{l2_loss, norm, sub};
use agnostic_sim::synth::{MarginalSpec, NoiseModel, Scenario, ScenarioSpec};
use agnostic_sim::{misalignment, LearnerConfig};

fn scenario(wstar: Vec<f64>, link: Link, noise: NoiseModel, seed: u64) -> Scenario {
    let d = wstar.len();
    ScenarioSpec::new(MarginalSpec::gaussian(d), wstar, link, noise, seed).build().unwrap()
}

fn e1(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

#[test]
fn initialization_reaches_the_target_cone() {
    let mut hits = 0;
    for seed in 0..20 {
        let sc = scenario(e1(10), Link::Linear { slope: 1.0 }, NoiseModel::None, 100 + seed);
        let cfg = LearnerConfig { a: 1.0, b: 1.0, t0_cap: 5, seed, ..Default::default() };
        let its = initialize(&cfg, &sc).unwrap();
        assert_eq!(its.len(), 6);
        if its.iter().any(|w| misalignment(sc.wstar(), w) <= 0.25 * norm(sc.wstar())) {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn inner_loop_reduces_misalignment() {
    let mut hits = 0;
    for seed in 0..20 {
        let sc = scenario(e1(10), Link::Linear { slope: 1.0 }, NoiseModel::None, 200 + seed);
        let cfg = LearnerConfig { a: 1.0, b: 1.0, t_cap: 20, m_batch: 1024, seed, ..Default::default() };
        let w0 = rotate_towards_random(sc.wstar(), 1.0, seed, 9).unwrap();
        let (h, trace) = run_inner_loop(&w0, 1.0, &cfg, &sc, TaskId { restart: 0, grid: 1 }).unwrap();
        assert_eq!(trace.len(), 21);
        if misalignment(sc.wstar(), &h.w) <= misalignment(sc.wstar(), &w0) {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn gradient_correlates_with_error_above_the_noise_floor() {
    // OPT = p·E[(w*·x)²] = p for the unit linear target.
    let p = 1e-3;
    let cfg = LearnerConfig { a: 1.0, b: 1.0, mu: Some(1.0), t_cap: 15, m_batch: 2048, ..Default::default() };
    let gate = 100.0 / cfg.mu().powi(2) * p;
    let (mut eligible, mut positive) = (0, 0);
    for seed in 0..10 {
        let sc = scenario(e1(8), Link::Linear { slope: 1.0 }, NoiseModel::ZeroOut { p }, 300 + seed);
        let w0 = rotate_towards_random(sc.wstar(), 1.4, seed, 9).unwrap();
        let cfg = LearnerConfig { seed, ..cfg.clone() };
        let (_, trace) = run_inner_loop(&w0, 1.0, &cfg, &sc, TaskId { restart: 0, grid: 1 }).unwrap();
        for r in trace.iter().filter(|r| r.misalignment.unwrap().powi(2) > gate) {
            eligible += 1;
            positive += usize::from(r.grad_dot_err.unwrap() > 0.0);
        }
    }
    assert!(eligible > 0);
    assert!(positive as f64 >= 0.8 * eligible as f64, "{positive}/{eligible}");
}

#[test]
fn some_scale_is_close_to_the_target_norm() {
    for (w, j) in [(2.0, 16), (1.0, 3), (5.0, 7)] {
        let cfg = LearnerConfig { w, j_cap: j, ..Default::default() };
        let grid = cfg.scale_grid();
        for target in [0.0, 0.3, w / 2.0, w] {
            let gap = grid.iter().map(|b| (b - target).abs()).fold(f64::INFINITY, f64::min);
            assert!(gap <= w / grid.len() as f64 + 1e-12, "W={w} J={j} target={target}");
        }
    }
}

#[test]
fn candidate_pool_contains_an_accurate_hypothesis() {
    let mut hits = 0;
    for seed in 0..20 {
        let mut wstar = vec![0.0; 5];
        wstar[seed as usize % 5] = 0.6;
        wstar[(seed as usize + 1) % 5] = -0.8;
        let sc = scenario(wstar, Link::LeakyRelu { slope: 0.5 }, NoiseModel::None, 400 + seed);
        let cfg =
            LearnerConfig { t0_cap: 5, t_cap: 30, j_cap: 8, m_batch: 1024, m_init: 1024, seed, ..Default::default() };
        let (set, _) = optimize(&cfg, &sc).unwrap();
        assert_eq!(set.len(), 1 + 6 * 8);
        let eval = sc.sample(50_000, u64::MAX).unwrap();
        let best = set.hypotheses().map(|h| l2_loss(h, &eval).unwrap()).fold(f64::INFINITY, f64::min);
        if best <= cfg.eps {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn trace_is_consistent_with_its_hypotheses() {
    let sc = scenario(e1(4), Link::Relu, NoiseModel::None, 7);
    let cfg = LearnerConfig { t0_cap: 2, t_cap: 4, j_cap: 3, m_batch: 256, m_init: 256, ..Default::default() };
    let (set, trace) = optimize(&cfg, &sc).unwrap();
    assert_eq!(trace.len(), 3 * 3 * 5);
    for c in set.candidates.iter().skip(1) {
        let task = c.task.unwrap();
        let last = trace.iter().find(|r| r.restart == task.restart && r.grid == task.grid && r.t == 4).unwrap();
        assert!((last.w_norm - c.beta).abs() < 1e-12);
        assert!((last.misalignment.unwrap() - misalignment(sc.wstar(), &c.hypothesis.w)).abs() < 1e-12);
        let err = sub(&c.hypothesis.w, sc.wstar());
        assert!(last.grad_dot_err.unwrap().abs() <= last.grad_norm * norm(&err) + 1e-12);
    }
}

#[test]
fn fresh_and_reused_batches_both_learn() {
    let sc = scenario(vec![0.0, 0.6, 0.8, 0.0], Link::LeakyRelu { slope: 0.5 }, NoiseModel::None, 500);
    let cfg = LearnerConfig { t0_cap: 3, t_cap: 30, j_cap: 8, m_batch: 1024, m_init: 1024, ..Default::default() };
    let eval = sc.sample(50_000, u64::MAX).unwrap();
    let fresh = learn(&cfg, &sc).unwrap();
    let reused = learn(&cfg, &Reuse::new(sc.sample(cfg.m_test, 1).unwrap())).unwrap();
    let (lf, lr) = (l2_loss(&fresh.hypothesis, &eval).unwrap(), l2_loss(&reused.hypothesis, &eval).unwrap());
    println!("fresh batches: {lf:.3e}, one reused batch: {lr:.3e}");
    assert!(lf <= cfg.eps && lr <= cfg.eps, "fresh {lf}, reused {lr}");
}
