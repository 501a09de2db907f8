mod common;

use std::sync::Arc;

use common::rng;
use ltv_core::{rollout_policy, CostFn, CustomCost, LtvInstance, Matrix, PolicyKind, PolicyParam, QuadraticCost, Vector};
use ltv_learn::bandit::{closed_loop_audit, exp3_default_eta, exp3_probabilities};
use ltv_learn::{epsilon_cover, exp3_control_run, CoverSpec, Exp3Config, GainRegion};
use rand::Rng;

/// `scale·|u|`.
#[derive(Debug)]
struct InputMagnitude(f64);

impl CustomCost for InputMagnitude {
    fn value(&self, _x: &Vector, u: &Vector) -> f64 {
        self.0 * u.norm()
    }
    fn subgradient(&self, x: &Vector, u: &Vector) -> (Vector, Vector) {
        let n = u.norm();
        (Vector::zeros(x.len()), if n > 0.0 { u * (self.0 / n) } else { Vector::zeros(u.len()) })
    }
}

fn scalar(a: f64, b: f64, w: f64, horizon: usize, cost: CostFn) -> LtvInstance {
    LtvInstance::new(
        vec![Matrix::from_element(1, 1, a); horizon],
        vec![Matrix::from_element(1, 1, b); horizon],
        vec![Vector::from_element(1, w); horizon],
        vec![cost; horizon],
    )
    .unwrap()
}

#[test]
fn single_arm_reproduces_the_fixed_rollout() {
    let inst = scalar(0.5, 1.0, 1.0, 97, CostFn::quadratic(QuadraticCost::identity(1, 1)));
    let k = Matrix::from_element(1, 1, -0.3);
    let run = exp3_control_run(&inst, std::slice::from_ref(&k), Exp3Config { window: 4, eta: 0.1, seed: 1 }).unwrap();
    let fixed = rollout_policy(&inst, PolicyKind::Feedback, &PolicyParam::new(vec![k]).unwrap()).unwrap();
    assert_eq!(run.trace, fixed);
    assert_eq!(run.windows.len(), 25);
}

#[test]
fn arm_is_held_within_windows() {
    let inst = scalar(0.2, 1.0, 1.0, 64, CostFn::quadratic(QuadraticCost::identity(1, 1)));
    let arms = epsilon_cover(&CoverSpec::new(1, 1, 0.5, 0.25)).unwrap();
    let run = exp3_control_run(&inst, &arms, Exp3Config { window: 8, eta: 0.5, seed: 3 }).unwrap();
    for (n, w) in run.windows.iter().enumerate() {
        for t in n * 8 + 1..=n * 8 + 8 {
            let u = run.trace.input(t)[0];
            let x = run.trace.state(t)[0];
            assert_eq!(u, arms[w.arm][(0, 0)] * x);
        }
    }
}

#[test]
fn cover_points_are_within_epsilon() {
    let mut r = rng(1);
    for region in [GainRegion::Box, GainRegion::Ball] {
        let spec = CoverSpec { region, ..CoverSpec::new(1, 2, 1.0, 0.3) };
        let cover = epsilon_cover(&spec).unwrap();
        assert!(cover.len() as f64 <= spec.size_bound().unwrap());
        assert!(cover.iter().all(|k| spec.contains(k)));
        let mut checked = 0;
        while checked < 10_000 {
            let k = Matrix::from_fn(1, 2, |_, _| r.random_range(-1.0..=1.0));
            if !spec.contains(&k) {
                continue;
            }
            checked += 1;
            let nearest = cover.iter().map(|c| (c - &k).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 0.3 + 1e-12, "{region:?}: {nearest}");
        }
    }
}

#[test]
fn low_loss_arm_dominates_late_windows() {
    // B = 0 and w = 1: x_t = 1 from t = 2, so arm K pays `scale·|K|` per step.
    let window = 4;
    let scale = 1.0 / (window as f64 * 0.5);
    let inst = scalar(0.0, 0.0, 1.0, 2000, CostFn::Custom(Arc::new(InputMagnitude(scale))));
    let arms = [Matrix::zeros(1, 1), Matrix::from_element(1, 1, 0.5)];
    let windows = 500;
    let eta = exp3_default_eta(2, windows, 1.0);
    let mut late_good = 0usize;
    let mut late_total = 0usize;
    for seed in 0..1000 {
        let run = exp3_control_run(&inst, &arms, Exp3Config { window, eta, seed }).unwrap();
        for w in &run.windows[windows * 9 / 10..] {
            late_total += 1;
            late_good += (w.arm == 0) as usize;
        }
        assert!(run.final_probabilities[0] > 0.5);
    }
    assert!(late_good as f64 >= 0.9 * late_total as f64, "{late_good}/{late_total}");
}

#[test]
fn importance_weighted_increment_is_unbiased() {
    let inst = scalar(0.0, 0.0, 1.0, 3, CostFn::Custom(Arc::new(InputMagnitude(1.0))));
    let arms = [Matrix::from_element(1, 1, 0.2), Matrix::from_element(1, 1, 0.6), Matrix::from_element(1, 1, 1.0)];
    // One window of length 3: x = (0, 1, 1), so arm K loses 2|K|.
    let samples = 100_000;
    let mut sums = [0.0; 3];
    let mut sq = [0.0; 3];
    for seed in 0..samples {
        let run = exp3_control_run(&inst, &arms, Exp3Config { window: 3, eta: 1.0, seed }).unwrap();
        for k in 0..3 {
            sums[k] += run.cumulative_losses[k];
            sq[k] += run.cumulative_losses[k].powi(2);
        }
    }
    let n = samples as f64;
    for k in 0..3 {
        let mean = sums[k] / n;
        let se = ((sq[k] / n - mean * mean) / n).sqrt();
        let expect = 2.0 * arms[k][(0, 0)];
        assert!((mean - expect).abs() <= 3.0 * se, "arm {k}: {mean} vs {expect}");
    }
    let p = exp3_probabilities(&[0.0, 0.0, 0.0], 1.0);
    assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn stability_audit_flags_unstable_arms() {
    let inst = scalar(0.5, 1.0, 1.0, 30, CostFn::quadratic(QuadraticCost::identity(1, 1)));
    let arms = [Matrix::from_element(1, 1, 0.0), Matrix::from_element(1, 1, 0.7)];
    let v = closed_loop_audit(&inst, &arms, 1.0, 0.6, 10);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].arm, 1);
    assert_eq!(v[0].len, 1);
}
