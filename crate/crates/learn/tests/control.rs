mod common;

use common::{random_instance, rng, uniform_vector};
use ltv_core::{markov_operator_padded, nature_x, psi, verify_assumptions, CostFn, LtvInstance, MarkovOperator, Matrix, QuadraticCost, Vector};
use ltv_learn::control::{estimator_bound, exploration_estimate, extract_nat};
use ltv_learn::{ada_ctrl_run, AdaCtrlConfig, DrcOgd, DrcOgdConfig, EstimatorMode};
use proptest::prelude::*;
use std::collections::VecDeque;

fn scalar_lti(a: f64, b: f64, horizon: usize, seed: u64) -> LtvInstance {
    let mut r = rng(seed);
    LtvInstance::new(
        vec![Matrix::from_element(1, 1, a); horizon],
        vec![Matrix::from_element(1, 1, b); horizon],
        (0..horizon).map(|_| uniform_vector(&mut r, 1, 0.5)).collect(),
        vec![CostFn::quadratic(QuadraticCost::identity(1, 1)); horizon],
    )
    .unwrap()
}

fn config(p: f64, h: usize, estimator: EstimatorMode, seed: u64) -> AdaCtrlConfig {
    AdaCtrlConfig { p, h, m: 2, r_m: 1.0, r_g: 2.0, r_nat: 2.0, lipschitz: 1.0, eta: Some(0.01), estimator, seed }
}

#[test]
fn no_exploration_equals_drc_ogd_on_the_frozen_estimate() {
    let inst = random_instance(2, 2, 1, 101, 0.7);
    let run = ada_ctrl_run(&inst, &config(0.0, 3, EstimatorMode::AdaPred, 4)).unwrap();
    assert_eq!(run.explored_epochs(), 0);
    assert!(run.epochs.iter().all(|e| e.g_hat == MarkovOperator::zeros(3, 2, 1)));

    // With a zero estimate the extracted Nature's state is the observed state.
    let mut ctl = DrcOgd::new(DrcOgdConfig { m: 2, h: 3, radius: 1.0, eta: 0.01, d_x: 2, d_u: 1 }).unwrap();
    let zero = MarkovOperator::zeros(3, 2, 1);
    for t in 1..=inst.horizon() {
        let nat = ltv_core::linalg::clip_norm(run.trace.state(t), 2.0);
        ctl.observe_nat(nat).unwrap();
        assert_eq!(&ctl.action().unwrap(), run.trace.input(t), "t={t}");
        ctl.update(inst.cost(t), &zero).unwrap();
    }
    let fixed = ada_ctrl_run(&inst, &config(0.0, 3, EstimatorMode::Fixed(zero), 4)).unwrap();
    assert_eq!(fixed.trace, run.trace);
}

#[test]
fn exploration_plays_signs_and_partial_epoch_exploits() {
    let inst = random_instance(5, 2, 3, 103, 0.6);
    let run = ada_ctrl_run(&inst, &config(0.5, 4, EstimatorMode::AdaPred, 1)).unwrap();
    assert!(run.explored_epochs() > 0);
    let last = run.epochs.last().unwrap();
    assert_eq!(last.len, 3);
    assert!(!last.explored);
    for e in &run.epochs {
        for t in e.start..e.start + e.len {
            if e.explored {
                assert!(run.trace.input(t).iter().all(|v| v.abs() == 1.0));
            }
            assert_eq!(run.diagnostics[t - 1].explored, e.explored);
        }
        assert_eq!(e.g_tilde.is_some(), e.explored);
        assert!(e.g_hat.l1_op_norm() <= 2.0 * (1.0 + 1e-9));
    }
    assert_eq!(run.trace.replay_check(&inst), Ok(()));
    assert_eq!(run.trace.explore_flags.as_ref().unwrap().len(), run.epochs.len());
}

#[test]
fn oracle_estimate_recovers_nature_exactly_without_a_tail() {
    // A_t = 0: one block captures the whole response.
    let mut r = rng(8);
    let horizon = 60;
    let inst = LtvInstance::new(
        vec![Matrix::zeros(2, 2); horizon],
        (0..horizon).map(|_| common::uniform_matrix(&mut r, 2, 1, 1.0)).collect(),
        (0..horizon).map(|_| uniform_vector(&mut r, 2, 0.5)).collect(),
        vec![CostFn::quadratic(QuadraticCost::identity(2, 1)); horizon],
    )
    .unwrap();
    let run = ada_ctrl_run(&inst, &config(0.3, 1, EstimatorMode::Oracle, 2)).unwrap();
    for d in &run.diagnostics {
        assert!(d.operator_error < 1e-15);
        assert!(d.nat_error < 1e-12, "t={} err={}", d.t, d.nat_error);
    }
}

#[test]
fn nature_estimate_error_respects_the_operator_error_bound() {
    for seed in 0..10 {
        let inst = random_instance(seed, 2, 2, 200, 0.5);
        let report = verify_assumptions(&inst, 1.0, 0.5, 2f64.sqrt(), None);
        let h = 4;
        let mut r = rng(seed + 50);
        let truth = markov_operator_padded(&inst, 100, h).unwrap();
        let perturbed = truth.add_scaled(&MarkovOperator::new((0..h).map(|_| common::uniform_matrix(&mut r, 2, 2, 0.05)).collect()).unwrap(), 1.0);
        let cfg = AdaCtrlConfig { p: 0.0, h, m: 2, r_m: 0.8, r_g: report.r_g, r_nat: report.r_nat, lipschitz: 1.0, eta: Some(0.02), estimator: EstimatorMode::Fixed(perturbed.clone()), seed };
        let run = ada_ctrl_run(&inst, &cfg).unwrap();
        let nat = nature_x(&inst);
        let u_max = run.trace.inputs.iter().map(|u| u.norm()).fold(0.0, f64::max);
        let tail = psi(h, report.r_g, 0.5).unwrap();
        for t in 2..=inst.horizon() {
            let g_prev = markov_operator_padded(&inst, t - 1, h).unwrap();
            let err = (&run.trace.nat_estimates.as_ref().unwrap()[t - 1] - &nat[t - 1]).norm();
            let bound = u_max * (perturbed.add_scaled(&g_prev, -1.0).l1_op_norm() + tail);
            assert!(err <= bound + 1e-12, "seed {seed} t {t}: {err} > {bound}");
            assert!(u_max <= cfg.r_nat * cfg.r_m + 1e-12);
        }
    }
}

#[test]
fn exploration_estimate_is_unbiased_and_bounded() {
    let (a, b, h) = (0.5, 0.8, 3);
    let epochs = 4000;
    let horizon = epochs * h;
    let inst = scalar_lti(a, b, horizon, 3);
    let cfg = AdaCtrlConfig { p: 1.0, h, m: 1, r_m: 0.5, r_g: 2.0, r_nat: 1.0, lipschitz: 1.0, eta: Some(0.01), estimator: EstimatorMode::Fixed(MarkovOperator::zeros(h, 1, 1)), seed: 7 };
    let run = ada_ctrl_run(&inst, &cfg).unwrap();
    let bound = estimator_bound(h, 1, cfg.r_nat, cfg.r_g, cfg.r_m);
    let ests: Vec<&MarkovOperator> = run.epochs.iter().filter_map(|e| e.g_tilde.as_ref()).collect();
    assert_eq!(ests.len(), epochs);
    for i in 0..h {
        let vals: Vec<f64> = ests.iter().map(|g| g.block(i)[(0, 0)]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let expect = a.powi(i as i32) * b;
        assert!((mean - expect).abs() <= 4.0 * se, "block {i}: {mean} vs {expect} (se {se})");
    }
    for g in &ests {
        assert!(g.frobenius_sq().sqrt() <= bound);
    }
}

#[test]
fn single_step_estimate_is_exact_without_noise() {
    let recent: VecDeque<Vector> = [Vector::from_element(1, 1.0)].into_iter().collect();
    let g = exploration_estimate(&Vector::from_element(1, 1.7), &recent, 1);
    assert_eq!(g.block(0)[(0, 0)], 1.7);
    let out = extract_nat(&Vector::from_element(1, 3.0), &g, &recent, 10.0);
    assert!((out[0] - 1.3).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn operator_estimate_is_constant_within_each_epoch(seed in 0u64..1000, h in 1usize..5, p in 0.0f64..1.0) {
        let inst = random_instance(seed, 2, 1, 60, 0.7);
        let run = ada_ctrl_run(&inst, &config(p, h, EstimatorMode::AdaPred, seed)).unwrap();
        let truth = ltv_core::markov_operators(&inst, h);
        for e in &run.epochs {
            for t in e.start..e.start + e.len {
                let expect = e.g_hat.add_scaled(&truth[t - 1], -1.0).l1_op_norm();
                prop_assert!((run.diagnostics[t - 1].operator_error - expect).abs() <= 1e-12);
            }
        }
        prop_assert_eq!(run.trace.horizon(), 60);
    }
}
