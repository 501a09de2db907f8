mod common;

use common::{rng, uniform_vector};
use ltv_core::rng::{stream, StreamId};
use ltv_core::{Interval, Vector};
use ltv_learn::estimation::{ada_pred_interval_bound, surrogate_grad, surrogate_loss, EstimationAudit, PredictionRun, RademacherBlocks};
use ltv_learn::{ada_pred_run, working_set, AdaPred, AdaPredConfig, BaseEstimator, CostlyOracle, NoisyOracle, Projection};
use proptest::prelude::*;
use rand::Rng;

fn ball_config(p: f64, dim: usize, r_z: f64, r_est: f64) -> AdaPredConfig {
    AdaPredConfig { p, r_z, r_est, projection: Projection::Ball { radius: r_z }, start: Vector::zeros(dim) }
}

#[test]
fn working_set_claims_hold_exhaustively() {
    let mut prev = working_set(1);
    for t in 1..=20_000usize {
        let s = working_set(t);
        let bound = 3 * ((usize::BITS - 1 - t.leading_zeros()) as usize + 1);
        assert!(s.len() <= bound, "t={t}");
        // Ascending a_1 < a_2 < ...: each gap at most halves the remaining span.
        let mut prior = 0;
        for &a in &s {
            assert!(2 * a <= prior + 1 + t, "t={t}: {a} after {prior}");
            prior = a;
        }
        if t > 1 {
            let added: Vec<usize> = s.iter().filter(|i| !prev.contains(i)).cloned().collect();
            let removed = prev.iter().filter(|i| !s.contains(i)).count();
            assert_eq!(added, vec![t], "t={t}");
            assert!(removed <= 1, "t={t}");
        }
        prev = s;
    }
}

#[test]
fn every_suffix_window_is_hit() {
    for t in 1..=3000usize {
        let s = working_set(t);
        for start in 1..=t {
            let end = (start + t) / 2;
            assert!(s.iter().any(|&i| i >= start && i <= end.max(start)), "t={t} s={start}");
        }
    }
}

#[test]
fn base_estimator_rate_on_a_constant_target() {
    let (p, horizon, seeds) = (0.5, 10_000usize, 100u64);
    let target = Vector::from_vec(vec![0.3, -0.4]);
    let amplitude = 0.3;
    let r_z = 1.0;
    let mut mse = 0.0;
    for seed in 0..seeds {
        let mut oracle = NoisyOracle::new(vec![target.clone(); horizon], amplitude, seed);
        let r_est = oracle.estimate_bound();
        assert!(r_est <= 0.5 + amplitude * 2f64.sqrt() + 1e-12);
        let mut coins = stream(seed, StreamId::Coins);
        let mut base = BaseEstimator::new(Vector::zeros(2), p, Projection::Ball { radius: r_z }).unwrap();
        for t in 1..=horizon {
            let b = coins.random::<f64>() < p;
            let z = if b { Some(oracle.query(t)) } else { None };
            base.step(b, z.as_ref()).unwrap();
        }
        mse += (base.iterate() - &target).norm_squared() / seeds as f64;
    }
    let rate = (r_z + 0.5 + amplitude * 2f64.sqrt()).powi(2) * (1.0 + (horizon as f64).ln()) / (p * horizon as f64);
    assert!(mse <= 10.0 * rate, "mse {mse} vs rate {rate}");
}

#[test]
fn pool_matches_working_set_and_weights_normalize() {
    let horizon = 2000;
    let mut r = rng(5);
    let targets: Vec<Vector> = (0..horizon).map(|_| uniform_vector(&mut r, 2, 0.5)).collect();
    let mut oracle = NoisyOracle::new(targets, 0.2, 5);
    let mut pool = AdaPred::new(ball_config(0.3, 2, 1.0, 1.0)).unwrap();
    let mut coins = stream(9, StreamId::Coins);
    for t in 1..=horizon {
        assert_eq!(pool.t(), t);
        assert_eq!(pool.births(), working_set(t));
        let total: f64 = pool.weights().iter().map(|w| w.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(pool.weights().iter().all(|w| w.1 > 0.0));
        let b = coins.random::<f64>() < 0.3;
        let z = if b { Some(oracle.query(t)) } else { None };
        let played = pool.step(b, z.as_ref()).unwrap();
        assert!(played.norm() <= 1.0 + 1e-12);
    }
}

#[test]
fn single_step_plays_the_initial_point() {
    let mut cfg = ball_config(0.5, 1, 1.0, 1.0);
    cfg.start = Vector::from_element(1, 0.4);
    let mut oracle = NoisyOracle::exact(vec![Vector::from_element(1, -1.0)]);
    let run = ada_pred_run(&mut oracle, cfg, 1, 3).unwrap();
    assert_eq!(run.predictions, vec![Vector::from_element(1, 0.4)]);
}

#[test]
fn surrogate_gradient_is_unbiased_with_bounded_second_moment() {
    let (p, samples) = (0.3, 200_000usize);
    let z_hat = Vector::from_vec(vec![0.5, -0.2]);
    let target = Vector::from_vec(vec![-0.1, 0.3]);
    let mut oracle = NoisyOracle::new(vec![target.clone()], 0.4, 1);
    let r_total = 0.5f64.hypot(0.2) + oracle.estimate_bound();
    let mut coins = stream(1, StreamId::Coins);
    let mut mean = Vector::zeros(2);
    let mut sq = Vector::zeros(2);
    let mut second = 0.0;
    for _ in 0..samples {
        let g = if coins.random::<f64>() < p { surrogate_grad(&z_hat, &oracle.query(1), p) } else { Vector::zeros(2) };
        second += g.norm_squared();
        sq += g.component_mul(&g);
        mean += g;
    }
    let n = samples as f64;
    mean /= n;
    let expect = &z_hat - &target;
    for k in 0..2 {
        let var = sq[k] / n - mean[k] * mean[k];
        let se = (var / n).sqrt();
        assert!((mean[k] - expect[k]).abs() <= 3.0 * se, "coordinate {k}: {} vs {}", mean[k], expect[k]);
    }
    assert!(second / n <= r_total * r_total / p);
}

#[test]
fn surrogate_loss_mean_is_half_the_squared_error_plus_noise() {
    let (p, samples) = (1.0, 200_000usize);
    let z = Vector::from_vec(vec![0.2]);
    let target = Vector::from_vec(vec![0.7]);
    let amplitude = 0.5;
    let mut oracle = NoisyOracle::new(vec![target.clone()], amplitude, 2);
    let vals: Vec<f64> = (0..samples).map(|_| surrogate_loss(&z, &oracle.query(1), p)).collect();
    let n = samples as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n / n).sqrt();
    let expect = 0.5 * (&z - &target).norm_squared() + 0.5 * amplitude * amplitude / 3.0;
    assert!((mean - expect).abs() <= 3.0 * se, "{mean} vs {expect}");
}

#[test]
fn query_counts_concentrate() {
    let (p, horizon) = (0.2, 5000usize);
    let mut inside = 0;
    for seed in 0..200 {
        let mut oracle = NoisyOracle::exact(vec![Vector::zeros(1); horizon]);
        let run = ada_pred_run(&mut oracle, ball_config(p, 1, 1.0, 1.0), horizon, seed).unwrap();
        let dev = (run.query_count() as f64 - p * horizon as f64).abs();
        if dev <= 4.0 * (p * horizon as f64 * (1.0 - p)).sqrt() {
            inside += 1;
        }
    }
    assert!(inside >= 198, "{inside}/200");
}

#[test]
fn tracking_error_after_a_switch_shrinks_with_horizon() {
    let avg_error = |horizon: usize| {
        let mut err = 0.0;
        for seed in 0..20 {
            let targets: Vec<Vector> = (0..horizon).map(|t| Vector::from_element(1, if t < horizon / 2 { 0.6 } else { -0.5 })).collect();
            let mut oracle = NoisyOracle::new(targets.clone(), 0.3, seed);
            let run = ada_pred_run(&mut oracle, ball_config(0.3, 1, 1.0, 0.9), horizon, seed).unwrap();
            err += run.predictions.iter().zip(&targets).map(|(a, b)| (a - b).norm_squared()).sum::<f64>() / horizon as f64;
        }
        err / 20.0
    };
    let small = avg_error(1000);
    let large = avg_error(16_000);
    assert!(large < 0.5 * small, "{large} vs {small}");
}

#[test]
fn audit_matches_direct_sums() {
    let mut r = rng(4);
    let horizon = 64;
    let targets: Vec<Vector> = (0..horizon).map(|_| uniform_vector(&mut r, 2, 1.0)).collect();
    let run = PredictionRun { predictions: (0..horizon).map(|_| uniform_vector(&mut r, 2, 1.0)).collect(), queries: (0..horizon).map(|_| r.random()).collect() };
    let audit = EstimationAudit::new(&run, &targets, 0.7).unwrap();
    for (a, b) in [(1, 64), (5, 5), (10, 33)] {
        let i = Interval::new(a, b).unwrap();
        let learner: f64 = i.steps().map(|t| (&run.predictions[t - 1] - &targets[t - 1]).norm_squared()).sum();
        let best = i.len() as f64 * ltv_core::vector_variability(&targets, &i).unwrap();
        let queries = i.steps().filter(|t| run.queries[t - 1]).count() as f64;
        assert!((audit.regret(&i).unwrap() - (learner - best + 0.7 * queries)).abs() < 1e-10);
    }
    assert!(ada_pred_interval_bound(1.0, 1.0, 0.5, 0.0, &Interval::new(1, 1).unwrap()) == 16.0);
}

#[test]
fn rademacher_block_audit() {
    let inst = RademacherBlocks::generate(1.0, 400, 8).unwrap();
    assert_eq!(inst.blocks.len(), 20);
    let run = PredictionRun { predictions: vec![Vector::zeros(1); 400], queries: vec![false; 400] };
    for b in inst.audit(&run) {
        assert_eq!(b.queries, 0);
        assert_eq!(b.loss, 20.0);
        assert_eq!(b.sign_averaged_loss, 20.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unqueried_pool_is_a_fixed_convex_combination(seed in 0u64..1000, x in -1.0f64..1.0, steps in 1usize..300) {
        let mut cfg = ball_config(0.5, 1, 1.0, 1.0);
        cfg.start = Vector::from_element(1, x);
        let mut pool = AdaPred::new(cfg).unwrap();
        let _ = seed;
        for _ in 0..steps {
            let z = pool.step(false, None).unwrap();
            prop_assert!((z[0] - x).abs() <= 1e-14);
        }
    }

    #[test]
    fn iterates_stay_in_the_operator_set(seed in 0u64..1000) {
        let projection = Projection::Operator { radius: 1.5, h: 2, d_x: 2, d_u: 1 };
        let cfg = AdaPredConfig { p: 0.5, r_z: 1.5, r_est: 6.0, projection, start: Vector::zeros(4) };
        let mut pool = AdaPred::new(cfg).unwrap();
        let mut r = rng(seed);
        for _ in 0..100 {
            let z = uniform_vector(&mut r, 4, 3.0);
            let b = r.random::<bool>();
            let played = pool.step(b, if b { Some(&z) } else { None }).unwrap();
            let g = ltv_core::MarkovOperator::from_vector(&played, 2, 2, 1).unwrap();
            prop_assert!(g.l1_op_norm() <= 1.5 * (1.0 + 1e-9));
        }
    }
}

#[test]
fn working_set_audit_agrees_with_the_exhaustive_scan() {
    let largest = ltv_learn::working_set_audit(20_000).unwrap();
    assert_eq!(largest, (1..=20_000).map(|t| working_set(t).len()).max().unwrap());
}
