use ltv_core::{markov_operators, rollout_policy, verify_assumptions, Interval, PenaltyShape, PolicyKind};
use ltv_instances::{gen_dsigma, gen_kswitch_lqr, gen_unstable_scalar, DsigmaParams};
use ltv_learn::{drc_ogd_run, DrcOgdConfig};

#[test]
fn dsigma_shape_and_assumptions() {
    let p = DsigmaParams::new(0.125, PenaltyShape::Abs, 300, 4);
    let d = gen_dsigma(p).unwrap();
    let inst = &d.instance;
    assert_eq!((inst.state_dim(), inst.input_dim(), inst.horizon()), (3, 3, 300));
    for t in 1..=300 {
        assert!(inst.a(t).iter().all(|v| *v == 0.0));
        let beta = inst.b(t)[(1, 1)];
        assert!((1.0 - p.sigma..=1.0 + p.sigma).contains(&beta));
        assert_eq!(inst.w(t)[0], -d.omegas[t - 1]);
        assert_eq!(inst.w(t)[1], -d.omegas[t]);
        assert_eq!(inst.w(t)[2], -1.0);
    }
    assert!(d.omegas.iter().all(|w| (w - 1.0).abs() == p.alpha * p.sigma || ((w - 1.0).abs() - p.alpha * p.sigma).abs() < 1e-15));
    let report = verify_assumptions(inst, 1.0, 0.0, 2.0, None);
    assert!(report.passed, "{report:?}");
    assert!(report.r_g <= 2.0 && report.r_nat <= 4.0);
}

#[test]
fn dsigma_gain_moments_and_variability() {
    let p = DsigmaParams::new(0.125, PenaltyShape::Abs, 20_000, 11);
    let d = gen_dsigma(p).unwrap();
    let n = d.betas.len() as f64;
    let m2: Vec<f64> = d.betas.iter().map(|b| b * b).collect();
    let mean = m2.iter().sum::<f64>() / n;
    let se = (m2.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - p.gain_second_moment()).abs() <= 4.0 * se, "{mean} vs {}", p.gain_second_moment());

    let ops = markov_operators(&d.instance, 1);
    let var = ltv_core::variability(&ops, &Interval::new(1, ops.len()).unwrap()).unwrap();
    assert!(var <= p.sigma * p.sigma, "{var}");
    assert!((var - p.sigma * p.sigma / 3.0).abs() < 0.1 * p.sigma * p.sigma);
}

#[test]
fn dsigma_comparator_stays_within_two_of_the_steady_state() {
    let (horizon, seeds) = (500, 400);
    let mut excess = 0.0;
    for seed in 0..seeds {
        let p = DsigmaParams::new(0.125, PenaltyShape::Abs, horizon, seed);
        let d = gen_dsigma(p).unwrap();
        let trace = rollout_policy(&d.instance, d.comparator_kind, &d.comparator).unwrap();
        // The first coordinate is cancelled from t = 3 on.
        for t in 3..=horizon {
            assert!(trace.state(t)[0].abs() < 1e-15);
        }
        excess += trace.total_cost() - (horizon as f64 - 1.0) * p.c_q_star();
    }
    let mean = excess / seeds as f64;
    assert!(mean <= 2.0, "{mean}");
}

#[test]
fn dsigma_floor_values() {
    let p = DsigmaParams::new(0.125, PenaltyShape::Abs, 10_002, 0);
    assert!((p.regret_floor() - (10_000.0 * (0.125 / 24.0) / 2.0 - 2.0)).abs() < 1e-9);
    let sq = DsigmaParams { f: PenaltyShape::Square, ..p };
    assert!(sq.regret_floor() < p.regret_floor());
}

#[test]
fn clairvoyant_policies_pay_exactly_one() {
    for (seed, rho) in [(0, 0.0), (1, 0.5), (2, 0.99), (3, 1.0)] {
        let s = gen_unstable_scalar(rho, 200, seed).unwrap();
        for (kind, params) in [(PolicyKind::Dac, &s.dac), (PolicyKind::Drc, &s.drc), (PolicyKind::Feedback, &s.feedback)] {
            let trace = rollout_policy(&s.instance, kind, params).unwrap();
            assert!((trace.total_cost() - 1.0).abs() < 1e-12, "ρ={rho} {kind:?}: {}", trace.total_cost());
            assert_eq!(trace.state(3)[0].abs(), 0.0);
        }
    }
    assert_eq!(gen_unstable_scalar(0.0, 10, 0).unwrap().floor(), 1.0);
}

#[test]
fn online_learner_pays_the_unstable_floor() {
    let (rho, horizon, seeds) = (0.99, 1000, 200);
    let mut mean = 0.0;
    for seed in 0..seeds {
        let s = gen_unstable_scalar(rho, horizon, seed).unwrap();
        let cfg = DrcOgdConfig { m: 2, h: 4, radius: 2.0, eta: 0.01, d_x: 1, d_u: 1 };
        mean += drc_ogd_run(&s.instance, cfg).unwrap().total_cost() / seeds as f64;
    }
    let target = 0.5 * (horizon as f64).min(1.0 / (1.0 - rho));
    assert!(mean >= target, "{mean} < {target}");
}

#[test]
fn kswitch_segments_and_assumptions() {
    let inst = gen_kswitch_lqr(3, 10, 2, 1, 5).unwrap();
    let segs: Vec<(usize, usize)> = inst.segments().iter().map(|s| (s.start, s.end)).collect();
    assert_eq!(segs, vec![(1, 3), (4, 6), (7, 10)]);
    for s in inst.segments() {
        for t in s.steps() {
            assert_eq!(inst.a(t), inst.a(s.start));
            assert_eq!(inst.b(t), inst.b(s.start));
        }
    }
    assert_ne!(inst.a(3), inst.a(4));

    let lti = gen_kswitch_lqr(1, 50, 3, 2, 9).unwrap();
    assert!((1..=50).all(|t| lti.a(t) == lti.a(1) && lti.b(t) == lti.b(1)));

    for seed in 0..20 {
        let inst = gen_kswitch_lqr(4, 400, 3, 2, seed).unwrap();
        let report = verify_assumptions(&inst, 1.0, 0.9, 1.0, Some(64));
        assert!(report.passed, "seed {seed}: {report:?}");
    }
}
