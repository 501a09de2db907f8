use ltv_core::{rollout_policy, PolicyKind, PolicyParam};
use ltv_instances::separation::{z1_constant_pair_cost, z3_reference};
use ltv_instances::{gen_separation, SeparationKind};

const HORIZON: usize = 2000;

#[test]
fn witnesses_are_exact_at_scale() {
    for which in [SeparationKind::Z1, SeparationKind::Z2, SeparationKind::Z3] {
        let s = gen_separation(which, HORIZON).unwrap();
        let trace = rollout_policy(&s.instance, s.witness_kind, &s.witness).unwrap();
        assert!(trace.total_cost().abs() <= 1e-9, "{which:?}: {}", trace.total_cost());
        assert!(!s.excluded.iter().any(|c| c.kind == s.witness_kind));
    }
}

#[test]
fn z2_state_is_pinned_at_one() {
    let s = gen_separation(SeparationKind::Z2, 50).unwrap();
    let trace = rollout_policy(&s.instance, PolicyKind::Dac, &s.witness).unwrap();
    for t in 2..=51 {
        assert_eq!(trace.state(t)[0], 1.0, "t={t}");
    }
}

#[test]
fn z1_constant_inputs_match_the_pair_formula() {
    let s = gen_separation(SeparationKind::Z1, 101).unwrap();
    for u in [-1.0, 0.0, 4.0 / 17.0, 0.5] {
        // DAC with gain u plays the constant u from t = 1.
        let total = s.scalar_cost(PolicyKind::Dac, u);
        let first = (u - 0.0f64).powi(2) / 8.0;
        let expect = first + 50.0 * z1_constant_pair_cost(u);
        assert!((total - expect).abs() < 1e-12, "{u}: {total} vs {expect}");
    }
}

#[test]
fn excluded_classes_pay_linearly() {
    // Per-step floors from the closed forms: Z1 1/2176, Z2 1/64, Z3 at least 2^{-12}/3.
    let floors = [(SeparationKind::Z1, 1.0 / 2176.0), (SeparationKind::Z2, 1.0 / 64.0), (SeparationKind::Z3, 2f64.powi(-12) / 3.0)];
    for (which, floor) in floors {
        let s = gen_separation(which, HORIZON).unwrap();
        for m in s.excluded_grid_minima(-2.0, 2.0, 1e-2).unwrap() {
            assert!(m.cost >= 0.95 * floor * HORIZON as f64, "{which:?} {:?}: {} at gain {}", m.kind, m.cost, m.gain);
        }
    }
}

#[test]
fn z3_reference_matches_the_witness_rollout() {
    let s = gen_separation(SeparationKind::Z3, 60).unwrap();
    let trace = rollout_policy(&s.instance, PolicyKind::Drc, &PolicyParam::scalar(&[1.0]).unwrap()).unwrap();
    let (u, x) = z3_reference(60);
    for t in 1..=60 {
        assert_eq!(trace.input(t)[0], u[t - 1]);
        assert_eq!(trace.state(t)[0], x[t - 1]);
    }
}
