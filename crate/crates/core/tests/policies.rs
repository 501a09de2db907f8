mod common;

use common::{random_instance, rng, uniform_matrix};
use ltv_core::json::{instance_from_str, instance_to_string, policy_from_str, policy_to_string};
use ltv_core::{nature_x, rollout_policy, simulate, sim::zero_input, PolicyKind, PolicyParam};
use proptest::prelude::*;
use rand::Rng;

fn random_policy(seed: u64, m: usize, d_u: usize, d_x: usize, scale: f64) -> PolicyParam {
    let mut r = rng(seed);
    PolicyParam::new((0..m).map(|_| uniform_matrix(&mut r, d_u, d_x, scale)).collect()).unwrap()
}

#[test]
fn zero_policy_rollout_is_natures_trajectory() {
    let inst = random_instance(4, 3, 2, 25, 0.8);
    let zero = PolicyParam::zeros(3, 2, 3);
    let nat = nature_x(&inst);
    for kind in [PolicyKind::Drc, PolicyKind::Dac, PolicyKind::Feedback] {
        let tr = rollout_policy(&inst, kind, &zero).unwrap();
        assert_eq!(tr.states, nat);
    }
    assert_eq!(simulate(&inst, zero_input(&inst)).unwrap().states, nat);
}

#[test]
fn feedback_rollout_diverges_with_structured_error() {
    let inst = random_instance(6, 1, 1, 400, 1.0);
    // |a + b·k| can exceed 1 by a wide margin with a large gain.
    let k = PolicyParam::scalar(&[50.0]).unwrap();
    let err = rollout_policy(&inst, PolicyKind::Feedback, &k).unwrap_err();
    assert!(err.is_numerical(), "{err:?}");
}

#[test]
fn policy_shape_is_checked() {
    let inst = random_instance(4, 3, 2, 5, 0.8);
    assert!(rollout_policy(&inst, PolicyKind::Drc, &PolicyParam::zeros(1, 3, 3)).is_err());
}

#[test]
fn json_round_trip_of_a_random_instance() {
    let inst = random_instance(12, 2, 3, 7, 0.5);
    let text = instance_to_string(&inst).unwrap();
    assert_eq!(instance_from_str(&text).unwrap(), inst);
    let p = random_policy(3, 2, 3, 2, 1.0);
    let (back, kind) = policy_from_str(&policy_to_string(&p, Some(PolicyKind::Drc)).unwrap()).unwrap();
    assert_eq!(back, p);
    assert_eq!(kind, Some(PolicyKind::Drc));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn convex_classes_roll_out_affinely(seed in 0u64..5000, alpha in 0.0f64..1.0, dac in any::<bool>()) {
        let kind = if dac { PolicyKind::Dac } else { PolicyKind::Drc };
        let inst = random_instance(seed, 2, 2, 30, 0.9);
        let m1 = random_policy(seed + 1, 3, 2, 2, 0.5);
        let m2 = random_policy(seed + 2, 3, 2, 2, 0.5);
        let mix = m1.scaled(alpha).add_scaled(&m2, 1.0 - alpha);
        let t1 = rollout_policy(&inst, kind, &m1).unwrap();
        let t2 = rollout_policy(&inst, kind, &m2).unwrap();
        let tm = rollout_policy(&inst, kind, &mix).unwrap();
        for k in 0..tm.states.len() {
            let expect = &t1.states[k] * alpha + &t2.states[k] * (1.0 - alpha);
            prop_assert!((&tm.states[k] - &expect).norm() <= 1e-10 * (1.0 + expect.norm()));
        }
        for k in 0..tm.inputs.len() {
            let expect = &t1.inputs[k] * alpha + &t2.inputs[k] * (1.0 - alpha);
            prop_assert!((&tm.inputs[k] - &expect).norm() <= 1e-10 * (1.0 + expect.norm()));
        }
    }

    #[test]
    fn convex_classes_have_convex_total_cost(seed in 0u64..5000, alpha in 0.0f64..1.0) {
        let inst = random_instance(seed, 2, 1, 30, 0.9);
        let m1 = random_policy(seed + 7, 2, 1, 2, 1.0);
        let m2 = random_policy(seed + 8, 2, 1, 2, 1.0);
        let mix = m1.scaled(alpha).add_scaled(&m2, 1.0 - alpha);
        for kind in [PolicyKind::Drc, PolicyKind::Dac] {
            let c1 = rollout_policy(&inst, kind, &m1).unwrap().total_cost();
            let c2 = rollout_policy(&inst, kind, &m2).unwrap().total_cost();
            let cm = rollout_policy(&inst, kind, &mix).unwrap().total_cost();
            prop_assert!(cm <= alpha * c1 + (1.0 - alpha) * c2 + 1e-9 * (1.0 + c1 + c2));
        }
    }

    #[test]
    fn clipping_is_idempotent_and_direction_preserving(seed in 0u64..5000, radius in 0.1f64..3.0) {
        let p = random_policy(seed, 3, 2, 2, 2.0);
        let c = p.clip_to_ball(radius).unwrap();
        prop_assert!(c.l1_op_norm() <= radius * (1.0 + 1e-12));
        prop_assert_eq!(c.clip_to_ball(radius).unwrap(), c.clone());
        if p.l1_op_norm() > radius {
            prop_assert!((c.l1_op_norm() - radius).abs() <= 1e-12 * radius);
            let ratio = c.block(0)[(0, 0)] / p.block(0)[(0, 0)];
            prop_assert!(ratio > 0.0 && ratio <= 1.0);
        }
    }

    #[test]
    fn policy_vector_round_trip(seed in 0u64..5000, m in 1usize..4, d_u in 1usize..4, d_x in 1usize..4) {
        let p = random_policy(seed, m, d_u, d_x, 1.0);
        let v = p.to_vector();
        prop_assert_eq!(PolicyParam::from_vector(&v, m, d_u, d_x).unwrap(), p);
    }
}

#[test]
fn clipping_random_policies_lands_on_the_sphere() {
    let mut r = rng(1);
    for _ in 0..50 {
        let scale = 1.0 + 5.0 * r.random::<f64>();
        let p = random_policy(r.random(), 2, 2, 3, scale);
        let radius = 0.5 * p.l1_op_norm();
        let c = p.clip_to_ball(radius).unwrap();
        assert!((c.l1_op_norm() - radius).abs() <= 1e-12 * radius);
    }
}
