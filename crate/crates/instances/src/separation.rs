//! Three scalar sequences on which each of the DRC, DAC and feedback classes
//! contains a zero-cost policy that the other classes cannot approximate.

use ltv_core::{CostFn, LtvInstance, Matrix, PolicyKind, PolicyParam, SeparationCost, Vector};

use crate::error::{InstanceError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparationKind {
    /// Feedback wins: alternating input gain, cost `(u - x/4)²/8`.
    Z1,
    /// DAC wins: no control authority, cost `(u - w_{t-1})²`.
    Z2,
    /// DRC wins: period-3 dynamics tracked along the witness trajectory.
    Z3,
}

impl std::str::FromStr for SeparationKind {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z1" => Ok(SeparationKind::Z1),
            "z2" => Ok(SeparationKind::Z2),
            "z3" => Ok(SeparationKind::Z3),
            other => Err(InstanceError::InvalidParameter(format!("unknown separation sequence {other:?} (expected z1, z2 or z3)"))),
        }
    }
}

/// One scalar parameter family of a losing class, searched by grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExcludedClass {
    pub kind: PolicyKind,
}

#[derive(Clone, Debug)]
pub struct SeparationInstance {
    pub which: SeparationKind,
    pub instance: LtvInstance,
    pub witness_kind: PolicyKind,
    pub witness: PolicyParam,
    /// Classes with no low-cost member on this sequence.
    pub excluded: Vec<ExcludedClass>,
}

/// Best point of a one-parameter grid over an excluded class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMinimum {
    pub kind: PolicyKind,
    pub gain: f64,
    pub cost: f64,
    pub evaluated: usize,
}

fn scalar(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

fn z3_a(t: usize) -> f64 {
    if t % 3 == 0 {
        0.0
    } else {
        0.25
    }
}

fn z3_b(t: usize) -> f64 {
    match t % 3 {
        1 => -0.25,
        2 => -0.2,
        _ => 0.0,
    }
}

/// Trajectory `(u*_t, x*_t)` of the Z3 witness `u_t = x^nat_t` from `x_1 = 0`.
/// From `t = 4` on, `x*_t = 1` and `u*_t` cycles through `1, 5/4, 21/16`
/// starting at `t = 3k+1`; the start-up values are `u* = (0, 1, 5/4)` and
/// `x* = (0, 1, 21/20)`.
pub fn z3_reference(horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut x, mut nat) = (0.0, 0.0);
    let mut u_ref = Vec::with_capacity(horizon);
    let mut x_ref = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        u_ref.push(nat);
        x_ref.push(x);
        x = z3_a(t) * x + z3_b(t) * nat + 1.0;
        nat = z3_a(t) * nat + 1.0;
    }
    (u_ref, x_ref)
}

pub fn gen_separation(which: SeparationKind, horizon: usize) -> Result<SeparationInstance> {
    if horizon == 0 {
        return Err(InstanceError::InvalidParameter("horizon must be positive".into()));
    }
    let steps = 1..=horizon;
    let (a, b, w, costs): (Vec<f64>, Vec<f64>, Vec<f64>, Vec<CostFn>) = match which {
        SeparationKind::Z1 => (
            vec![0.0; horizon],
            steps.clone().map(|t| if t % 2 == 1 { 1.0 } else { -1.0 }).collect(),
            vec![1.0; horizon],
            vec![CostFn::Separation(SeparationCost::FeedbackQuarter); horizon],
        ),
        SeparationKind::Z2 => {
            let w: Vec<f64> = steps.clone().map(|t| if t == 1 { 1.0 } else if t % 2 == 0 { 0.5 } else { 0.75 }).collect();
            let costs = steps
                .clone()
                .map(|t| CostFn::Separation(SeparationCost::InputTracking { target: if t == 1 { 0.0 } else { w[t - 2] } }))
                .collect();
            (steps.clone().map(|t| if t % 2 == 0 { 0.5 } else { 0.25 }).collect(), vec![0.0; horizon], w, costs)
        }
        SeparationKind::Z3 => {
            let (u_ref, x_ref) = z3_reference(horizon);
            (
                steps.clone().map(z3_a).collect(),
                steps.clone().map(z3_b).collect(),
                vec![1.0; horizon],
                u_ref.into_iter().zip(x_ref).map(|(u_ref, x_ref)| CostFn::Separation(SeparationCost::TrajectoryTracking { u_ref, x_ref })).collect(),
            )
        }
    };
    let instance = LtvInstance::new(
        a.into_iter().map(scalar).collect(),
        b.into_iter().map(scalar).collect(),
        w.into_iter().map(|v| Vector::from_element(1, v)).collect(),
        costs,
    )?;
    let (witness_kind, witness, losers) = match which {
        SeparationKind::Z1 => (PolicyKind::Feedback, PolicyParam::scalar(&[0.25])?, [PolicyKind::Drc, PolicyKind::Dac]),
        SeparationKind::Z2 => (PolicyKind::Dac, PolicyParam::scalar(&[0.0, 1.0])?, [PolicyKind::Drc, PolicyKind::Feedback]),
        SeparationKind::Z3 => (PolicyKind::Drc, PolicyParam::scalar(&[1.0])?, [PolicyKind::Dac, PolicyKind::Feedback]),
    };
    Ok(SeparationInstance { which, instance, witness_kind, witness, excluded: losers.into_iter().map(|kind| ExcludedClass { kind }).collect() })
}

impl SeparationInstance {
    /// Total cost of the memory-one policy of class `kind` with scalar gain `g`,
    /// computed in scalar arithmetic. Diverging rollouts report `+∞`.
    pub fn scalar_cost(&self, kind: PolicyKind, gain: f64) -> f64 {
        let inst = &self.instance;
        let mut x = inst.initial_state()[0];
        let mut nat = x;
        let mut total = 0.0;
        for t in 1..=inst.horizon() {
            let (a, b, w) = (inst.a(t)[(0, 0)], inst.b(t)[(0, 0)], inst.w(t)[0]);
            let u = match kind {
                PolicyKind::Drc => gain * nat,
                PolicyKind::Dac => gain * w,
                PolicyKind::Feedback => gain * x,
            };
            total += match inst.cost(t) {
                CostFn::Separation(c) => c.value(x, u),
                other => other.value(&Vector::from_element(1, x), &Vector::from_element(1, u)),
            };
            x = a * x + b * u + w;
            nat = a * nat + w;
            if !x.is_finite() || x.abs() > 1e12 {
                return f64::INFINITY;
            }
        }
        total
    }

    /// Exhaustive search over gains `lo, lo + pitch, …, hi` for each excluded class.
    pub fn excluded_grid_minima(&self, lo: f64, hi: f64, pitch: f64) -> Result<Vec<GridMinimum>> {
        if !(pitch > 0.0) || !(hi >= lo) {
            return Err(InstanceError::InvalidParameter(format!("grid [{lo}, {hi}] with pitch {pitch}")));
        }
        let points = ((hi - lo) / pitch + 1e-9).floor() as usize + 1;
        Ok(self
            .excluded
            .iter()
            .map(|class| {
                let mut best = GridMinimum { kind: class.kind, gain: lo, cost: f64::INFINITY, evaluated: points };
                for k in 0..points {
                    let g = lo + k as f64 * pitch;
                    let c = self.scalar_cost(class.kind, g);
                    if c < best.cost {
                        best.gain = g;
                        best.cost = c;
                    }
                }
                best
            })
            .collect())
    }
}

/// Two-step cost of the constant input `ū` on Z1 once `x^nat` has settled:
/// `((3ū-1)² + (5ū-1)²)/128`, minimized at `ū = 4/17` with value `1/1088`.
pub fn z1_constant_pair_cost(u_bar: f64) -> f64 {
    ((3.0 * u_bar - 1.0).powi(2) + (5.0 * u_bar - 1.0).powi(2)) / 128.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltv_core::rollout_policy;

    #[test]
    fn witnesses_cost_nothing() {
        for which in [SeparationKind::Z1, SeparationKind::Z2, SeparationKind::Z3] {
            let s = gen_separation(which, 300).unwrap();
            let trace = rollout_policy(&s.instance, s.witness_kind, &s.witness).unwrap();
            assert!(trace.total_cost().abs() <= 1e-12, "{which:?}: {}", trace.total_cost());
        }
    }

    #[test]
    fn scalar_cost_agrees_with_the_generic_rollout() {
        for which in [SeparationKind::Z1, SeparationKind::Z2, SeparationKind::Z3] {
            let s = gen_separation(which, 97).unwrap();
            for kind in [PolicyKind::Drc, PolicyKind::Dac, PolicyKind::Feedback] {
                for g in [-0.7, 0.0, 0.3, 1.1] {
                    let fast = s.scalar_cost(kind, g);
                    let slow = rollout_policy(&s.instance, kind, &PolicyParam::scalar(&[g]).unwrap()).unwrap().total_cost();
                    assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "{which:?} {kind:?} {g}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn z3_reference_settles_into_the_cycle() {
        let (u, x) = z3_reference(30);
        assert_eq!(&u[..3], &[0.0, 1.0, 1.25]);
        assert!((x[2] - 1.05).abs() < 1e-15);
        for t in 4..=30 {
            let expect = [21.0 / 16.0, 1.0, 1.25][t % 3];
            assert!((u[t - 1] - expect).abs() < 1e-15, "t={t}");
            assert!((x[t - 1] - 1.0).abs() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn z1_pair_minimum() {
        assert!((z1_constant_pair_cost(4.0 / 17.0) - 1.0 / 1088.0).abs() < 1e-18);
        assert!(z1_constant_pair_cost(0.23) > 1.0 / 1088.0);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("Z3".parse::<SeparationKind>().unwrap(), SeparationKind::Z3);
        assert!("z4".parse::<SeparationKind>().is_err());
    }
}
