//! Audits of the stability, boundedness and cost-growth conditions.

use rand::Rng;
use serde::Serialize;

use crate::instance::LtvInstance;
use crate::linalg::{op_norm, Matrix, Vector};
use crate::rng::{stream, StreamId};

const REL_TOL: f64 = 1e-9;

/// What went wrong first during [`verify_assumptions`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssumptionViolation {
    /// `‖Φ_t^{[h]}‖_op` exceeded `C1·ρ1^h`.
    Stability { t: usize, h: usize, norm: f64, bound: f64 },
    /// `‖w_t‖` exceeded the declared disturbance bound.
    Disturbance { t: usize, norm: f64, bound: f64 },
    InvalidConstants { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub passed: bool,
    pub violation: Option<AssumptionViolation>,
    /// `C1·R_w/(1-ρ1)`.
    pub r_nat: f64,
    /// `max{1, max_t ‖B_t‖_op · C1/(1-ρ1)}`.
    pub r_g: f64,
    /// Largest window length examined.
    pub max_h_checked: usize,
}

/// Checks `‖Φ_t^{[h]}‖_op ≤ C1·ρ1^h` for every `t` and `1 ≤ h ≤ t` (optionally
/// capping `h`), and `‖w_t‖ ≤ R_w`. Cost is `O(T·h_max)` matrix products.
pub fn verify_assumptions(inst: &LtvInstance, c1: f64, rho1: f64, r_w: f64, h_cap: Option<usize>) -> AssumptionReport {
    let horizon = inst.horizon();
    let b_max = inst.b_seq().iter().map(op_norm).fold(0.0, f64::max);
    let (r_nat, r_g) = if (0.0..1.0).contains(&rho1) {
        (c1 * r_w / (1.0 - rho1), (b_max * c1 / (1.0 - rho1)).max(1.0))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let mut report = AssumptionReport { passed: false, violation: None, r_nat, r_g, max_h_checked: 0 };
    if !(0.0..1.0).contains(&rho1) || c1 <= 0.0 || r_w < 0.0 {
        report.violation = Some(AssumptionViolation::InvalidConstants {
            reason: format!("need C1 > 0, 0 <= rho1 < 1, R_w >= 0 (got {c1}, {rho1}, {r_w})"),
        });
        return report;
    }
    for t in 1..=horizon {
        let n = inst.w(t).norm();
        if n > r_w * (1.0 + REL_TOL) {
            report.violation = Some(AssumptionViolation::Disturbance { t, norm: n, bound: r_w });
            return report;
        }
    }
    let d = inst.state_dim();
    let h_max = h_cap.unwrap_or(horizon).min(horizon);
    for t in 1..=horizon {
        let mut p = Matrix::identity(d, d);
        for h in 1..=t.min(h_max) {
            p *= inst.a(t - h + 1);
            let bound = c1 * rho1.powi(h as i32);
            let norm = op_norm(&p);
            if norm > bound * (1.0 + REL_TOL) + 1e-300 {
                report.violation = Some(AssumptionViolation::Stability { t, h, norm, bound });
                return report;
            }
            report.max_h_checked = report.max_h_checked.max(h);
            if p.iter().all(|x| *x == 0.0) {
                break;
            }
        }
    }
    report.passed = true;
    report
}

/// Samples `points_per_step` random `(x, u)` pairs per step with norms up to
/// `radius` and checks the growth conditions for every unsigned cost.
/// Returns the first offending step and a description.
pub fn cost_growth_audit(inst: &LtvInstance, lipschitz: f64, radius: f64, points_per_step: usize, seed: u64) -> Option<(usize, String)> {
    let mut rng = stream(seed, StreamId::Audit);
    let (d_x, d_u) = (inst.state_dim(), inst.input_dim());
    for t in 1..=inst.horizon() {
        let c = inst.cost(t);
        if c.signed() {
            continue;
        }
        for _ in 0..points_per_step {
            let scale = radius * rng.random::<f64>();
            let x = Vector::from_fn(d_x, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0));
            let u = Vector::from_fn(d_u, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0));
            if let Some(msg) = c.growth_violation(&x, &u, lipschitz) {
                return Some((t, msg));
            }
        }
    }
    None
}
