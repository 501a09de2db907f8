//! Per-step convex costs `c_t(x, u)` together with subgradients.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{simplex_distance, Matrix, Vector};

/// Shape of the scalar penalty `f` used by the noisy-gain lower-bound cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyShape {
    Abs,
    Square,
}

impl PenaltyShape {
    pub fn value(self, z: f64) -> f64 {
        match self {
            PenaltyShape::Abs => z.abs(),
            PenaltyShape::Square => z * z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            PenaltyShape::Abs => sign0(z),
            PenaltyShape::Square => 2.0 * z,
        }
    }
}

/// `sign` with the subgradient choice 0 at the kink.
pub fn sign0(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Quadratic tracking cost `(x-x*)'Q(x-x*) + (u-u*)'R(u-u*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCost {
    pub q: Matrix,
    pub r: Matrix,
    pub x_ref: Option<Vector>,
    pub u_ref: Option<Vector>,
}

impl QuadraticCost {
    /// `‖x‖² + ‖u‖²`.
    pub fn identity(d_x: usize, d_u: usize) -> Self {
        QuadraticCost { q: Matrix::identity(d_x, d_x), r: Matrix::identity(d_u, d_u), x_ref: None, u_ref: None }
    }
}

/// Scalar costs of the three class-separation sequences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeparationCost {
    /// `(u - x/4)² / 8`.
    FeedbackQuarter,
    /// `(u - target)²`.
    InputTracking { target: f64 },
    /// `((u - u_ref)² + |x - x_ref|) / 4`.
    TrajectoryTracking { u_ref: f64, x_ref: f64 },
}

impl SeparationCost {
    /// Scalar evaluation.
    pub fn value(&self, x: f64, u: f64) -> f64 {
        match *self {
            SeparationCost::FeedbackQuarter => (u - 0.25 * x).powi(2) / 8.0,
            SeparationCost::InputTracking { target } => (u - target).powi(2),
            SeparationCost::TrajectoryTracking { u_ref, x_ref } => 0.25 * ((u - u_ref).powi(2) + (x - x_ref).abs()),
        }
    }
}

/// Which input coordinate is rewarded on a clause step of the SAT gadget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiteralSign {
    Positive,
    Negative,
}

/// Simplex-regularity cost of the MAX-3SAT gadget:
/// `scale·(S_x(x) + (1 - x_sink)²·S_u(u)) - u[reward]·(1 - x_sink)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SatCost {
    pub scale: f64,
    pub literal: Option<LiteralSign>,
}

/// User-supplied cost.
pub trait CustomCost: Send + Sync + fmt::Debug {
    fn value(&self, x: &Vector, u: &Vector) -> f64;
    fn subgradient(&self, x: &Vector, u: &Vector) -> (Vector, Vector);
    fn signed(&self) -> bool {
        false
    }
}

/// A single step's cost descriptor.
#[derive(Clone, Debug)]
pub enum CostFn {
    Quadratic(Arc<QuadraticCost>),
    Separation(SeparationCost),
    /// `x[2]² + u[2]² + f(x[1])` (1-based coordinates).
    NoisyGain(PenaltyShape),
    Sat(SatCost),
    Custom(Arc<dyn CustomCost>),
}

impl PartialEq for CostFn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (CostFn::Quadratic(a), CostFn::Quadratic(b)) => a == b,
            (CostFn::Separation(a), CostFn::Separation(b)) => a == b,
            (CostFn::NoisyGain(a), CostFn::NoisyGain(b)) => a == b,
            (CostFn::Sat(a), CostFn::Sat(b)) => a == b,
            (CostFn::Custom(a), CostFn::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl CostFn {
    pub fn quadratic(q: QuadraticCost) -> Self {
        CostFn::Quadratic(Arc::new(q))
    }

    /// Short tag used in documents and logs.
    pub fn kind(&self) -> &'static str {
        match self {
            CostFn::Quadratic(_) => "quadratic_tracking",
            CostFn::Separation(_) => "separation",
            CostFn::NoisyGain(_) => "noisy_gain",
            CostFn::Sat(_) => "sat",
            CostFn::Custom(_) => "custom",
        }
    }

    /// Costs carrying negative reward terms; the growth check is skipped for them.
    pub fn signed(&self) -> bool {
        match self {
            CostFn::Sat(_) => true,
            CostFn::Separation(SeparationCost::TrajectoryTracking { .. }) => true,
            CostFn::Custom(c) => c.signed(),
            _ => false,
        }
    }

    /// Verifies that the cost accepts states of size `d_x` and inputs of size `d_u`.
    pub fn check_dims(&self, d_x: usize, d_u: usize) -> Result<(), String> {
        match self {
            CostFn::Quadratic(c) => {
                if c.q.shape() != (d_x, d_x) {
                    return Err(format!("Q is {:?}, expected {}x{}", c.q.shape(), d_x, d_x));
                }
                if c.r.shape() != (d_u, d_u) {
                    return Err(format!("R is {:?}, expected {}x{}", c.r.shape(), d_u, d_u));
                }
                if c.x_ref.as_ref().is_some_and(|v| v.len() != d_x) {
                    return Err("x_ref has wrong length".into());
                }
                if c.u_ref.as_ref().is_some_and(|v| v.len() != d_u) {
                    return Err("u_ref has wrong length".into());
                }
                Ok(())
            }
            CostFn::Separation(_) if d_x == 1 && d_u == 1 => Ok(()),
            CostFn::Separation(_) => Err("separation costs are scalar".into()),
            CostFn::NoisyGain(_) if d_x == 3 && d_u == 3 => Ok(()),
            CostFn::NoisyGain(_) => Err("noisy-gain cost needs d_x = d_u = 3".into()),
            CostFn::Sat(_) if d_x >= 2 && d_u == 2 => Ok(()),
            CostFn::Sat(_) => Err("SAT cost needs d_x >= 2 and d_u = 2".into()),
            CostFn::Custom(_) => Ok(()),
        }
    }

    pub fn value(&self, x: &Vector, u: &Vector) -> f64 {
        match self {
            CostFn::Quadratic(c) => {
                let dx = match &c.x_ref {
                    Some(r) => x - r,
                    None => x.clone(),
                };
                let du = match &c.u_ref {
                    Some(r) => u - r,
                    None => u.clone(),
                };
                dx.dot(&(&c.q * &dx)) + du.dot(&(&c.r * &du))
            }
            CostFn::Separation(s) => s.value(x[0], u[0]),
            CostFn::NoisyGain(f) => x[1] * x[1] + u[1] * u[1] + f.value(x[0]),
            CostFn::Sat(c) => {
                let sink = x.len() - 1;
                let free = 1.0 - x[sink];
                let (sx, _) = simplex_distance(x);
                let (su, _) = simplex_distance(u);
                let reward = match c.literal {
                    Some(LiteralSign::Positive) => u[0] * free,
                    Some(LiteralSign::Negative) => u[1] * free,
                    None => 0.0,
                };
                c.scale * (sx + free * free * su) - reward
            }
            CostFn::Custom(c) => c.value(x, u),
        }
    }

    /// A subgradient `(g_x, g_u)`; kinks take the zero element.
    pub fn subgradient(&self, x: &Vector, u: &Vector) -> (Vector, Vector) {
        match self {
            CostFn::Quadratic(c) => {
                let dx = match &c.x_ref {
                    Some(r) => x - r,
                    None => x.clone(),
                };
                let du = match &c.u_ref {
                    Some(r) => u - r,
                    None => u.clone(),
                };
                let gx = (&c.q + c.q.transpose()) * dx;
                let gu = (&c.r + c.r.transpose()) * du;
                (gx, gu)
            }
            CostFn::Separation(s) => {
                let (xs, us) = (x[0], u[0]);
                let (gx, gu) = match *s {
                    SeparationCost::FeedbackQuarter => {
                        let r = us - 0.25 * xs;
                        (-r / 16.0, r / 4.0)
                    }
                    SeparationCost::InputTracking { target } => (0.0, 2.0 * (us - target)),
                    SeparationCost::TrajectoryTracking { u_ref, x_ref } => (0.25 * sign0(xs - x_ref), 0.5 * (us - u_ref)),
                };
                (Vector::from_element(1, gx), Vector::from_element(1, gu))
            }
            CostFn::NoisyGain(f) => {
                let gx = Vector::from_vec(vec![f.derivative(x[0]), 2.0 * x[1], 0.0]);
                let gu = Vector::from_vec(vec![0.0, 2.0 * u[1], 0.0]);
                (gx, gu)
            }
            CostFn::Sat(c) => {
                let sink = x.len() - 1;
                let free = 1.0 - x[sink];
                let (_, dir_x) = simplex_distance(x);
                let (su, dir_u) = simplex_distance(u);
                let mut gx = dir_x * c.scale;
                let mut gu = dir_u * (c.scale * free * free);
                gx[sink] -= c.scale * 2.0 * free * su;
                match c.literal {
                    Some(LiteralSign::Positive) => {
                        gu[0] -= free;
                        gx[sink] += u[0];
                    }
                    Some(LiteralSign::Negative) => {
                        gu[1] -= free;
                        gx[sink] += u[1];
                    }
                    None => {}
                }
                (gx, gu)
            }
            CostFn::Custom(c) => c.subgradient(x, u),
        }
    }

    /// Checks the growth conditions `0 <= c <= L·max{1, ‖x‖²+‖u‖²}` and
    /// `‖∇c‖ <= L·max{1, ‖x‖+‖u‖}` at one point. Signed costs always pass.
    pub fn growth_violation(&self, x: &Vector, u: &Vector, lipschitz: f64) -> Option<String> {
        if self.signed() {
            return None;
        }
        let v = self.value(x, u);
        let sq = x.norm_squared() + u.norm_squared();
        let bound = lipschitz * sq.max(1.0);
        if v < 0.0 || v > bound * (1.0 + 1e-12) {
            return Some(format!("value {v} outside [0, {bound}]"));
        }
        let (gx, gu) = self.subgradient(x, u);
        let g = (gx.norm_squared() + gu.norm_squared()).sqrt();
        let gbound = lipschitz * (x.norm() + u.norm()).max(1.0);
        if g > gbound * (1.0 + 1e-12) {
            return Some(format!("subgradient norm {g} exceeds {gbound}"));
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(c: &CostFn, x: &Vector, u: &Vector) {
        let (gx, gu) = c.subgradient(x, u);
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (c.value(&xp, u) - c.value(&xm, u)) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-5 * (1.0 + fd.abs()), "x[{i}]: {fd} vs {}", gx[i]);
        }
        for i in 0..u.len() {
            let mut up = u.clone();
            up[i] += h;
            let mut um = u.clone();
            um[i] -= h;
            let fd = (c.value(x, &up) - c.value(x, &um)) / (2.0 * h);
            assert!((fd - gu[i]).abs() < 1e-5 * (1.0 + fd.abs()), "u[{i}]: {fd} vs {}", gu[i]);
        }
    }

    #[test]
    fn subgradients_match_finite_differences_at_smooth_points() {
        let x3 = Vector::from_vec(vec![0.3, -0.7, 1.1]);
        let u3 = Vector::from_vec(vec![0.4, 0.9, -0.2]);
        fd_check(&CostFn::NoisyGain(PenaltyShape::Square), &x3, &u3);
        fd_check(&CostFn::NoisyGain(PenaltyShape::Abs), &x3, &u3);
        let q = QuadraticCost {
            q: Matrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 1.5]),
            r: Matrix::identity(3, 3) * 0.5,
            x_ref: Some(Vector::from_vec(vec![1.0, 0.0, -1.0])),
            u_ref: None,
        };
        fd_check(&CostFn::quadratic(q), &x3, &u3);
        let x1 = Vector::from_element(1, 0.7);
        let u1 = Vector::from_element(1, -0.3);
        fd_check(&CostFn::Separation(SeparationCost::FeedbackQuarter), &x1, &u1);
        fd_check(&CostFn::Separation(SeparationCost::InputTracking { target: 0.5 }), &x1, &u1);
        fd_check(&CostFn::Separation(SeparationCost::TrajectoryTracking { u_ref: 1.0, x_ref: 1.0 }), &x1, &u1);
        let xs = Vector::from_vec(vec![0.4, 0.9, 0.3]);
        let us = Vector::from_vec(vec![0.2, 1.1]);
        fd_check(&CostFn::Sat(SatCost { scale: 3.0, literal: Some(LiteralSign::Negative) }), &xs, &us);
    }

    #[test]
    fn sat_cost_vanishes_on_basis_pairs() {
        let c = CostFn::Sat(SatCost { scale: 1e3, literal: None });
        let x = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let u = Vector::from_vec(vec![1.0, 0.0]);
        assert_eq!(c.value(&x, &u), 0.0);
        let rewarded = CostFn::Sat(SatCost { scale: 1e3, literal: Some(LiteralSign::Positive) });
        assert_eq!(rewarded.value(&x, &u), -1.0);
    }
}
