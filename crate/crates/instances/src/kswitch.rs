//! Piecewise-constant LQR: `k` random stable systems, each held on one
//! contiguous segment of the horizon.

use ltv_core::linalg::op_norm;
use ltv_core::rng::{stream, StreamId};
use ltv_core::{CostFn, Interval, LtvInstance, Matrix, QuadraticCost, Vector};
use rand::Rng;

use crate::error::{InstanceError, Result};

/// Spectral-norm cap of every segment's state matrix.
pub const SEGMENT_STATE_NORM: f64 = 0.9;

/// Segment `j` (1-based) is `[⌊(j−1)T/k⌋ + 1, ⌊jT/k⌋]`.
pub fn switch_segments(k: usize, horizon: usize) -> Result<Vec<Interval>> {
    if k == 0 || k > horizon {
        return Err(InstanceError::InvalidParameter(format!("need 1 ≤ k ≤ T (k = {k}, T = {horizon})")));
    }
    (1..=k).map(|j| Ok(Interval::new((j - 1) * horizon / k + 1, j * horizon / k)?)).collect()
}

/// Random `k`-switching instance: per segment, `A` has spectral norm drawn
/// uniformly in `[0, 0.9]`, `B` has spectral norm at most 1; disturbances are
/// i.i.d. uniform on the cube scaled into the unit ball; costs are `‖x‖² + ‖u‖²`.
pub fn gen_kswitch_lqr(k: usize, horizon: usize, d_x: usize, d_u: usize, seed: u64) -> Result<LtvInstance> {
    if d_x == 0 || d_u == 0 {
        return Err(InstanceError::InvalidParameter("dimensions must be positive".into()));
    }
    let segments = switch_segments(k, horizon)?;
    let mut rng = stream(seed, StreamId::Instance);
    let mut a = Vec::with_capacity(horizon);
    let mut b = Vec::with_capacity(horizon);
    for seg in &segments {
        let a_j = rescale(uniform(&mut rng, d_x, d_x), rng.random_range(0.0..=SEGMENT_STATE_NORM));
        let b_j = rescale(uniform(&mut rng, d_x, d_u), rng.random_range(0.5..=1.0));
        for _ in seg.steps() {
            a.push(a_j.clone());
            b.push(b_j.clone());
        }
    }
    let w_scale = 1.0 / (d_x as f64).sqrt();
    let w = (0..horizon).map(|_| Vector::from_fn(d_x, |_, _| rng.random_range(-w_scale..=w_scale))).collect();
    let inst = LtvInstance::new(a, b, w, vec![CostFn::quadratic(QuadraticCost::identity(d_x, d_u)); horizon])?;
    Ok(inst.with_segments(segments)?)
}

fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

fn rescale(m: Matrix, target: f64) -> Matrix {
    let n = op_norm(&m);
    if n > 0.0 {
        m * (target / n)
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_formula() {
        let s = switch_segments(3, 10).unwrap();
        assert_eq!(s, vec![Interval::new(1, 3).unwrap(), Interval::new(4, 6).unwrap(), Interval::new(7, 10).unwrap()]);
        let s = switch_segments(3, 9).unwrap();
        assert_eq!(s, vec![Interval::new(1, 3).unwrap(), Interval::new(4, 6).unwrap(), Interval::new(7, 9).unwrap()]);
        assert!(switch_segments(4, 3).is_err());
    }
}
