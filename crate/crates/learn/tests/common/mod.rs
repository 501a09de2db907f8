#![allow(dead_code)]

use ltv_core::{CostFn, LtvInstance, Matrix, QuadraticCost, Vector};
use ltv_core::rng::{stream, StreamId, StreamRng};
use rand::Rng;

pub type ChaCha8Rng = StreamRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream(seed, StreamId::Audit)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

/// Random LTV instance whose `A_t` have spectral norm exactly `gain`.
pub fn random_instance(seed: u64, d_x: usize, d_u: usize, horizon: usize, gain: f64) -> LtvInstance {
    let mut r = rng(seed);
    let mut a = Vec::with_capacity(horizon);
    let mut b = Vec::with_capacity(horizon);
    let mut w = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let m = uniform_matrix(&mut r, d_x, d_x, 1.0);
        let n = ltv_core::linalg::op_norm(&m);
        a.push(if n > 0.0 { m * (gain / n) } else { m });
        b.push(uniform_matrix(&mut r, d_x, d_u, 1.0));
        w.push(uniform_vector(&mut r, d_x, 1.0));
    }
    let costs = vec![CostFn::quadratic(QuadraticCost::identity(d_x, d_u)); horizon];
    LtvInstance::new(a, b, w, costs).unwrap()
}
