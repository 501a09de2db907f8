//! Scalar system with a marginally stable state and a random-sign input gain:
//! clairvoyant policies pay 1, any online learner pays on the order of
//! `min{T, 1/(1−ρ)}`.

use ltv_core::rng::{rademacher, stream, StreamId};
use ltv_core::{CostFn, LtvInstance, Matrix, PolicyParam, QuadraticCost, Vector};

use crate::error::{InstanceError, Result};

#[derive(Clone, Debug)]
pub struct UnstableScalar {
    pub rho: f64,
    pub instance: LtvInstance,
    /// Memory-two DAC policy `u_t = −ρ·B_2·w_{t−1}`.
    pub dac: PolicyParam,
    /// Memory-two DRC policy `u_t = −ρB_2·x^nat_t + ρ²B_2·x^nat_{t−1}`.
    pub drc: PolicyParam,
    /// Static gain `K = −ρ·B_2`.
    pub feedback: PolicyParam,
}

impl UnstableScalar {
    /// Expected-cost floor for online learners: `Σ_{t=2}^{T} ρ^{2(t−2)}`.
    pub fn floor(&self) -> f64 {
        unstable_floor(self.rho, self.instance.horizon())
    }
}

pub fn unstable_floor(rho: f64, horizon: usize) -> f64 {
    (2..=horizon).map(|t| rho.powi(2 * (t as i32 - 2))).sum()
}

pub fn gen_unstable_scalar(rho: f64, horizon: usize, seed: u64) -> Result<UnstableScalar> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(InstanceError::InvalidParameter(format!("ρ = {rho} outside [0, 1]")));
    }
    if horizon < 2 {
        return Err(InstanceError::InvalidParameter("horizon must be at least 2".into()));
    }
    let mut rng = stream(seed, StreamId::Instance);
    let signs: Vec<f64> = (0..horizon).map(|_| rademacher(&mut rng)).collect();
    let mut cost = QuadraticCost::identity(1, 1);
    cost.r = Matrix::zeros(1, 1);
    let instance = LtvInstance::new(
        vec![Matrix::from_element(1, 1, rho); horizon],
        signs.iter().map(|&b| Matrix::from_element(1, 1, b)).collect(),
        (1..=horizon).map(|t| Vector::from_element(1, if t == 1 { 1.0 } else { 0.0 })).collect(),
        vec![CostFn::quadratic(cost); horizon],
    )?;
    let b2 = signs[1];
    Ok(UnstableScalar {
        rho,
        instance,
        dac: PolicyParam::scalar(&[0.0, -rho * b2])?,
        drc: PolicyParam::scalar(&[-rho * b2, rho * rho * b2])?,
        feedback: PolicyParam::scalar(&[-rho * b2])?,
    })
}
