//! Random instances on which a perturbed input gain and a one-step-delayed
//! disturbance literal force linear regret against DRC/DAC comparators.

use ltv_core::rng::{stream, StreamId};
use ltv_core::{CostFn, LtvInstance, Matrix, PenaltyShape, PolicyKind, PolicyParam, Vector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{InstanceError, Result};

/// Default literal-noise scale.
pub const DEFAULT_ALPHA: f64 = 1.0 / 24.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsigmaParams {
    /// Half-width of the input-gain perturbation, in `(0, 1/8]`.
    pub sigma: f64,
    pub f: PenaltyShape,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub horizon: usize,
    pub seed: u64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl DsigmaParams {
    pub fn new(sigma: f64, f: PenaltyShape, horizon: usize, seed: u64) -> Self {
        DsigmaParams { sigma, f, alpha: DEFAULT_ALPHA, horizon, seed }
    }

    /// `E[β²] = 1 + σ²/3`.
    pub fn gain_second_moment(&self) -> f64 {
        1.0 + self.sigma * self.sigma / 3.0
    }

    /// Comparator offset `ū = 1/(2(1+σ²/6))`.
    pub fn u_bar(&self) -> f64 {
        1.0 / (2.0 * (1.0 + self.sigma * self.sigma / 6.0))
    }

    /// Steady-state comparator cost per step, `1 + α²σ² − 1/(2+σ²/3)`.
    pub fn c_q_star(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        1.0 + self.alpha * self.alpha * s2 - 1.0 / (2.0 + s2 / 3.0)
    }

    /// Algorithm-independent expected-regret floor `(T−2)·f(ασ)/2 − 2`.
    pub fn regret_floor(&self) -> f64 {
        (self.horizon as f64 - 2.0) * self.f.value(self.alpha * self.sigma) / 2.0 - 2.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 0.125) {
            return Err(InstanceError::InvalidParameter(format!("σ = {} outside (0, 1/8]", self.sigma)));
        }
        if !(self.alpha > 0.0 && self.alpha * self.sigma < 1.0) {
            return Err(InstanceError::InvalidParameter(format!("α = {} must be positive with ασ < 1", self.alpha)));
        }
        if self.horizon == 0 {
            return Err(InstanceError::InvalidParameter("horizon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DsigmaInstance {
    pub params: DsigmaParams,
    pub instance: LtvInstance,
    /// Sampled gains `β_1..β_T`.
    pub betas: Vec<f64>,
    /// Sampled literals `ω_0..ω_T`.
    pub omegas: Vec<f64>,
    pub comparator_kind: PolicyKind,
    /// Memory-one DRC policy playing `u_t = (ω_{t−1}, ū, 0)` from `t = 2`.
    pub comparator: PolicyParam,
}

pub fn gen_dsigma(params: DsigmaParams) -> Result<DsigmaInstance> {
    params.validate()?;
    let DsigmaParams { sigma, alpha, horizon, seed, .. } = params;
    let mut rng = stream(seed, StreamId::Instance);
    let mut betas = Vec::with_capacity(horizon);
    let mut omegas = Vec::with_capacity(horizon + 1);
    omegas.push(literal(&mut rng, alpha * sigma));
    for _ in 0..horizon {
        betas.push(rng.random_range(1.0 - sigma..=1.0 + sigma));
        omegas.push(literal(&mut rng, alpha * sigma));
    }
    let instance = LtvInstance::new(
        vec![Matrix::zeros(3, 3); horizon],
        betas.iter().map(|&b| Matrix::from_diagonal(&Vector::from_vec(vec![1.0, b, 1.0]))).collect(),
        (1..=horizon).map(|t| -Vector::from_vec(vec![omegas[t - 1], omegas[t], 1.0])).collect(),
        vec![CostFn::NoisyGain(params.f); horizon],
    )?;
    let mut m = Matrix::zeros(3, 3);
    m[(0, 1)] = -1.0;
    m[(1, 2)] = -params.u_bar();
    Ok(DsigmaInstance { params, instance, betas, omegas, comparator_kind: PolicyKind::Drc, comparator: PolicyParam::new(vec![m])? })
}

fn literal<R: Rng>(rng: &mut R, spread: f64) -> f64 {
    if rng.random::<bool>() {
        1.0 + spread
    } else {
        1.0 - spread
    }
}

/// Expected per-step cost of the constant second input `u` once the first
/// coordinate is cancelled: `(2+σ²/3)(u−ū)² + c_q*`.
pub fn steady_state_cost(params: &DsigmaParams, u: f64) -> f64 {
    (1.0 + params.gain_second_moment()) * u * u - 2.0 * u + 1.0 + (params.alpha * params.sigma).powi(2)
}
