//! Control of an unknown system: epochs that either explore with random
//! signs (feeding a one-shot operator estimate to the pool estimator) or
//! exploit through DRC-OGD on the current operator estimate.

use std::collections::VecDeque;

use ltv_core::linalg::clip_norm;
use ltv_core::rng::{rademacher, stream, StreamId};
use ltv_core::{markov_operator_padded, nature_x, LtvInstance, MarkovOperator, Simulator, Trace, Vector};
use rand::Rng;

use crate::error::{LearnError, Result};
use crate::estimation::{AdaPred, AdaPredConfig, Projection};
use crate::oco::{drc_ogd_step_size, DrcOgd, DrcOgdConfig};

/// Where the per-epoch operator estimate comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimatorMode {
    /// The pool estimator fed by exploration epochs.
    AdaPred,
    /// A frozen operator, never updated.
    Fixed(MarkovOperator),
    /// The true truncated operator of each step (needs the instance).
    Oracle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaCtrlConfig {
    pub p: f64,
    pub h: usize,
    pub m: usize,
    pub r_m: f64,
    pub r_g: f64,
    pub r_nat: f64,
    /// Cost growth constant used in the default step size.
    pub lipschitz: f64,
    /// Overrides the default DRC-OGD step size.
    pub eta: Option<f64>,
    pub estimator: EstimatorMode,
    pub seed: u64,
}

impl AdaCtrlConfig {
    /// `h = ⌈ln T / ln ρ⁻¹⌉` and `p = T^{-1/3}`.
    pub fn default_schedule(horizon: usize, rho: f64) -> Result<(usize, f64)> {
        if !(rho > 0.0 && rho < 1.0) || horizon < 2 {
            return Err(LearnError::Config(format!("need ρ in (0,1) and T ≥ 2, got ρ={rho}, T={horizon}")));
        }
        let h = ((horizon as f64).ln() / (1.0 / rho).ln()).ceil().max(1.0) as usize;
        Ok((h, (horizon as f64).powf(-1.0 / 3.0)))
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(LearnError::Config(format!("exploration probability {} outside [0, 1]", self.p)));
        }
        if self.h == 0 || self.m == 0 {
            return Err(LearnError::Config("h and m must be at least 1".into()));
        }
        if !(self.r_m > 0.0 && self.r_g > 0.0 && self.r_nat > 0.0 && self.lipschitz > 0.0) {
            return Err(LearnError::Config("radii and the growth constant must be positive".into()));
        }
        Ok(())
    }
}

/// `√(h·d_u)·(R_nat + R_G·max{√d_u, R_nat·R_M})`, the norm bound of the
/// exploration estimator.
pub fn estimator_bound(h: usize, d_u: usize, r_nat: f64, r_g: f64, r_m: f64) -> f64 {
    ((h * d_u) as f64).sqrt() * (r_nat + r_g * (d_u as f64).sqrt().max(r_nat * r_m))
}

/// `Proj_{R_nat}(x_{t+1} − Σ_{i<h} Ĝ_t^{[i]} u_{t−i})`; `recent[i]` is
/// `u_{t−i}` and missing entries read as zero.
pub fn extract_nat(next_state: &Vector, g_hat: &MarkovOperator, recent: &VecDeque<Vector>, r_nat: f64) -> Vector {
    let residual = next_state - g_hat.apply(|i| recent.get(i));
    clip_norm(&residual, r_nat)
}

/// `G̃^{[i]} = x_{e+1} u_{e−i}ᵀ` for an epoch ending at step `e`; `recent[i]`
/// is `u_{e−i}`.
pub fn exploration_estimate(next_state: &Vector, recent: &VecDeque<Vector>, h: usize) -> MarkovOperator {
    let blocks = (0..h).map(|i| next_state * recent[i].transpose()).collect();
    MarkovOperator::new(blocks).expect("blocks share one shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub index: usize,
    pub start: usize,
    pub len: usize,
    pub explored: bool,
    pub g_hat: MarkovOperator,
    pub g_tilde: Option<MarkovOperator>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub t: usize,
    pub cost: f64,
    pub explored: bool,
    /// `‖Ĝ_t − G_t‖_{ℓ1,op}` against the true `h`-truncated operator.
    pub operator_error: f64,
    /// `‖x̂^nat_t − x^nat_t‖`.
    pub nat_error: f64,
}

#[derive(Clone, Debug)]
pub struct AdaCtrlRun {
    pub trace: Trace,
    pub epochs: Vec<EpochRecord>,
    pub diagnostics: Vec<DiagnosticRow>,
}

impl AdaCtrlRun {
    pub fn explored_epochs(&self) -> usize {
        self.epochs.iter().filter(|e| e.explored).count()
    }
}

pub fn ada_ctrl_run(inst: &LtvInstance, cfg: &AdaCtrlConfig) -> Result<AdaCtrlRun> {
    cfg.validate()?;
    let (d_x, d_u, horizon, h) = (inst.state_dim(), inst.input_dim(), inst.horizon(), cfg.h);
    if let EstimatorMode::Fixed(g) = &cfg.estimator {
        if g.h() != h || g.shape() != (d_x, d_u) {
            return Err(LearnError::Config("fixed operator does not match h and the instance dimensions".into()));
        }
    }
    let r_sys = cfg.r_g * cfg.r_m * cfg.r_nat;
    let eta = cfg
        .eta
        .unwrap_or_else(|| drc_ogd_step_size(d_x.min(d_u), cfg.lipschitz, r_sys, h, horizon, cfg.r_m));
    let mut ctl = DrcOgd::new(DrcOgdConfig { m: cfg.m, h, radius: cfg.r_m, eta, d_x, d_u })?;

    let mut pool = match cfg.estimator {
        EstimatorMode::AdaPred if cfg.p > 0.0 => Some(AdaPred::new(AdaPredConfig {
            p: cfg.p,
            r_z: (d_x.min(d_u) as f64).sqrt() * cfg.r_g,
            r_est: estimator_bound(h, d_u, cfg.r_nat, cfg.r_g, cfg.r_m),
            projection: Projection::Operator { radius: cfg.r_g, h, d_x, d_u },
            start: Vector::zeros(h * d_x * d_u),
        })?),
        _ => None,
    };
    let mut coins = stream(cfg.seed, StreamId::Coins);
    let mut signs = stream(cfg.seed, StreamId::Rademacher);

    let true_nat = nature_x(inst);
    let mut sim = Simulator::new(inst);
    let mut recent: VecDeque<Vector> = VecDeque::with_capacity(h + 1);
    let mut g_prev = MarkovOperator::zeros(h, d_x, d_u);
    let mut nat_next = clip_norm(inst.initial_state(), cfg.r_nat);
    let mut nat_estimates = Vec::with_capacity(horizon);
    let mut epochs = Vec::new();
    let mut diagnostics = Vec::with_capacity(horizon);

    let mut start = 1;
    while start <= horizon {
        let index = epochs.len();
        let len = h.min(horizon - start + 1);
        let full = len == h;
        let explored = full && coins.random::<f64>() < cfg.p;
        let epoch_g = match &cfg.estimator {
            EstimatorMode::AdaPred => match &pool {
                Some(p) => MarkovOperator::from_vector(&p.predict(), h, d_x, d_u)?,
                None => MarkovOperator::zeros(h, d_x, d_u),
            },
            EstimatorMode::Fixed(g) => g.clone(),
            EstimatorMode::Oracle => markov_operator_padded(inst, start, h)?,
        };
        for t in start..start + len {
            let g_t = match cfg.estimator {
                EstimatorMode::Oracle => markov_operator_padded(inst, t, h)?,
                _ => epoch_g.clone(),
            };
            nat_estimates.push(nat_next.clone());
            ctl.observe_nat(nat_next.clone())?;
            let u = if explored {
                Vector::from_fn(d_u, |_, _| rademacher(&mut signs))
            } else {
                ctl.action()?
            };
            ctl.update(inst.cost(t), &g_prev)?;
            let cost = inst.cost(t).value(sim.state(), &u);
            recent.push_front(u.clone());
            recent.truncate(h);
            let x_next = sim.step(u)?.clone();
            let truth = markov_operator_padded(inst, t, h)?;
            diagnostics.push(DiagnosticRow {
                t,
                cost,
                explored,
                operator_error: g_t.add_scaled(&truth, -1.0).l1_op_norm(),
                nat_error: (&nat_next - &true_nat[t - 1]).norm(),
            });
            nat_next = extract_nat(&x_next, &g_t, &recent, cfg.r_nat);
            g_prev = g_t;
        }
        let g_tilde = if explored { Some(exploration_estimate(sim.state(), &recent, h)) } else { None };
        if full {
            if let Some(p) = pool.as_mut() {
                let z = g_tilde.as_ref().map(|g| g.to_vector());
                p.step(explored, z.as_ref())?;
            }
        }
        epochs.push(EpochRecord { index, start, len, explored, g_hat: epoch_g, g_tilde });
        start += len;
    }
    let mut trace = sim.finish();
    trace.explore_flags = Some(epochs.iter().map(|e| e.explored).collect());
    trace.nat_estimates = Some(nat_estimates);
    Ok(AdaCtrlRun { trace, epochs, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltv_core::Matrix;

    #[test]
    fn scalar_exploration_recovers_gain() {
        let recent: VecDeque<Vector> = [Vector::from_element(1, -1.0)].into_iter().collect();
        let x = Vector::from_element(1, 0.7 * -1.0);
        let g = exploration_estimate(&x, &recent, 1);
        assert_eq!(g.block(0)[(0, 0)], 0.7);
    }

    #[test]
    fn extraction_clips_to_the_radius() {
        let g = MarkovOperator::new(vec![Matrix::zeros(2, 1)]).unwrap();
        let out = extract_nat(&Vector::from_vec(vec![6.0, 8.0]), &g, &VecDeque::new(), 5.0);
        assert!((out.norm() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn default_schedule() {
        let (h, p) = AdaCtrlConfig::default_schedule(27_000, 0.5).unwrap();
        assert_eq!(h, 15);
        assert!((p - 1.0 / 30.0).abs() < 1e-12);
    }
}
