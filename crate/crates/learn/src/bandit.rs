//! Exponentially weighted state-feedback control over a finite cover of
//! gain matrices.

use ltv_core::linalg::op_norm;
use ltv_core::rng::{stream, StreamId};
use ltv_core::{LtvInstance, Matrix, Simulator, Trace};
use rand::Rng;

use crate::error::{LearnError, Result};

/// Default cap on the number of cover points.
pub const DEFAULT_COVER_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GainRegion {
    /// Every free entry bounded by `R_K` in absolute value.
    Box,
    /// Frobenius norm (over free entries) bounded by `R_K`.
    Ball,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverSpec {
    pub d_u: usize,
    pub d_x: usize,
    pub r_k: f64,
    pub epsilon: f64,
    pub region: GainRegion,
    /// Row-major `d_u × d_x` flags; entries marked `false` are pinned to 0.
    pub free: Option<Vec<bool>>,
    pub cap: usize,
}

impl CoverSpec {
    pub fn new(d_u: usize, d_x: usize, r_k: f64, epsilon: f64) -> Self {
        CoverSpec { d_u, d_x, r_k, epsilon, region: GainRegion::Box, free: None, cap: DEFAULT_COVER_CAP }
    }

    fn free_entries(&self) -> Result<Vec<(usize, usize)>> {
        let all = (0..self.d_u).flat_map(|i| (0..self.d_x).map(move |j| (i, j)));
        match &self.free {
            None => Ok(all.collect()),
            Some(mask) if mask.len() == self.d_u * self.d_x => Ok(all.zip(mask).filter(|(_, f)| **f).map(|(ij, _)| ij).collect()),
            Some(mask) => Err(LearnError::Config(format!("mask has {} entries, expected {}", mask.len(), self.d_u * self.d_x))),
        }
    }

    /// Grid pitch `ε / √(free entries)`.
    pub fn pitch(&self) -> Result<f64> {
        Ok(self.epsilon / (self.free_entries()?.len().max(1) as f64).sqrt())
    }

    /// `(5R_K/ε)^{free entries}`.
    pub fn size_bound(&self) -> Result<f64> {
        Ok((5.0 * self.r_k / self.epsilon).powi(self.free_entries()?.len() as i32))
    }

    pub fn contains(&self, k: &Matrix) -> bool {
        let free = match self.free_entries() {
            Ok(f) => f,
            Err(_) => return false,
        };
        let pinned_zero = (0..self.d_u).flat_map(|i| (0..self.d_x).map(move |j| (i, j))).filter(|ij| !free.contains(ij)).all(|(i, j)| k[(i, j)] == 0.0);
        let tol = 1e-12 * self.r_k;
        pinned_zero
            && match self.region {
                GainRegion::Box => free.iter().all(|&(i, j)| k[(i, j)].abs() <= self.r_k + tol),
                GainRegion::Ball => free.iter().map(|&(i, j)| k[(i, j)].powi(2)).sum::<f64>().sqrt() <= self.r_k + tol,
            }
    }
}

/// Axis-aligned grid over the free entries, restricted to the region.
pub fn epsilon_cover(spec: &CoverSpec) -> Result<Vec<Matrix>> {
    if !(spec.epsilon > 0.0) || !(spec.r_k >= 0.0) || spec.d_u == 0 || spec.d_x == 0 {
        return Err(LearnError::Config("cover needs ε > 0, R_K ≥ 0 and positive dimensions".into()));
    }
    let free = spec.free_entries()?;
    let delta = spec.pitch()?;
    let half = (spec.r_k / delta + 1e-9).floor() as i64;
    let per_axis = (2 * half + 1) as f64;
    let size = per_axis.powi(free.len() as i32);
    if size > spec.cap as f64 {
        return Err(LearnError::CoverTooLarge { size, cap: spec.cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut idx = vec![-half; free.len()];
    loop {
        let mut k = Matrix::zeros(spec.d_u, spec.d_x);
        for (&(i, j), &n) in free.iter().zip(&idx) {
            k[(i, j)] = n as f64 * delta;
        }
        if spec.contains(&k) {
            out.push(k);
        }
        // Odometer increment over the free coordinates.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(out);
            }
            idx[pos] += 1;
            if idx[pos] <= half {
                break;
            }
            idx[pos] = -half;
            pos += 1;
        }
    }
}

/// Per-window loss bound `8·L·H·(R_K·c*·R_w/(1−ρ*))²`.
pub fn exp3_loss_scale(lipschitz: f64, window: usize, r_k: f64, c_star: f64, rho_star: f64, r_w: f64) -> f64 {
    8.0 * lipschitz * window as f64 * (r_k * c_star * r_w / (1.0 - rho_star)).powi(2)
}

/// `√(ln N / (N·n)) / B` for `N` arms and `n` windows.
pub fn exp3_default_eta(arms: usize, windows: usize, loss_scale: f64) -> f64 {
    ((arms as f64).ln() / (arms as f64 * windows.max(1) as f64)).sqrt() / loss_scale
}

/// `2B·√(n·N·ln N)`.
pub fn exp3_regret_bound(arms: usize, windows: usize, loss_scale: f64) -> f64 {
    2.0 * loss_scale * (windows as f64 * arms as f64 * (arms as f64).ln()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exp3Config {
    pub window: usize,
    pub eta: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exp3Window {
    pub n: usize,
    pub arm: usize,
    pub loss: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug)]
pub struct Exp3Run {
    pub trace: Trace,
    pub windows: Vec<Exp3Window>,
    /// Importance-weighted cumulative loss of every arm.
    pub cumulative_losses: Vec<f64>,
    pub final_probabilities: Vec<f64>,
}

/// Sampling distribution `p ∝ exp(−η·L)`.
pub fn exp3_probabilities(cum_loss: &[f64], eta: f64) -> Vec<f64> {
    let min = cum_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = cum_loss.iter().map(|l| (-eta * (l - min)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

pub fn exp3_control_run(inst: &LtvInstance, arms: &[Matrix], cfg: Exp3Config) -> Result<Exp3Run> {
    if arms.is_empty() || cfg.window == 0 || !(cfg.eta >= 0.0) {
        return Err(LearnError::Config("need at least one arm, H ≥ 1 and η ≥ 0".into()));
    }
    let shape = (inst.input_dim(), inst.state_dim());
    if let Some(bad) = arms.iter().position(|k| k.shape() != shape) {
        return Err(LearnError::Config(format!("arm {bad} is not {}x{}", shape.0, shape.1)));
    }
    let mut rng = stream(cfg.seed, StreamId::Bandit);
    let mut cum = vec![0.0; arms.len()];
    let mut sim = Simulator::new(inst);
    let mut windows = Vec::new();
    while !sim.done() {
        let probs = exp3_probabilities(&cum, cfg.eta);
        let arm = sample(&probs, rng.random::<f64>());
        let len = cfg.window.min(inst.horizon() + 1 - sim.t());
        let mut loss = 0.0;
        for _ in 0..len {
            let t = sim.t();
            let u = &arms[arm] * sim.state();
            loss += inst.cost(t).value(sim.state(), &u);
            sim.step(u)?;
        }
        cum[arm] += loss / probs[arm];
        windows.push(Exp3Window { n: windows.len() + 1, arm, loss, entropy: entropy(&probs) });
    }
    let final_probabilities = exp3_probabilities(&cum, cfg.eta);
    Ok(Exp3Run { trace: sim.finish(), windows, cumulative_losses: cum, final_probabilities })
}

fn sample(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// First closed-loop stability violation of an arm:
/// `‖(A_{t-1}+B_{t-1}K)···(A_s+B_sK)‖_op > c*·ρ*^{t−s}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityViolation {
    pub arm: usize,
    pub start: usize,
    pub len: usize,
    pub norm: f64,
    pub bound: f64,
}

/// Checks every arm over every start step and window length up to `max_len`.
pub fn closed_loop_audit(inst: &LtvInstance, arms: &[Matrix], c_star: f64, rho_star: f64, max_len: usize) -> Vec<StabilityViolation> {
    let horizon = inst.horizon();
    let mut out = Vec::new();
    'arms: for (arm, k) in arms.iter().enumerate() {
        let closed: Vec<Matrix> = (1..=horizon).map(|t| inst.a(t) + inst.b(t) * k).collect();
        for s in 1..=horizon {
            let mut prod = Matrix::identity(inst.state_dim(), inst.state_dim());
            for len in 1..=max_len.min(horizon + 1 - s) {
                prod = &closed[s + len - 2] * prod;
                let norm = op_norm(&prod);
                let bound = c_star * rho_star.powi(len as i32);
                if norm > bound * (1.0 + 1e-12) {
                    out.push(StabilityViolation { arm, start: s, len, norm, bound });
                    continue 'arms;
                }
            }
        }
    }
    out
}
