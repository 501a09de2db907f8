//! Online gradient descent for losses with memory, and the disturbance
//! response controller that runs it over policy parameters.

use std::collections::VecDeque;

use ltv_core::linalg::{all_finite, clip_norm, matrix_to_rows, matrix_from_rows};
use ltv_core::{markov_operator_padded, nature_x, CostFn, LtvError, LtvInstance, MarkovOperator, Matrix, PolicyParam, Simulator, Trace, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};

/// Convex decision set with an exact (radial) Euclidean projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecisionSet {
    Ball { radius: f64 },
    Unbounded,
}

impl DecisionSet {
    pub fn project(&self, v: &Vector) -> Vector {
        match *self {
            DecisionSet::Ball { radius } => clip_norm(v, radius),
            DecisionSet::Unbounded => v.clone(),
        }
    }
}

/// Gradient descent on the unary proxy `f̃_t(x) = f_t(x, ..., x)`.
#[derive(Clone, Debug)]
pub struct MemOgd {
    iterate: Vector,
    eta: f64,
    set: DecisionSet,
    history: VecDeque<Vector>,
    memory: usize,
}

impl MemOgd {
    pub fn new(start: Vector, eta: f64, memory: usize, set: DecisionSet) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(LearnError::Config(format!("step size must be positive, got {eta}")));
        }
        let start = set.project(&start);
        let mut history = VecDeque::with_capacity(memory + 1);
        history.push_back(start.clone());
        Ok(MemOgd { iterate: start, eta, set, history, memory })
    }

    pub fn iterate(&self) -> &Vector {
        &self.iterate
    }

    /// The last `h+1` iterates, oldest first, ending with the current one.
    pub fn history(&self) -> &VecDeque<Vector> {
        &self.history
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn step(&mut self, grad: &Vector) -> Result<&Vector> {
        if grad.len() != self.iterate.len() {
            return Err(LtvError::Dimension {
                t: self.history.len(),
                what: "gradient",
                expected: format!("{}", self.iterate.len()),
                found: format!("{}", grad.len()),
            }
            .into());
        }
        if !all_finite(grad.iter()) {
            return Err(LearnError::NonFinite { t: self.history.len(), what: "gradient" });
        }
        self.iterate = self.set.project(&(&self.iterate - grad * self.eta));
        self.history.push_back(self.iterate.clone());
        while self.history.len() > self.memory + 1 {
            self.history.pop_front();
        }
        Ok(&self.iterate)
    }
}

/// A sliding window over a 1-based signal (`x̂^nat_s`). Steps below 1 read
/// as zero; steps that have been evicted are an error.
#[derive(Clone, Debug)]
pub struct NatWindow {
    values: VecDeque<Vector>,
    latest: usize,
    capacity: usize,
    dim: usize,
}

impl NatWindow {
    pub fn new(dim: usize, capacity: usize) -> Self {
        NatWindow { values: VecDeque::with_capacity(capacity.max(1)), latest: 0, capacity: capacity.max(1), dim }
    }

    /// Builds a window holding `values[k] = s_{k+1}` for all supplied steps.
    pub fn from_slice(values: &[Vector], capacity: usize) -> Self {
        let dim = values.first().map(|v| v.len()).unwrap_or(0);
        let mut w = NatWindow::new(dim, capacity);
        for v in values {
            w.push(v.clone());
        }
        w
    }

    pub fn latest(&self) -> usize {
        self.latest
    }

    pub fn push(&mut self, v: Vector) {
        self.values.push_back(v);
        self.latest += 1;
        while self.values.len() > self.capacity {
            self.values.pop_front();
        }
    }

    /// `s_k` (`None` meaning the zero vector for `k = 0`).
    pub fn get(&self, k: usize) -> Result<Option<&Vector>> {
        if k == 0 {
            return Ok(None);
        }
        if k > self.latest {
            return Err(LtvError::OutOfHorizon { t: k, horizon: self.latest }.into());
        }
        let oldest = self.latest + 1 - self.values.len();
        if k < oldest {
            return Err(LtvError::InsufficientHistory { t: self.latest, requested: self.latest - k }.into());
        }
        Ok(Some(&self.values[k - oldest]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `u_s(M) = Σ_j M^{[j]} n_{s-j}`.
pub fn drc_action(params: &PolicyParam, nat: &NatWindow, s: usize) -> Result<Vector> {
    let mut u = Vector::zeros(params.shape().0);
    for j in 0..params.memory().min(s) {
        if let Some(n) = nat.get(s - j)? {
            u += params.block(j) * n;
        }
    }
    Ok(u)
}

/// Counterfactual state `x̂_t(M) = n_t + Σ_{k<h} G^{[k]} u_{t-1-k}(M)`, where
/// `g` is the operator mapping past inputs into `x_t`.
pub fn drc_counterfactual_state(params: &PolicyParam, nat: &NatWindow, g: &MarkovOperator, t: usize) -> Result<Vector> {
    let mut x = nat.get(t)?.cloned().unwrap_or_else(|| Vector::zeros(nat.dim()));
    for k in 0..g.h() {
        if t < k + 2 {
            break;
        }
        x += g.block(k) * drc_action(params, nat, t - 1 - k)?;
    }
    Ok(x)
}

/// `f̃_t(M) = c_t(x̂_t(M), u_t(M))`.
pub fn drc_proxy_loss(params: &PolicyParam, nat: &NatWindow, g: &MarkovOperator, cost: &CostFn, t: usize) -> Result<f64> {
    let x = drc_counterfactual_state(params, nat, g, t)?;
    let u = drc_action(params, nat, t)?;
    Ok(cost.value(&x, &u))
}

/// Exact subgradient of [`drc_proxy_loss`] with respect to every block.
pub fn drc_proxy_grad(params: &PolicyParam, nat: &NatWindow, g: &MarkovOperator, cost: &CostFn, t: usize) -> Result<PolicyParam> {
    let x = drc_counterfactual_state(params, nat, g, t)?;
    let u = drc_action(params, nat, t)?;
    let (gx, gu) = cost.subgradient(&x, &u);
    // Pull the state gradient back through each operator block once.
    let pulled: Vec<Vector> = g.blocks().iter().map(|b| b.transpose() * &gx).collect();
    let (d_u, d_x) = params.shape();
    let mut grad = PolicyParam::zeros(params.memory(), d_u, d_x);
    for (j, gj) in grad.blocks_mut().iter_mut().enumerate() {
        if t > j {
            if let Some(n) = nat.get(t - j)? {
                *gj += &gu * n.transpose();
            }
        }
        for (k, p) in pulled.iter().enumerate() {
            let s = t as isize - 1 - k as isize - j as isize;
            if s >= 1 {
                if let Some(n) = nat.get(s as usize)? {
                    *gj += p * n.transpose();
                }
            }
        }
    }
    Ok(grad)
}

/// Step size `√d_min·R_M² / (2L·R_sys²·(h+1)^{5/4}·√T)` with
/// `R_sys = R_G·R_M·R_nat`.
pub fn drc_ogd_step_size(d_min: usize, lipschitz: f64, r_sys: f64, h: usize, horizon: usize, r_m: f64) -> f64 {
    (d_min as f64).sqrt() * r_m * r_m / (2.0 * lipschitz * r_sys * r_sys * ((h + 1) as f64).powf(1.25) * (horizon as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrcOgdConfig {
    pub m: usize,
    pub h: usize,
    pub radius: f64,
    pub eta: f64,
    pub d_x: usize,
    pub d_u: usize,
}

impl DrcOgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.h == 0 {
            return Err(LearnError::Config("memory m and truncation h must be at least 1".into()));
        }
        if !(self.radius > 0.0) || !(self.eta > 0.0) {
            return Err(LearnError::Config("radius and step size must be positive".into()));
        }
        if self.d_x == 0 || self.d_u == 0 {
            return Err(LearnError::Config("dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Disturbance response control driven by gradient steps on the
/// counterfactual loss.
#[derive(Clone, Debug)]
pub struct DrcOgd {
    cfg: DrcOgdConfig,
    params: PolicyParam,
    nat: NatWindow,
    played: VecDeque<PolicyParam>,
}

/// Serializable checkpoint of a [`DrcOgd`] controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrcOgdSnapshot {
    pub config: DrcOgdConfig,
    pub blocks: Vec<Vec<Vec<f64>>>,
    pub nat_latest: usize,
    pub nat_window: Vec<Vec<f64>>,
}

impl DrcOgd {
    pub fn new(cfg: DrcOgdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(DrcOgd {
            cfg,
            params: PolicyParam::zeros(cfg.m, cfg.d_u, cfg.d_x),
            nat: NatWindow::new(cfg.d_x, cfg.m + cfg.h),
            played: VecDeque::with_capacity(cfg.h + 1),
        })
    }

    pub fn config(&self) -> &DrcOgdConfig {
        &self.cfg
    }

    pub fn params(&self) -> &PolicyParam {
        &self.params
    }

    pub fn nat_window(&self) -> &NatWindow {
        &self.nat
    }

    /// Parameters played over the last `h+1` steps, oldest first.
    pub fn played(&self) -> &VecDeque<PolicyParam> {
        &self.played
    }

    /// The step whose Nature's-state estimate arrives next.
    pub fn next_step(&self) -> usize {
        self.nat.latest() + 1
    }

    /// Records `x̂^nat_t` for the upcoming step.
    pub fn observe_nat(&mut self, nat_t: Vector) -> Result<()> {
        let t = self.next_step();
        if nat_t.len() != self.cfg.d_x {
            return Err(LtvError::Dimension { t, what: "Nature's state", expected: format!("{}", self.cfg.d_x), found: format!("{}", nat_t.len()) }.into());
        }
        if !all_finite(nat_t.iter()) {
            return Err(LearnError::NonFinite { t, what: "Nature's state estimate" });
        }
        self.nat.push(nat_t);
        Ok(())
    }

    /// `u_t` for the most recently observed step.
    pub fn action(&self) -> Result<Vector> {
        drc_action(&self.params, &self.nat, self.nat.latest())
    }

    /// One gradient step on `c_t(x̂_t(M), u_t(M))`; `g_into_t` maps past
    /// inputs into `x_t`. Returns the proxy loss at the played parameters.
    pub fn update(&mut self, cost: &CostFn, g_into_t: &MarkovOperator) -> Result<f64> {
        let t = self.nat.latest();
        let value = drc_proxy_loss(&self.params, &self.nat, g_into_t, cost, t)?;
        let grad = drc_proxy_grad(&self.params, &self.nat, g_into_t, cost, t)?;
        if !value.is_finite() || !grad.blocks().iter().all(|b| all_finite(b.iter())) {
            return Err(LearnError::NonFinite { t, what: "proxy loss or gradient" });
        }
        self.played.push_back(self.params.clone());
        while self.played.len() > self.cfg.h + 1 {
            self.played.pop_front();
        }
        self.params = self.params.add_scaled(&grad, -self.cfg.eta).clip_to_ball(self.cfg.radius)?;
        Ok(value)
    }

    /// Observe `x̂^nat_t`, emit `u_t`, then update on `c_t`.
    pub fn step(&mut self, nat_t: Vector, cost: &CostFn, g_into_t: &MarkovOperator) -> Result<Vector> {
        self.observe_nat(nat_t)?;
        let u = self.action()?;
        self.update(cost, g_into_t)?;
        Ok(u)
    }

    pub fn snapshot(&self) -> DrcOgdSnapshot {
        let oldest = self.nat.latest() + 1 - self.nat.values.len();
        DrcOgdSnapshot {
            config: self.cfg,
            blocks: self.params.blocks().iter().map(matrix_to_rows).collect(),
            nat_latest: self.nat.latest(),
            nat_window: (oldest..=self.nat.latest())
                .filter_map(|k| self.nat.get(k).ok().flatten().map(|v| v.iter().cloned().collect()))
                .collect(),
        }
    }

    pub fn from_snapshot(s: &DrcOgdSnapshot) -> Result<Self> {
        let mut ctl = DrcOgd::new(s.config)?;
        let blocks: Option<Vec<Matrix>> = s.blocks.iter().map(|b| matrix_from_rows(b)).collect();
        let blocks = blocks.ok_or_else(|| LearnError::Config("ragged policy block in snapshot".into()))?;
        ctl.params = PolicyParam::new(blocks)?;
        if s.nat_window.len() > s.nat_latest {
            return Err(LearnError::Config("snapshot window longer than its history".into()));
        }
        ctl.nat.latest = s.nat_latest - s.nat_window.len();
        for v in &s.nat_window {
            ctl.nat.push(Vector::from_vec(v.clone()));
        }
        Ok(ctl)
    }
}

/// DRC-OGD on a known system: Nature's states are exact and `G_{t-1}` is the
/// true operator truncated to `h` blocks.
pub fn drc_ogd_run(inst: &LtvInstance, cfg: DrcOgdConfig) -> Result<Trace> {
    if cfg.d_x != inst.state_dim() || cfg.d_u != inst.input_dim() {
        return Err(LearnError::Config("controller dimensions do not match the instance".into()));
    }
    let mut ctl = DrcOgd::new(cfg)?;
    let nat = nature_x(inst);
    let mut sim = Simulator::new(inst);
    let mut g_prev = MarkovOperator::zeros(cfg.h, cfg.d_x, cfg.d_u);
    while !sim.done() {
        let t = sim.t();
        let u = ctl.step(nat[t - 1].clone(), inst.cost(t), &g_prev)?;
        sim.step(u)?;
        g_prev = markov_operator_padded(inst, t, cfg.h)?;
    }
    let mut trace = sim.finish();
    trace.nat_estimates = Some(nat[..inst.horizon()].to_vec());
    Ok(trace)
}
