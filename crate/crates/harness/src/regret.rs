//! Interval regret against the best fixed policy of a class, with the
//! comparator rolled out from `t = 1` and scored on the interval only.

use ltv_core::json::PolicyDoc;
use ltv_core::linalg::all_finite;
use ltv_core::rng::{stream, StreamId};
use ltv_core::{driving_signal, Interval, LtvInstance, Matrix, PolicyKind, PolicyParam, Trace, Vector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Largest horizon for which the all-intervals grid may be requested.
pub const ALL_INTERVALS_MAX_T: usize = 512;

/// Cap on grid-search evaluations per comparator solve.
pub const GRID_EVAL_CAP: usize = 4_000_000;

const DIVERGENCE_NORM: f64 = 1e12;

const MAX_HALVINGS: usize = 30;

const PRECONDITIONER_RIDGE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "grid")]
pub enum IntervalGrid {
    Whole,
    Dyadic,
    Segments,
    #[default]
    DyadicAndSegments,
    /// Every `[r, s] ⊆ [1, T]`; only for `T ≤ 512`.
    All,
    Explicit {
        intervals: Vec<Interval>,
    },
}

impl IntervalGrid {
    pub fn tag(&self) -> &'static str {
        match self {
            IntervalGrid::Whole => "whole",
            IntervalGrid::Dyadic => "dyadic",
            IntervalGrid::Segments => "segments",
            IntervalGrid::DyadicAndSegments => "dyadic-and-segments",
            IntervalGrid::All => "all",
            IntervalGrid::Explicit { .. } => "explicit",
        }
    }
}

/// Aligned blocks `[(k−1)2^j + 1, min(k·2^j, T)]` for every scale `2^j ≤ T`,
/// longest first.
pub fn dyadic_intervals(horizon: usize) -> Vec<Interval> {
    let mut out = Vec::new();
    if horizon == 0 {
        return out;
    }
    let mut len = horizon.next_power_of_two();
    loop {
        if len <= horizon {
            let mut start = 1;
            while start <= horizon {
                out.push(Interval { start, end: (start + len - 1).min(horizon) });
                start += len;
            }
        }
        if len == 1 {
            break;
        }
        len /= 2;
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|i| seen.insert(*i));
    out
}

pub fn grid_intervals(grid: &IntervalGrid, inst: &LtvInstance) -> Result<Vec<Interval>> {
    grid_intervals_for(grid, inst.horizon(), inst.segments())
}

/// The grid over `[1, horizon]` with `segments` standing in for the
/// instance-declared ones.
pub fn grid_intervals_for(grid: &IntervalGrid, horizon: usize, segments: &[Interval]) -> Result<Vec<Interval>> {
    let mut out = match grid {
        IntervalGrid::Whole => vec![Interval { start: 1, end: horizon }],
        IntervalGrid::Dyadic => dyadic_intervals(horizon),
        IntervalGrid::Segments => segments.to_vec(),
        IntervalGrid::DyadicAndSegments => {
            let mut v = dyadic_intervals(horizon);
            v.extend_from_slice(segments);
            v
        }
        IntervalGrid::All => {
            if horizon > ALL_INTERVALS_MAX_T {
                return Err(HarnessError::Validation(format!("the all-intervals grid is limited to T ≤ {ALL_INTERVALS_MAX_T} (T = {horizon})")));
            }
            (1..=horizon).flat_map(|r| (r..=horizon).map(move |s| Interval { start: r, end: s })).collect()
        }
        IntervalGrid::Explicit { intervals } => {
            if let Some(bad) = intervals.iter().find(|i| i.start == 0 || i.end < i.start || i.end > horizon) {
                return Err(HarnessError::Validation(format!("interval [{}, {}] outside [1, {horizon}]", bad.start, bad.end)));
            }
            intervals.clone()
        }
    };
    let mut seen = std::collections::HashSet::new();
    out.retain(|i| seen.insert(*i));
    Ok(out)
}

/// The comparator class `{π^M : M ∈ ℳ(m, R)}` of one parametrization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub kind: PolicyKind,
    pub m: usize,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum ComparatorMethod {
    /// Exhaustive search over an axis grid of the ball.
    Grid {
        #[serde(default = "default_pitch")]
        pitch: f64,
    },
    /// Projected subgradient descent with step backtracking on the exact
    /// offline objective, best of several restarts (convex classes only).
    ProjectedDescent {
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_iterations")]
        iterations: usize,
        /// Extra starting points, such as a known good policy; each is
        /// clipped into the ball first.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warm_starts: Vec<PolicyDoc>,
    },
    /// A single supplied policy.
    Explicit { policy: PolicyDoc },
}

fn default_pitch() -> f64 {
    ComparatorMethod::DEFAULT_PITCH
}

fn default_restarts() -> usize {
    20
}

fn default_iterations() -> usize {
    200
}

impl Default for ComparatorMethod {
    fn default() -> Self {
        ComparatorMethod::ProjectedDescent { restarts: default_restarts(), iterations: default_iterations(), warm_starts: Vec::new() }
    }
}

impl ComparatorMethod {
    pub const DEFAULT_PITCH: f64 = 1e-2;

    pub fn explicit(params: &PolicyParam) -> Self {
        ComparatorMethod::Explicit { policy: PolicyDoc::from_policy(params, None) }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ComparatorMethod::Grid { .. } => "grid",
            ComparatorMethod::ProjectedDescent { .. } => "projected-descent",
            ComparatorMethod::Explicit { .. } => "explicit",
        }
    }
}

/// Cost of the fixed policy on `interval`, played from `t = 1`. Rollouts
/// that leave the overflow guard score `+∞`.
pub fn policy_interval_cost(inst: &LtvInstance, kind: PolicyKind, params: &PolicyParam, signal: Option<&[Vector]>, interval: &Interval) -> f64 {
    let mut x = inst.initial_state().clone();
    let mut states: Vec<Vector> = Vec::new();
    let mut total = 0.0;
    for t in 1..=interval.end {
        let u = match (kind, signal) {
            (PolicyKind::Feedback, _) => {
                states.push(x.clone());
                params.apply_with(t, |k| states.get(k - 1))
            }
            (_, Some(s)) => params.apply_with(t, |k| s.get(k - 1)),
            (_, None) => unreachable!("convex classes carry a driving signal"),
        };
        if interval.contains(t) {
            total += inst.cost(t).value(&x, &u);
        }
        x = inst.transition(t, &x, &u);
        let n = x.norm();
        if !n.is_finite() || n > DIVERGENCE_NORM {
            return f64::INFINITY;
        }
    }
    total
}

/// Value and subgradient in `M` of the interval cost of a DRC/DAC policy,
/// by a forward rollout and a backward adjoint pass through the dynamics.
pub fn convex_interval_objective(inst: &LtvInstance, params: &PolicyParam, signal: &[Vector], interval: &Interval) -> (f64, PolicyParam) {
    let end = interval.end;
    let mut xs = Vec::with_capacity(end + 1);
    let mut us = Vec::with_capacity(end);
    xs.push(inst.initial_state().clone());
    for t in 1..=end {
        let u = params.apply_with(t, |k| signal.get(k - 1));
        xs.push(inst.transition(t, &xs[t - 1], &u));
        us.push(u);
    }
    let mut value = 0.0;
    let mut grad = params.scaled(0.0);
    let mut adj = Vector::zeros(inst.state_dim());
    for t in (1..=end).rev() {
        let (x, u) = (&xs[t - 1], &us[t - 1]);
        let (gx, gu) = if interval.contains(t) {
            value += inst.cost(t).value(x, u);
            inst.cost(t).subgradient(x, u)
        } else {
            (Vector::zeros(x.len()), Vector::zeros(u.len()))
        };
        let du = gu + inst.b(t).transpose() * &adj;
        for (i, block) in grad.blocks_mut().iter_mut().enumerate() {
            if i < t {
                *block += &du * signal[t - i - 1].transpose();
            }
        }
        adj = gx + inst.a(t).transpose() * &adj;
    }
    (value, grad)
}

fn random_in_ball<R: Rng>(rng: &mut R, m: usize, d_u: usize, d_x: usize, radius: f64) -> Result<PolicyParam> {
    let n = m * d_u * d_x;
    let v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    let p = PolicyParam::from_vector(&v, m, d_u, d_x)?;
    let scale: f64 = rng.random_range(0.0..=1.0);
    let norm = p.l1_op_norm();
    Ok(if norm > 0.0 { p.scaled(scale * radius / norm) } else { p })
}

/// Inverse of the ridge-regularized second moment `(1/n)Σ s_k s_kᵀ` of the
/// driving signal up to `end`. Right-multiplying a gradient by it whitens
/// nearly collinear signals.
fn signal_preconditioner(signal: &[Vector], end: usize) -> Matrix {
    let d = signal.first().map_or(0, |s| s.len());
    let n = end.min(signal.len()).max(1);
    let mut m = Matrix::zeros(d, d);
    for s in &signal[..n.min(signal.len())] {
        m += s * s.transpose();
    }
    m /= n as f64;
    let ridge = PRECONDITIONER_RIDGE * (m.trace() / d.max(1) as f64).max(1e-12);
    m += Matrix::identity(d, d) * ridge;
    m.try_inverse().unwrap_or_else(|| Matrix::identity(d, d))
}

/// Projected descent from `start` along the whitened subgradient. Trial
/// steps are kept only when they lower the objective (halving on rejection,
/// growing by half on acceptance). Once no halving helps, as at a kink of a
/// nonsmooth cost, the remaining budget runs plain steps of length `s/√j`
/// from the last accepted length `s`, keeping the best point seen.
fn descend(inst: &LtvInstance, class: &ClassSpec, signal: &[Vector], interval: &Interval, start: PolicyParam, iterations: usize) -> Result<(PolicyParam, f64)> {
    let precond = signal_preconditioner(signal, interval.end);
    let objective = |p: &PolicyParam, k: usize| {
        let (v, mut g) = convex_interval_objective(inst, p, signal, interval);
        if !v.is_finite() || !all_finite(g.to_vector().iter()) {
            return Err(HarnessError::Numerical(format!("non-finite comparator objective at iteration {k}")));
        }
        for block in g.blocks_mut() {
            *block = &*block * &precond;
        }
        Ok((v, g))
    };
    let mut p = start;
    let (mut v, mut g) = objective(&p, 0)?;
    let mut best = (p.clone(), v);
    let mut step = f64::NAN;
    let mut stalled_at: Option<usize> = None;
    for k in 1..=iterations.max(1) {
        let gn = g.frobenius_sq().sqrt();
        if gn == 0.0 {
            break;
        }
        if !step.is_finite() {
            step = class.radius / gn;
        }
        if let Some(k0) = stalled_at {
            let len = step / ((k - k0) as f64).sqrt();
            p = p.add_scaled(&g, -len / gn).clip_to_ball(class.radius)?;
            (v, g) = objective(&p, k)?;
            if v < best.1 {
                best = (p.clone(), v);
            }
            continue;
        }
        let mut accepted = false;
        let mut trial_step = step;
        for _ in 0..MAX_HALVINGS {
            let trial = p.add_scaled(&g, -trial_step).clip_to_ball(class.radius)?;
            let (tv, tg) = objective(&trial, k)?;
            if tv < v {
                (p, v, g) = (trial, tv, tg);
                step = trial_step * 1.5;
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if v < best.1 {
            best = (p.clone(), v);
        }
        if !accepted {
            // From here on `step` is a length rather than a multiplier.
            step = (step * gn).max(class.radius * 1e-3);
            stalled_at = Some(k - 1);
        }
    }
    Ok(best)
}

fn warm_start(doc: &PolicyDoc, class: &ClassSpec, d_u: usize, d_x: usize) -> Result<PolicyParam> {
    let (p, _) = doc.clone().into_policy()?;
    if p.shape() != (d_u, d_x) || p.memory() > class.m {
        return Err(HarnessError::Validation(format!("warm start of memory {} and shape {:?} does not fit the class", p.memory(), p.shape())));
    }
    let mut blocks = p.blocks().to_vec();
    blocks.resize(class.m, Matrix::zeros(d_u, d_x));
    Ok(PolicyParam::new(blocks)?.clip_to_ball(class.radius)?)
}

/// `inf_{M ∈ ℳ(m,R)} Σ_{t∈I} c_t(x_t^M, u_t^M)` by the requested method.
pub fn best_in_class(inst: &LtvInstance, class: &ClassSpec, interval: &Interval, method: &ComparatorMethod, seed: u64) -> Result<(PolicyParam, f64)> {
    let (d_u, d_x) = (inst.input_dim(), inst.state_dim());
    if interval.start == 0 || interval.end > inst.horizon() || interval.end < interval.start {
        return Err(HarnessError::Validation(format!("interval [{}, {}] outside [1, {}]", interval.start, interval.end, inst.horizon())));
    }
    if class.m == 0 || !(class.radius > 0.0) {
        return Err(HarnessError::Validation("comparator class needs m ≥ 1 and a positive radius".into()));
    }
    let signal = driving_signal(inst, class.kind);
    let cost = |p: &PolicyParam| policy_interval_cost(inst, class.kind, p, signal.as_deref(), interval);
    match method {
        ComparatorMethod::Explicit { policy } => {
            let (params, _) = policy.clone().into_policy()?;
            let params = &params;
            if params.shape() != (d_u, d_x) {
                return Err(HarnessError::Validation(format!("explicit comparator is {:?}, instance needs {:?}", params.shape(), (d_u, d_x))));
            }
            Ok((params.clone(), cost(params)))
        }
        ComparatorMethod::Grid { pitch } => {
            let dims = class.m * d_u * d_x;
            if dims > 4 {
                return Err(HarnessError::Validation(format!("grid search is limited to m·d_x·d_u ≤ 4 (got {dims})")));
            }
            if !(*pitch > 0.0) {
                return Err(HarnessError::Validation(format!("grid pitch {pitch} must be positive")));
            }
            let half = (class.radius / pitch + 1e-9).floor() as i64;
            let per_axis = 2 * half + 1;
            let points = (per_axis as f64).powi(dims as i32);
            if points > GRID_EVAL_CAP as f64 {
                return Err(HarnessError::GridTooLarge { points, cap: GRID_EVAL_CAP });
            }
            let best = (0..points as u64)
                .into_par_iter()
                .filter_map(|mut code| {
                    let v = Vector::from_fn(dims, |_, _| {
                        let k = (code % per_axis as u64) as i64 - half;
                        code /= per_axis as u64;
                        k as f64 * pitch
                    });
                    let p = PolicyParam::from_vector(&v, class.m, d_u, d_x).ok()?;
                    if p.l1_op_norm() > class.radius * (1.0 + 1e-12) {
                        return None;
                    }
                    let c = cost(&p);
                    Some((p, c))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| HarnessError::Validation("grid is empty".into()))?;
            Ok(best)
        }
        ComparatorMethod::ProjectedDescent { restarts, iterations, warm_starts } => {
            let Some(signal) = signal.as_deref() else {
                return Err(HarnessError::Validation("projected descent needs a convex class (drc or dac); feedback uses the grid".into()));
            };
            let mut rng = stream(seed, StreamId::Restarts);
            let starts: Vec<PolicyParam> = std::iter::once(Ok(PolicyParam::zeros(class.m, d_u, d_x)))
                .chain((1..(*restarts).max(1)).map(|_| random_in_ball(&mut rng, class.m, d_u, d_x, class.radius)))
                .chain(warm_starts.iter().map(|doc| warm_start(doc, class, d_u, d_x)))
                .collect::<Result<_>>()?;
            let results: Vec<Result<(PolicyParam, f64)>> = starts
                .into_par_iter()
                .map(|start| descend(inst, class, signal, interval, start, *iterations))
                .collect();
            let mut out: Option<(PolicyParam, f64)> = None;
            for r in results {
                let r = r?;
                if out.as_ref().map_or(true, |o| r.1 < o.1) {
                    out = Some(r);
                }
            }
            Ok(out.expect("at least one restart"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub interval: Interval,
    pub algorithm_cost: f64,
    pub comparator_cost: f64,
    pub regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub grid: String,
    pub method: String,
    pub records: Vec<RegretRecord>,
}

impl RegretReport {
    pub fn max_regret(&self) -> f64 {
        self.records.iter().map(|r| r.regret).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn record(&self, interval: &Interval) -> Option<&RegretRecord> {
        self.records.iter().find(|r| r.interval == *interval)
    }
}

/// `Regret_I = Σ_{t∈I} c_t(x_t, u_t) − inf_{π} Σ_{t∈I} c_t(x_t^π, u_t^π)`
/// for every interval of the grid.
pub fn adaptive_regret(trace: &Trace, inst: &LtvInstance, class: &ClassSpec, grid: &IntervalGrid, method: &ComparatorMethod, seed: u64) -> Result<RegretReport> {
    if trace.horizon() != inst.horizon() {
        return Err(HarnessError::Validation(format!("trace covers {} steps, instance {}", trace.horizon(), inst.horizon())));
    }
    let intervals = grid_intervals(grid, inst)?;
    let records = intervals
        .par_iter()
        .map(|i| {
            let (_, comparator_cost) = best_in_class(inst, class, i, method, seed)?;
            let algorithm_cost = trace.interval_cost(i);
            Ok(RegretRecord { interval: *i, algorithm_cost, comparator_cost, regret: algorithm_cost - comparator_cost })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegretReport { grid: grid.tag().into(), method: method.tag().into(), records })
}
