//! Prediction under a noisy, costly oracle: the base SGD estimator, the
//! geometric working sets, and the expert-pool estimator built from them.

use ltv_core::linalg::{all_finite, clip_norm};
use ltv_core::rng::{rademacher, stream, StreamId, StreamRng};
use ltv_core::{Interval, LtvError, MarkovOperator, Vector};
use rand::Rng;

use crate::error::{LearnError, Result};

/// Birth indices alive at step `t`, ascending.
///
/// Index `i = r·2^k` with `r` odd lives on `[i, i + 2^{k+2} + 1]`.
pub fn working_set(t: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if t == 0 {
        return out;
    }
    let mut k = 0u32;
    while (1usize << k) <= t {
        let step = 1usize << k;
        let life = (1usize << (k + 2)) + 1;
        let lo = t.saturating_sub(life).max(1);
        // Smallest odd multiple of 2^k that is at least `lo`.
        let mut r = lo.div_ceil(step);
        if r % 2 == 0 {
            r += 1;
        }
        while r * step <= t {
            out.push(r * step);
            r += 2;
        }
        k += 1;
    }
    out.sort_unstable();
    out
}

/// First failure found by [`working_set_audit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkingSetViolation {
    pub t: usize,
    pub property: &'static str,
}

/// Scans `t = 1..=up_to` for the four working-set properties: the size bound
/// `|S_t| ≤ 3(⌊log₂ t⌋ + 1)`, every `[s, ⌊(s+t)/2⌋]` with `s ≤ t` meeting
/// `S_t`, `S_{t+1} \ S_t = {t+1}`, and at most one removal per step.
/// Returns the largest set size seen.
pub fn working_set_audit(up_to: usize) -> std::result::Result<usize, WorkingSetViolation> {
    let mut prev: Vec<usize> = Vec::new();
    let mut largest = 0;
    for t in 1..=up_to {
        let s = working_set(t);
        let fail = |property| Err(WorkingSetViolation { t, property });
        largest = largest.max(s.len());
        if s.len() > 3 * (t.ilog2() as usize + 1) {
            return fail("size");
        }
        // The smallest member at or after `s` is tightest at `s = a_{j-1} + 1`.
        let mut prior = 0;
        for &a in &s {
            if 2 * a > prior + 1 + t {
                return fail("interval hitting");
            }
            prior = a;
        }
        if prior != t {
            return fail("interval hitting");
        }
        if t > 1 {
            let mut added = s.iter().filter(|i| prev.binary_search(i).is_err());
            if added.next() != Some(&t) || added.next().is_some() {
                return fail("single addition");
            }
            if prev.iter().filter(|i| s.binary_search(i).is_err()).count() > 1 {
                return fail("single removal");
            }
        }
        prev = s;
    }
    Ok(largest)
}

/// Lifetime end of birth index `i` (the last step it belongs to).
pub fn lifetime_end(i: usize) -> usize {
    let k = i.trailing_zeros();
    i + (1usize << (k + 2)) + 1
}

/// Decision set for the estimators, with its exact Euclidean projection.
#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// Centered Euclidean ball.
    Ball { radius: f64 },
    /// Flattened Markov operators with `‖G‖_{ℓ1,op} ≤ radius`, projected by
    /// radial clipping.
    Operator { radius: f64, h: usize, d_x: usize, d_u: usize },
}

impl Projection {
    pub fn apply(&self, z: &Vector) -> Vector {
        match *self {
            Projection::Ball { radius } => clip_norm(z, radius),
            Projection::Operator { radius, h, d_x, d_u } => {
                let g = MarkovOperator::from_vector(z, h, d_x, d_u).expect("flattened operator has the configured shape");
                g.clipped(radius).to_vector()
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match *self {
            Projection::Ball { .. } => None,
            Projection::Operator { h, d_x, d_u, .. } => Some(h * d_x * d_u),
        }
    }
}

/// `ℓ̃_t(z) = ‖z − z̃_t‖² / (2p)`.
pub fn surrogate_loss(z: &Vector, estimate: &Vector, p: f64) -> f64 {
    (z - estimate).norm_squared() / (2.0 * p)
}

/// `∇̃_t = (z − z̃_t) / p`.
pub fn surrogate_grad(z: &Vector, estimate: &Vector, p: f64) -> Vector {
    (z - estimate) / p
}

/// Projected SGD on the surrogate loss with step size `1/s` at its `s`-th step.
#[derive(Clone, Debug)]
pub struct BaseEstimator {
    iterate: Vector,
    p: f64,
    steps: usize,
    projection: Projection,
}

impl BaseEstimator {
    pub fn new(start: Vector, p: f64, projection: Projection) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(LearnError::Config(format!("query probability must lie in (0, 1], got {p}")));
        }
        if let Some(d) = projection.dim() {
            if d != start.len() {
                return Err(LearnError::Config(format!("initial point has length {} but the decision set expects {d}", start.len())));
            }
        }
        let iterate = projection.apply(&start);
        Ok(BaseEstimator { iterate, p, steps: 0, projection })
    }

    pub fn iterate(&self) -> &Vector {
        &self.iterate
    }

    /// Plays the current iterate, then updates it if the step was queried.
    pub fn step(&mut self, queried: bool, estimate: Option<&Vector>) -> Result<Vector> {
        self.steps += 1;
        let played = self.iterate.clone();
        if queried {
            let z = estimate.ok_or(LearnError::MissingEstimate { t: self.steps })?;
            check_estimate(z, played.len(), self.steps)?;
            let eta = 1.0 / self.steps as f64;
            let next = &self.iterate - surrogate_grad(&self.iterate, z, self.p) * eta;
            self.iterate = self.projection.apply(&next);
        }
        Ok(played)
    }
}

fn check_estimate(z: &Vector, dim: usize, t: usize) -> Result<()> {
    if z.len() != dim {
        return Err(LtvError::Dimension { t, what: "oracle estimate", expected: format!("{dim}"), found: format!("{}", z.len()) }.into());
    }
    if !all_finite(z.iter()) {
        return Err(LearnError::NonFinite { t, what: "oracle estimate" });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaPredConfig {
    pub p: f64,
    /// Bound on the targets, `R_z`.
    pub r_z: f64,
    /// Bound on the oracle's estimates, `R̃_z`.
    pub r_est: f64,
    pub projection: Projection,
    pub start: Vector,
}

impl AdaPredConfig {
    pub fn alpha(&self) -> f64 {
        self.p / (self.r_z + self.r_est).powi(2)
    }
}

#[derive(Clone, Debug)]
struct Expert {
    birth: usize,
    log_weight: f64,
    base: BaseEstimator,
}

/// Weighted pool of base estimators with staggered birth times.
#[derive(Clone, Debug)]
pub struct AdaPred {
    cfg: AdaPredConfig,
    alpha: f64,
    t: usize,
    experts: Vec<Expert>,
}

impl AdaPred {
    pub fn new(cfg: AdaPredConfig) -> Result<Self> {
        if !(cfg.r_z > 0.0 && cfg.r_est > 0.0) {
            return Err(LearnError::Config("target and estimate bounds must be positive".into()));
        }
        let first = BaseEstimator::new(cfg.start.clone(), cfg.p, cfg.projection.clone())?;
        let alpha = cfg.alpha();
        Ok(AdaPred { alpha, t: 1, experts: vec![Expert { birth: 1, log_weight: 0.0, base: first }], cfg })
    }

    pub fn config(&self) -> &AdaPredConfig {
        &self.cfg
    }

    /// The step about to be played.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn births(&self) -> Vec<usize> {
        self.experts.iter().map(|e| e.birth).collect()
    }

    /// Normalized weights `(birth, q)`, in birth order.
    pub fn weights(&self) -> Vec<(usize, f64)> {
        let lse = log_sum_exp(self.experts.iter().map(|e| e.log_weight));
        self.experts.iter().map(|e| (e.birth, (e.log_weight - lse).exp())).collect()
    }

    /// `Σ q^{(i)} ẑ^{(i)}` for the current step.
    pub fn predict(&self) -> Vector {
        let mut z = Vector::zeros(self.cfg.start.len());
        for ((_, q), e) in self.weights().into_iter().zip(&self.experts) {
            z += e.base.iterate() * q;
        }
        z
    }

    /// Plays `ẑ_t`, then absorbs the step's feedback.
    pub fn step(&mut self, queried: bool, estimate: Option<&Vector>) -> Result<Vector> {
        let t = self.t;
        let played = self.predict();
        if queried {
            let z = estimate.ok_or(LearnError::MissingEstimate { t })?;
            check_estimate(z, played.len(), t)?;
            for e in &mut self.experts {
                e.log_weight -= self.alpha * surrogate_loss(e.base.iterate(), z, self.cfg.p);
            }
        }
        let discount = (t as f64 / (t + 1) as f64).ln();
        let lse = log_sum_exp(self.experts.iter().map(|e| e.log_weight));
        for e in &mut self.experts {
            e.log_weight += discount - lse;
            e.base.step(queried, estimate)?;
        }
        self.experts.push(Expert {
            birth: t + 1,
            log_weight: -((t + 1) as f64).ln(),
            base: BaseEstimator::new(self.cfg.start.clone(), self.cfg.p, self.cfg.projection.clone())?,
        });
        let keep = working_set(t + 1);
        self.experts.retain(|e| keep.binary_search(&e.birth).is_ok());
        let lse = log_sum_exp(self.experts.iter().map(|e| e.log_weight));
        if !lse.is_finite() {
            return Err(LearnError::NonFinite { t, what: "expert weights" });
        }
        for e in &mut self.experts {
            e.log_weight -= lse;
        }
        self.t += 1;
        Ok(played)
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + it.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Feedback channel returning unbiased, bounded estimates of the hidden target.
pub trait CostlyOracle {
    fn dim(&self) -> usize;
    /// Upper bound on the norm of every returned estimate.
    fn estimate_bound(&self) -> f64;
    fn query(&mut self, t: usize) -> Vector;
}

/// Target plus independent uniform noise on `[-a, a]` per coordinate.
#[derive(Clone, Debug)]
pub struct NoisyOracle {
    targets: Vec<Vector>,
    amplitude: f64,
    rng: StreamRng,
}

impl NoisyOracle {
    pub fn new(targets: Vec<Vector>, amplitude: f64, seed: u64) -> Self {
        NoisyOracle { targets, amplitude, rng: stream(seed, StreamId::Oracle) }
    }

    pub fn exact(targets: Vec<Vector>) -> Self {
        NoisyOracle::new(targets, 0.0, 0)
    }

    pub fn targets(&self) -> &[Vector] {
        &self.targets
    }
}

impl CostlyOracle for NoisyOracle {
    fn dim(&self) -> usize {
        self.targets.first().map_or(0, |z| z.len())
    }

    fn estimate_bound(&self) -> f64 {
        let r = self.targets.iter().map(|z| z.norm()).fold(0.0, f64::max);
        r + self.amplitude * (self.dim() as f64).sqrt()
    }

    fn query(&mut self, t: usize) -> Vector {
        let a = self.amplitude;
        let noise = Vector::from_fn(self.dim(), |_, _| if a > 0.0 { self.rng.random_range(-a..=a) } else { 0.0 });
        &self.targets[t - 1] + noise
    }
}

/// One run of the pool estimator against an oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRun {
    pub predictions: Vec<Vector>,
    pub queries: Vec<bool>,
}

impl PredictionRun {
    pub fn query_count(&self) -> usize {
        self.queries.iter().filter(|b| **b).count()
    }
}

/// Runs the pool estimator for `horizon` steps with query coins drawn from
/// the `Coins` stream of `seed`.
pub fn ada_pred_run<O: CostlyOracle>(oracle: &mut O, cfg: AdaPredConfig, horizon: usize, seed: u64) -> Result<PredictionRun> {
    let mut coins = stream(seed, StreamId::Coins);
    let p = cfg.p;
    let mut pool = AdaPred::new(cfg)?;
    let mut run = PredictionRun { predictions: Vec::with_capacity(horizon), queries: Vec::with_capacity(horizon) };
    for t in 1..=horizon {
        let b = coins.random::<f64>() < p;
        let est = if b { Some(oracle.query(t)) } else { None };
        run.predictions.push(pool.step(b, est.as_ref())?);
        run.queries.push(b);
    }
    Ok(run)
}

/// Interval estimation regret
/// `Σ_{t∈I} ‖ẑ_t − z*_t‖² − min_z Σ_{t∈I} ‖z − z*_t‖² + λ Σ_{t∈I} b_t`, answered
/// in constant time per interval from prefix sums.
#[derive(Clone, Debug)]
pub struct EstimationAudit {
    loss: Vec<f64>,
    target_sq: Vec<f64>,
    target_sum: Vec<Vector>,
    queries: Vec<usize>,
    lambda: f64,
}

impl EstimationAudit {
    pub fn new(run: &PredictionRun, targets: &[Vector], lambda: f64) -> Result<Self> {
        if targets.len() < run.predictions.len() {
            return Err(LtvError::OutOfHorizon { t: run.predictions.len(), horizon: targets.len() }.into());
        }
        let n = run.predictions.len();
        let dim = targets.first().map_or(0, |z| z.len());
        let mut audit = EstimationAudit {
            loss: vec![0.0; n + 1],
            target_sq: vec![0.0; n + 1],
            target_sum: vec![Vector::zeros(dim); n + 1],
            queries: vec![0; n + 1],
            lambda,
        };
        for k in 0..n {
            let z = &targets[k];
            audit.loss[k + 1] = audit.loss[k] + (&run.predictions[k] - z).norm_squared();
            audit.target_sq[k + 1] = audit.target_sq[k] + z.norm_squared();
            audit.target_sum[k + 1] = &audit.target_sum[k] + z;
            audit.queries[k + 1] = audit.queries[k] + run.queries[k] as usize;
        }
        Ok(audit)
    }

    pub fn horizon(&self) -> usize {
        self.loss.len() - 1
    }

    pub fn regret(&self, i: &Interval) -> Result<f64> {
        let (learner, best) = self.parts(i)?;
        Ok(learner - best)
    }

    /// The learner's loss plus query charges on `i`, and the best fixed
    /// prediction's loss (at the interval mean of the targets).
    pub fn parts(&self, i: &Interval) -> Result<(f64, f64)> {
        if i.start == 0 || i.end < i.start {
            return Err(LtvError::EmptyInterval.into());
        }
        if i.end > self.horizon() {
            return Err(LtvError::OutOfHorizon { t: i.end, horizon: self.horizon() }.into());
        }
        let (a, b) = (i.start - 1, i.end);
        let len = i.len() as f64;
        let learner = self.loss[b] - self.loss[a];
        let sum = &self.target_sum[b] - &self.target_sum[a];
        let best = (self.target_sq[b] - self.target_sq[a] - sum.norm_squared() / len).max(0.0);
        let queries = (self.queries[b] - self.queries[a]) as f64;
        Ok((learner + self.lambda * queries, best))
    }
}

/// `2(R_z+R̃_z)²(1 + ln s · ln|I|)/p + λp|I|` for `I = [r, s]`.
pub fn ada_pred_interval_bound(r_z: f64, r_est: f64, p: f64, lambda: f64, interval: &Interval) -> f64 {
    let s = interval.end as f64;
    let len = interval.len() as f64;
    2.0 * (r_z + r_est).powi(2) * (1.0 + s.ln() * len.ln()) / p + lambda * p * len
}

/// Blockwise Rademacher targets: `k = ⌈T / len⌉` blocks of length
/// `len = round(T^{γ/2})`, each holding an independent sign.
#[derive(Clone, Debug, PartialEq)]
pub struct RademacherBlocks {
    pub blocks: Vec<Interval>,
    pub signs: Vec<f64>,
}

/// Per-block outcome of a run on [`RademacherBlocks`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlockAudit {
    pub block: Interval,
    pub queries: usize,
    /// `Σ (ẑ_t − q)²` against the drawn sign.
    pub loss: f64,
    /// `Σ (ẑ_t² + 1)`: the loss averaged over the block's sign.
    pub sign_averaged_loss: f64,
}

impl RademacherBlocks {
    pub fn generate(gamma: f64, horizon: usize, seed: u64) -> Result<Self> {
        if !(gamma > 0.0) || horizon == 0 {
            return Err(LearnError::Config("need γ > 0 and a positive horizon".into()));
        }
        let len = ((horizon as f64).powf(gamma / 2.0).round() as usize).clamp(1, horizon);
        let mut rng = stream(seed, StreamId::Instance);
        let mut blocks = Vec::new();
        let mut signs = Vec::new();
        let mut start = 1;
        while start <= horizon {
            let end = (start + len - 1).min(horizon);
            blocks.push(Interval { start, end });
            signs.push(rademacher(&mut rng));
            start = end + 1;
        }
        Ok(RademacherBlocks { blocks, signs })
    }

    pub fn horizon(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn targets(&self) -> Vec<Vector> {
        let mut out = Vec::with_capacity(self.horizon());
        for (b, q) in self.blocks.iter().zip(&self.signs) {
            out.extend(std::iter::repeat_n(Vector::from_element(1, *q), b.len()));
        }
        out
    }

    pub fn audit(&self, run: &PredictionRun) -> Vec<BlockAudit> {
        self.blocks
            .iter()
            .zip(&self.signs)
            .map(|(b, q)| {
                let steps = b.start - 1..b.end;
                let preds = &run.predictions[steps.clone()];
                BlockAudit {
                    block: *b,
                    queries: run.queries[steps].iter().filter(|x| **x).count(),
                    loss: preds.iter().map(|z| (z[0] - q).powi(2)).sum(),
                    sign_averaged_loss: preds.iter().map(|z| z[0] * z[0] + 1.0).sum(),
                }
            })
            .collect()
    }
}
