//! Experiment configuration: which instance, which learner, which seeds,
//! and how regret is scored. Everything here round-trips through JSON.

use std::path::PathBuf;

use ltv_core::cost::QuadraticCost;
use ltv_core::json::instance_from_str;
use ltv_core::linalg::op_norm;
use ltv_core::rng::{stream, StreamId};
use ltv_core::{CostFn, LtvInstance, Matrix, PenaltyShape, PolicyKind, PolicyParam, Vector};
use ltv_instances::dsigma::DEFAULT_ALPHA;
use ltv_instances::{compile_max3sat, gen_dsigma, gen_kswitch_lqr, gen_separation, gen_unstable_scalar, parse_dimacs, DsigmaParams, SeparationKind};
use ltv_learn::bandit::GainRegion;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::regret::{ClassSpec, ComparatorMethod, IntervalGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Absent only for `ada-pred`, which draws its own targets.
    #[serde(default)]
    pub instance: Option<InstanceSpec>,
    pub algorithm: AlgorithmSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub intervals: IntervalGrid,
    #[serde(default)]
    pub comparator: Option<ComparatorSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparatorSpec {
    pub kind: PolicyKind,
    pub m: usize,
    pub radius: f64,
    /// Defaults to projected descent for DRC and DAC and to the grid for
    /// feedback, whose cost is not convex in the gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<ComparatorMethod>,
}

impl ComparatorSpec {
    pub fn class(&self) -> ClassSpec {
        ClassSpec { kind: self.kind, m: self.m, radius: self.radius }
    }

    pub fn resolved_method(&self) -> ComparatorMethod {
        match (&self.method, self.kind) {
            (Some(m), _) => m.clone(),
            (None, PolicyKind::Feedback) => ComparatorMethod::Grid { pitch: ComparatorMethod::DEFAULT_PITCH },
            (None, _) => ComparatorMethod::default(),
        }
    }
}

/// An instance file or a named generator with its parameters. Randomized
/// generators draw from the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "generator", deny_unknown_fields)]
pub enum InstanceSpec {
    File {
        path: PathBuf,
    },
    Separation {
        which: SeparationKind,
        horizon: usize,
    },
    Dsigma {
        sigma: f64,
        f: PenaltyShape,
        #[serde(default = "default_alpha")]
        alpha: f64,
        horizon: usize,
    },
    Unstable {
        rho: f64,
        horizon: usize,
    },
    Kswitch {
        k: usize,
        horizon: usize,
        d_x: usize,
        d_u: usize,
    },
    Sat {
        dimacs: PathBuf,
        #[serde(default = "default_sat_scale")]
        scale: f64,
    },
    /// `x_{t+1} = a·x_t + b·u_t + w` with cost `q·x² + r·u²`.
    ScalarLti {
        a: f64,
        b: f64,
        w: f64,
        #[serde(default = "one")]
        q: f64,
        #[serde(default = "one")]
        r: f64,
        horizon: usize,
    },
    /// Independent draws per step: `A_t` rescaled to operator norm `rho`,
    /// `B_t` and `w_t` with uniform entries, identity quadratic cost.
    Random {
        d_x: usize,
        d_u: usize,
        horizon: usize,
        #[serde(default = "default_random_rho")]
        rho: f64,
    },
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_sat_scale() -> f64 {
    ltv_instances::sat::DEFAULT_SAT_SCALE
}

fn default_random_rho() -> f64 {
    0.8
}

fn one() -> f64 {
    1.0
}

/// A built instance plus the generator's known good policy, if any.
#[derive(Clone, Debug)]
pub struct BuiltInstance {
    pub instance: LtvInstance,
    pub reference: Option<(PolicyKind, PolicyParam)>,
}

impl InstanceSpec {
    pub fn build(&self, seed: u64) -> Result<BuiltInstance> {
        let plain = |instance| Ok(BuiltInstance { instance, reference: None });
        match self {
            InstanceSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                plain(instance_from_str(&text)?)
            }
            InstanceSpec::Separation { which, horizon } => {
                let s = gen_separation(*which, *horizon)?;
                Ok(BuiltInstance { instance: s.instance, reference: Some((s.witness_kind, s.witness)) })
            }
            InstanceSpec::Dsigma { sigma, f, alpha, horizon } => {
                let mut params = DsigmaParams::new(*sigma, *f, *horizon, seed);
                params.alpha = *alpha;
                let d = gen_dsigma(params)?;
                Ok(BuiltInstance { instance: d.instance, reference: Some((d.comparator_kind, d.comparator)) })
            }
            InstanceSpec::Unstable { rho, horizon } => {
                let u = gen_unstable_scalar(*rho, *horizon, seed)?;
                Ok(BuiltInstance { instance: u.instance, reference: Some((PolicyKind::Drc, u.drc)) })
            }
            InstanceSpec::Kswitch { k, horizon, d_x, d_u } => plain(gen_kswitch_lqr(*k, *horizon, *d_x, *d_u, seed)?),
            InstanceSpec::Sat { dimacs, scale } => {
                let text = std::fs::read_to_string(dimacs).map_err(|e| HarnessError::io(dimacs, e))?;
                plain(compile_max3sat(&parse_dimacs(&text)?, *scale)?)
            }
            InstanceSpec::ScalarLti { a, b, w, q, r, horizon } => plain(scalar_lti(*a, *b, *w, *q, *r, *horizon)?),
            InstanceSpec::Random { d_x, d_u, horizon, rho } => plain(random_ltv(*d_x, *d_u, *horizon, *rho, seed)?),
        }
    }
}

pub fn scalar_lti(a: f64, b: f64, w: f64, q: f64, r: f64, horizon: usize) -> Result<LtvInstance> {
    let cost = CostFn::quadratic(QuadraticCost { q: Matrix::from_element(1, 1, q), r: Matrix::from_element(1, 1, r), x_ref: None, u_ref: None });
    Ok(LtvInstance::new(
        vec![Matrix::from_element(1, 1, a); horizon],
        vec![Matrix::from_element(1, 1, b); horizon],
        vec![Vector::from_element(1, w); horizon],
        vec![cost; horizon],
    )?)
}

pub fn random_ltv(d_x: usize, d_u: usize, horizon: usize, rho: f64, seed: u64) -> Result<LtvInstance> {
    if d_x == 0 || d_u == 0 || horizon == 0 || !(0.0..1.0).contains(&rho) {
        return Err(HarnessError::Validation(format!("random instance needs positive sizes and ρ in [0, 1), got d_x={d_x}, d_u={d_u}, T={horizon}, ρ={rho}")));
    }
    let mut rng = stream(seed, StreamId::Instance);
    let mut a = Vec::with_capacity(horizon);
    let mut b = Vec::with_capacity(horizon);
    let mut w = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let m = Matrix::from_fn(d_x, d_x, |_, _| rng.random_range(-1.0..=1.0));
        let n = op_norm(&m);
        a.push(if n > 0.0 { m * (rho / n) } else { m });
        b.push(Matrix::from_fn(d_x, d_u, |_, _| rng.random_range(-1.0..=1.0)));
        w.push(Vector::from_fn(d_x, |_, _| rng.random_range(-1.0..=1.0)) / (d_x as f64).sqrt());
    }
    let cost = CostFn::quadratic(QuadraticCost::identity(d_x, d_u));
    Ok(LtvInstance::new(a, b, w, vec![cost; horizon])?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name", deny_unknown_fields)]
pub enum AlgorithmSpec {
    DrcOgd {
        m: usize,
        h: usize,
        radius: f64,
        /// Defaults to the theoretical step size with `R_G` and `R_nat`
        /// measured on the instance.
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default = "one")]
        lipschitz: f64,
    },
    AdaCtrl {
        m: usize,
        r_m: f64,
        r_g: f64,
        r_nat: f64,
        #[serde(default = "one")]
        lipschitz: f64,
        /// Decay rate used for the default truncation `h`.
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default)]
        h: Option<usize>,
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        estimator: EstimatorChoice,
    },
    AdaPred {
        horizon: usize,
        p: f64,
        #[serde(default = "one")]
        lambda: f64,
        /// Half-width of the uniform oracle noise per coordinate.
        #[serde(default)]
        noise: f64,
        targets: TargetSpec,
    },
    Exp3 {
        window: usize,
        r_k: f64,
        epsilon: f64,
        #[serde(default)]
        eta: Option<f64>,
        /// Per-window loss range; defaults to the worst-case bound from the
        /// stability constants below.
        #[serde(default)]
        loss_scale: Option<f64>,
        #[serde(default = "one")]
        lipschitz: f64,
        #[serde(default = "one")]
        c_star: f64,
        #[serde(default = "default_rho")]
        rho_star: f64,
        #[serde(default = "one")]
        r_w: f64,
        #[serde(default)]
        ball: bool,
        /// Row-major entry mask of the gain; `false` pins an entry to zero.
        #[serde(default)]
        free: Option<Vec<bool>>,
    },
}

fn default_rho() -> f64 {
    0.5
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::DrcOgd { .. } => "drc-ogd",
            AlgorithmSpec::AdaCtrl { .. } => "ada-ctrl",
            AlgorithmSpec::AdaPred { .. } => "ada-pred",
            AlgorithmSpec::Exp3 { .. } => "exp3",
        }
    }

    pub fn needs_instance(&self) -> bool {
        !matches!(self, AlgorithmSpec::AdaPred { .. })
    }

    pub fn gain_region(&self) -> GainRegion {
        match self {
            AlgorithmSpec::Exp3 { ball: true, .. } => GainRegion::Ball,
            _ => GainRegion::Box,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    #[default]
    AdaPred,
    /// The true truncated operator; a known-system baseline.
    Oracle,
}

/// Target sequences for the prediction experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum TargetSpec {
    /// `pieces` equal-length segments, each a uniform point of the ball of
    /// radius `radius` in dimension `dim`.
    PiecewiseConstant { pieces: usize, dim: usize, radius: f64 },
    /// Blocks of length `round(T^{γ/2})`, each an independent ±1.
    Rademacher { gamma: f64 },
}

impl TargetSpec {
    pub fn radius(&self) -> f64 {
        match self {
            TargetSpec::PiecewiseConstant { radius, .. } => *radius,
            TargetSpec::Rademacher { .. } => 1.0,
        }
    }

    pub fn draw(&self, horizon: usize, seed: u64) -> Result<Vec<Vector>> {
        match self {
            TargetSpec::PiecewiseConstant { pieces, dim, radius } => {
                if *pieces == 0 || *dim == 0 || !(*radius > 0.0) || *pieces > horizon {
                    return Err(HarnessError::Validation(format!("piecewise targets need 1 ≤ pieces ≤ T, dim ≥ 1 and a positive radius (pieces={pieces}, T={horizon})")));
                }
                let mut rng = stream(seed, StreamId::Instance);
                let mut out = Vec::with_capacity(horizon);
                for j in 0..*pieces {
                    let len = (j + 1) * horizon / pieces - j * horizon / pieces;
                    let z = loop {
                        let v = Vector::from_fn(*dim, |_, _| rng.random_range(-1.0..=1.0));
                        if v.norm() <= 1.0 {
                            break v * *radius;
                        }
                    };
                    out.extend(std::iter::repeat_n(z, len));
                }
                Ok(out)
            }
            TargetSpec::Rademacher { gamma } => Ok(ltv_learn::RademacherBlocks::generate(*gamma, horizon, seed)?.targets()),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Validation("at least one seed is required".into()));
        }
        if self.algorithm.needs_instance() && self.instance.is_none() {
            return Err(HarnessError::Validation(format!("{} needs an instance", self.algorithm.name())));
        }
        let zero = match &self.algorithm {
            AlgorithmSpec::DrcOgd { m, h, .. } => (*m == 0 || *h == 0).then_some("m and h"),
            AlgorithmSpec::AdaCtrl { m, h, .. } => (*m == 0 || *h == Some(0)).then_some("m and h"),
            AlgorithmSpec::AdaPred { horizon, .. } => (*horizon == 0).then_some("horizon"),
            AlgorithmSpec::Exp3 { window, .. } => (*window == 0).then_some("window"),
        };
        if let Some(what) = zero {
            return Err(HarnessError::Validation(format!("{}: {what} must be at least 1", self.algorithm.name())));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| HarnessError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Recursively overlays `top` onto `base`: objects merge key by key, every
/// other value in `top` replaces the one in `base`.
pub fn merge_json(base: &mut serde_json::Value, top: serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, t) => *slot = t,
    }
}

/// Sets `value` at a dotted `path`, creating objects along the way.
pub fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Validation(format!("bad config path '{path}'")));
    }
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            *cur = serde_json::Value::Object(Default::default());
        }
        let obj = cur.as_object_mut().expect("just made an object");
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert(serde_json::Value::Object(Default::default()));
    }
    Ok(())
}
