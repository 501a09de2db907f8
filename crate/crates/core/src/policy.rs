//! Linear policies with finite memory and their fixed-parameter rollouts.

use std::fmt;

use crate::error::{dim_err, LtvError, Result};
use crate::instance::LtvInstance;
use crate::linalg::{op_norm, Matrix, Vector};
use crate::operator::nature_x;
use crate::sim::{simulate, Simulator, Trace};

/// Which signal a policy feeds through its blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Past Nature's states.
    Drc,
    /// Past disturbances.
    Dac,
    /// Past realized states; with one block this is static state feedback.
    Feedback,
}

impl PolicyKind {
    /// Classes whose rollout is affine in the parameters.
    pub fn is_convex(self) -> bool {
        !matches!(self, PolicyKind::Feedback)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Drc => "drc",
            PolicyKind::Dac => "dac",
            PolicyKind::Feedback => "feedback",
        })
    }
}

/// `m` gain blocks `M^{[0]}..M^{[m-1]}`, each `d_u × d_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParam {
    blocks: Vec<Matrix>,
}

impl PolicyParam {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| LtvError::InvalidParameter("policy needs memory m >= 1".into()))?;
        let shape = first.shape();
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != shape {
                return Err(LtvError::Dimension {
                    t: i,
                    what: "policy block",
                    expected: format!("{}x{}", shape.0, shape.1),
                    found: format!("{}x{}", b.nrows(), b.ncols()),
                });
            }
            if !b.iter().all(|x| x.is_finite()) {
                return Err(LtvError::NonFinite { t: i, what: "policy block" });
            }
        }
        Ok(PolicyParam { blocks })
    }

    pub fn zeros(m: usize, d_u: usize, d_x: usize) -> Self {
        PolicyParam { blocks: vec![Matrix::zeros(d_u, d_x); m.max(1)] }
    }

    /// Scalar-system policy with the given gains.
    pub fn scalar(gains: &[f64]) -> Result<Self> {
        PolicyParam::new(gains.iter().map(|g| Matrix::from_element(1, 1, *g)).collect())
    }

    pub fn memory(&self) -> usize {
        self.blocks.len()
    }

    /// `(d_u, d_x)`.
    pub fn shape(&self) -> (usize, usize) {
        self.blocks[0].shape()
    }

    pub fn block(&self, i: usize) -> &Matrix {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Matrix] {
        &mut self.blocks
    }

    /// `Σ_i ‖M^{[i]}‖_op`.
    pub fn l1_op_norm(&self) -> f64 {
        self.blocks.iter().map(op_norm).sum()
    }

    pub fn in_ball(&self, radius: f64) -> bool {
        self.l1_op_norm() <= radius
    }

    /// Radial scaling into the ball of the given radius.
    pub fn clip_to_ball(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LtvError::InvalidParameter(format!("ball radius must be positive, got {radius}")));
        }
        let n = self.l1_op_norm();
        // Tolerate the last-ulp excess left by a previous rescaling.
        if n <= radius * (1.0 + 1e-12) {
            return Ok(self.clone());
        }
        Ok(self.scaled(radius / n))
    }

    pub fn scaled(&self, s: f64) -> Self {
        PolicyParam { blocks: self.blocks.iter().map(|b| b * s).collect() }
    }

    /// `self + s·other`. Panics on shape mismatch.
    pub fn add_scaled(&self, other: &PolicyParam, s: f64) -> Self {
        assert_eq!(self.memory(), other.memory(), "policy memory mismatch");
        PolicyParam { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b * s).collect() }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    /// Column-stacked flattening of all blocks.
    pub fn to_vector(&self) -> Vector {
        let len: usize = self.blocks.iter().map(|b| b.len()).sum();
        Vector::from_iterator(len, self.blocks.iter().flat_map(|b| b.iter().cloned()))
    }

    pub fn from_vector(v: &Vector, m: usize, d_u: usize, d_x: usize) -> Result<Self> {
        if m == 0 || v.len() != m * d_u * d_x {
            return Err(LtvError::InvalidParameter(format!("vector of length {} cannot hold {m} blocks of {d_u}x{d_x}", v.len())));
        }
        let per = d_u * d_x;
        PolicyParam::new((0..m).map(|i| Matrix::from_column_slice(d_u, d_x, &v.as_slice()[i * per..(i + 1) * per])).collect())
    }

    /// `Σ_{i<m} M^{[i]} s_{t-i}` where `signal(k)` returns `s_k` for `k ≥ 1`.
    pub fn apply_with<'a, F>(&self, t: usize, mut signal: F) -> Vector
    where
        F: FnMut(usize) -> Option<&'a Vector>,
    {
        let mut u = Vector::zeros(self.shape().0);
        for (i, m) in self.blocks.iter().enumerate() {
            if i >= t {
                break;
            }
            if let Some(s) = signal(t - i) {
                u += m * s;
            }
        }
        u
    }
}

/// `u_t = Σ_{i<m} M^{[i]} signal_{t-i}` with `signal[k-1] = signal_k` and
/// indices below 1 reading as zero.
pub fn policy_action(kind: PolicyKind, params: &PolicyParam, signal: &[Vector], t: usize) -> Result<Vector> {
    if t == 0 {
        return Err(LtvError::OutOfHorizon { t, horizon: signal.len() });
    }
    if t > signal.len() {
        return Err(LtvError::InsufficientHistory { t, requested: t - signal.len() });
    }
    let d_x = params.shape().1;
    let what = match kind {
        PolicyKind::Drc => "Nature's state",
        PolicyKind::Dac => "disturbance",
        PolicyKind::Feedback => "state",
    };
    for i in 0..params.memory().min(t) {
        let s = &signal[t - i - 1];
        if s.len() != d_x {
            return Err(dim_err(t - i, what, (d_x, 1), (s.len(), 1)));
        }
    }
    Ok(params.apply_with(t, |k| signal.get(k - 1)))
}

/// The policy-independent driving signal of a convex class, indexed `1..=T`.
pub fn driving_signal(inst: &LtvInstance, kind: PolicyKind) -> Option<Vec<Vector>> {
    match kind {
        PolicyKind::Drc => {
            let mut nat = nature_x(inst);
            nat.pop();
            Some(nat)
        }
        PolicyKind::Dac => Some(inst.w_seq().to_vec()),
        PolicyKind::Feedback => None,
    }
}

fn check_policy_shape(inst: &LtvInstance, params: &PolicyParam) -> Result<()> {
    let expected = (inst.input_dim(), inst.state_dim());
    if params.shape() != expected {
        return Err(dim_err(0, "policy block", expected, params.shape()));
    }
    Ok(())
}

/// Plays the fixed policy from `t = 1` to `T`.
pub fn rollout_policy(inst: &LtvInstance, kind: PolicyKind, params: &PolicyParam) -> Result<Trace> {
    check_policy_shape(inst, params)?;
    match driving_signal(inst, kind) {
        Some(signal) => simulate(inst, |t, _| params.apply_with(t, |k| signal.get(k - 1))),
        None => {
            let mut sim = Simulator::new(inst);
            while !sim.done() {
                let t = sim.t();
                let h = sim.history();
                let u = params.apply_with(t, |k| h.x(k));
                sim.step(u)?;
            }
            Ok(sim.finish())
        }
    }
}
