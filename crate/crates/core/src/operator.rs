//! Transition products, Nature's state, Markov operators and the decay bound.

use crate::error::{LtvError, Result};
use crate::instance::LtvInstance;
use crate::linalg::{op_norm, Matrix, Vector};
use crate::sim::{simulate, zero_input};

/// `A_t A_{t-1} ... A_{t-h+1}` (the identity for `h = 0`).
pub fn phi(inst: &LtvInstance, t: usize, h: usize) -> Result<Matrix> {
    check_step(inst, t)?;
    if h > t {
        return Err(LtvError::InsufficientHistory { t, requested: h });
    }
    let mut p = Matrix::identity(inst.state_dim(), inst.state_dim());
    for k in 0..h {
        p *= inst.a(t - k);
    }
    Ok(p)
}

fn check_step(inst: &LtvInstance, t: usize) -> Result<()> {
    if t == 0 || t > inst.horizon() {
        return Err(LtvError::OutOfHorizon { t, horizon: inst.horizon() });
    }
    Ok(())
}

/// Nature's states `x^nat_1..x^nat_{T+1}`: the trajectory under zero input.
pub fn nature_x(inst: &LtvInstance) -> Vec<Vector> {
    let mut out = Vec::with_capacity(inst.horizon() + 1);
    let mut x = inst.initial_state().clone();
    out.push(x.clone());
    for t in 1..=inst.horizon() {
        x = inst.a(t) * &x + inst.w(t);
        out.push(x.clone());
    }
    out
}

/// Nature's states through the closed form
/// `x^nat_{t+1} = Σ_{i<t} Φ_t^{[i]} w_{t-i} + Φ_t^{[t]} x_1`.
///
/// Quadratic in `T`; intended for cross-checks.
pub fn nature_x_closed_form(inst: &LtvInstance) -> Vec<Vector> {
    let d = inst.state_dim();
    let mut out = vec![inst.initial_state().clone()];
    for t in 1..=inst.horizon() {
        let mut acc = Vector::zeros(d);
        let mut p = Matrix::identity(d, d);
        for i in 0..t {
            acc += &p * inst.w(t - i);
            p *= inst.a(t - i);
        }
        acc += p * inst.initial_state();
        out.push(acc);
    }
    out
}

/// Zero-input simulation, used as a second route to Nature's states.
pub fn nature_x_by_simulation(inst: &LtvInstance) -> Result<Vec<Vector>> {
    Ok(simulate(inst, zero_input(inst))?.states)
}

/// A truncated impulse response: `blocks[i]` maps `u_{t-i}` into `x_{t+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovOperator {
    blocks: Vec<Matrix>,
}

impl MarkovOperator {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| LtvError::InvalidParameter("operator needs at least one block".into()))?;
        let shape = first.shape();
        if let Some((i, b)) = blocks.iter().enumerate().find(|(_, b)| b.shape() != shape) {
            return Err(LtvError::Dimension {
                t: i,
                what: "operator block",
                expected: format!("{}x{}", shape.0, shape.1),
                found: format!("{}x{}", b.nrows(), b.ncols()),
            });
        }
        Ok(MarkovOperator { blocks })
    }

    pub fn zeros(h: usize, d_x: usize, d_u: usize) -> Self {
        MarkovOperator { blocks: vec![Matrix::zeros(d_x, d_u); h.max(1)] }
    }

    pub fn h(&self) -> usize {
        self.blocks.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.blocks[0].shape()
    }

    pub fn block(&self, i: usize) -> &Matrix {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    /// `Σ_i ‖G^{[i]}‖_op`.
    pub fn l1_op_norm(&self) -> f64 {
        self.blocks.iter().map(op_norm).sum()
    }

    /// `Σ_i ‖G^{[i]}‖_F²`, the squared fully vectorized Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    pub fn contained_in(&self, radius: f64) -> bool {
        self.l1_op_norm() <= radius
    }

    /// Radial scaling onto `{‖G‖_{ℓ1,op} ≤ radius}`.
    pub fn clipped(&self, radius: f64) -> Self {
        let n = self.l1_op_norm();
        if n <= radius * (1.0 + 1e-12) || n == 0.0 {
            self.clone()
        } else {
            self.scaled(radius / n)
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        MarkovOperator { blocks: self.blocks.iter().map(|b| b * s).collect() }
    }

    /// Blockwise `self + s·other`. Panics on shape mismatch.
    pub fn add_scaled(&self, other: &MarkovOperator, s: f64) -> Self {
        assert_eq!(self.h(), other.h(), "operator length mismatch");
        MarkovOperator { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b * s).collect() }
    }

    /// `Σ_i G^{[i]} u_{t-i}` where `inputs(i)` supplies `u_{t-i}` (or `None` for zero).
    pub fn apply<'a, F>(&self, mut inputs: F) -> Vector
    where
        F: FnMut(usize) -> Option<&'a Vector>,
    {
        let mut acc = Vector::zeros(self.shape().0);
        for (i, g) in self.blocks.iter().enumerate() {
            if let Some(u) = inputs(i) {
                acc += g * u;
            }
        }
        acc
    }

    /// Column-stacked flattening of all blocks.
    pub fn to_vector(&self) -> Vector {
        let len: usize = self.blocks.iter().map(|b| b.len()).sum();
        Vector::from_iterator(len, self.blocks.iter().flat_map(|b| b.iter().cloned()))
    }

    pub fn from_vector(v: &Vector, h: usize, d_x: usize, d_u: usize) -> Result<Self> {
        if v.len() != h * d_x * d_u || h == 0 {
            return Err(LtvError::InvalidParameter(format!("vector of length {} cannot hold {h} blocks of {d_x}x{d_u}", v.len())));
        }
        let per = d_x * d_u;
        let blocks = (0..h).map(|i| Matrix::from_column_slice(d_x, d_u, &v.as_slice()[i * per..(i + 1) * per])).collect();
        Ok(MarkovOperator { blocks })
    }
}

/// `G_t` truncated to `h` blocks: block `i` is `Φ_t^{[i]} B_{t-i}`.
pub fn markov_operator(inst: &LtvInstance, t: usize, h: usize) -> Result<MarkovOperator> {
    check_step(inst, t)?;
    if h == 0 {
        return Err(LtvError::InvalidParameter("truncation h must be at least 1".into()));
    }
    if h > t {
        return Err(LtvError::InsufficientHistory { t, requested: h });
    }
    markov_operator_padded(inst, t, h)
}

/// Like [`markov_operator`] but blocks reaching before step 1 are zero.
pub fn markov_operator_padded(inst: &LtvInstance, t: usize, h: usize) -> Result<MarkovOperator> {
    check_step(inst, t)?;
    let (d_x, d_u) = (inst.state_dim(), inst.input_dim());
    let mut blocks = Vec::with_capacity(h.max(1));
    let mut p = Matrix::identity(d_x, d_x);
    for i in 0..h.max(1) {
        if i < t {
            blocks.push(&p * inst.b(t - i));
            p *= inst.a(t - i);
        } else {
            blocks.push(Matrix::zeros(d_x, d_u));
        }
    }
    Ok(MarkovOperator { blocks })
}

/// `G_1..G_T`, each truncated to `h` blocks and zero-padded at the start.
pub fn markov_operators(inst: &LtvInstance, h: usize) -> Vec<MarkovOperator> {
    (1..=inst.horizon()).map(|t| markov_operator_padded(inst, t, h).expect("step in range")).collect()
}

/// The geometric tail bound `R_G·ρ^h`.
pub fn psi(h: usize, r_g: f64, rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(LtvError::InvalidParameter(format!("decay rate {rho} outside [0, 1)")));
    }
    if h == 0 {
        return Ok(r_g);
    }
    Ok(r_g * rho.powi(h.min(i32::MAX as usize) as i32))
}
