//! The adversary's script `(A_t, B_t, w_t, c_t)` for `t = 1..=T`.

use crate::cost::CostFn;
use crate::error::{dim_err, LtvError, Result};
use crate::linalg::{all_finite, Matrix, Vector};

/// Inclusive 1-based step range `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start == 0 || end < start {
            return Err(LtvError::EmptyInterval);
        }
        Ok(Interval { start, end })
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn steps(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

/// A fully materialized linear time-varying instance.
///
/// Steps are 1-based in every accessor. The instance is immutable once
/// built; generators that need randomness take an explicit seed.
#[derive(Clone, Debug, PartialEq)]
pub struct LtvInstance {
    d_x: usize,
    d_u: usize,
    a: Vec<Matrix>,
    b: Vec<Matrix>,
    w: Vec<Vector>,
    costs: Vec<CostFn>,
    x1: Vector,
    segments: Vec<Interval>,
}

impl LtvInstance {
    /// Builds and validates an instance starting from `x_1 = 0`.
    pub fn new(a: Vec<Matrix>, b: Vec<Matrix>, w: Vec<Vector>, costs: Vec<CostFn>) -> Result<Self> {
        let horizon = a.len();
        if horizon == 0 {
            return Err(LtvError::InvalidParameter("horizon must be positive".into()));
        }
        let d_x = a[0].nrows();
        let d_u = b.first().map(|m| m.ncols()).unwrap_or(0);
        if d_x == 0 || d_u == 0 {
            return Err(LtvError::InvalidParameter("state and input dimensions must be positive".into()));
        }
        for (name, len) in [("B", b.len()), ("w", w.len()), ("cost", costs.len())] {
            if len != horizon {
                return Err(LtvError::Document(format!("{name} has {len} steps, A has {horizon}")));
            }
        }
        for t in 1..=horizon {
            let i = t - 1;
            if a[i].shape() != (d_x, d_x) {
                return Err(dim_err(t, "A_t", (d_x, d_x), a[i].shape()));
            }
            if b[i].shape() != (d_x, d_u) {
                return Err(dim_err(t, "B_t", (d_x, d_u), b[i].shape()));
            }
            if w[i].len() != d_x {
                return Err(dim_err(t, "w_t", (d_x, 1), (w[i].len(), 1)));
            }
            if !all_finite(a[i].iter()) || !all_finite(b[i].iter()) || !all_finite(w[i].iter()) {
                return Err(LtvError::NonFinite { t, what: "instance data" });
            }
            costs[i].check_dims(d_x, d_u).map_err(|e| LtvError::Document(format!("cost at t={t}: {e}")))?;
        }
        Ok(LtvInstance { d_x, d_u, a, b, w, costs, x1: Vector::zeros(d_x), segments: Vec::new() })
    }

    /// Replaces the initial state (defaults to zero).
    pub fn with_initial_state(mut self, x1: Vector) -> Result<Self> {
        if x1.len() != self.d_x {
            return Err(dim_err(1, "x_1", (self.d_x, 1), (x1.len(), 1)));
        }
        self.x1 = x1;
        Ok(self)
    }

    /// Attaches segment metadata (e.g. switching times) used by regret grids.
    pub fn with_segments(mut self, segments: Vec<Interval>) -> Result<Self> {
        if let Some(s) = segments.iter().find(|s| s.end > self.horizon()) {
            return Err(LtvError::OutOfHorizon { t: s.end, horizon: self.horizon() });
        }
        self.segments = segments;
        Ok(self)
    }

    /// Same dynamics with a new cost sequence.
    pub fn with_costs(&self, costs: Vec<CostFn>) -> Result<Self> {
        let inst = LtvInstance::new(self.a.clone(), self.b.clone(), self.w.clone(), costs)?;
        inst.with_initial_state(self.x1.clone())?.with_segments(self.segments.clone())
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.d_x
    }

    pub fn input_dim(&self) -> usize {
        self.d_u
    }

    fn idx(&self, t: usize) -> usize {
        assert!(t >= 1 && t <= self.horizon(), "step {t} outside 1..={}", self.horizon());
        t - 1
    }

    pub fn a(&self, t: usize) -> &Matrix {
        &self.a[self.idx(t)]
    }

    pub fn b(&self, t: usize) -> &Matrix {
        &self.b[self.idx(t)]
    }

    pub fn w(&self, t: usize) -> &Vector {
        &self.w[self.idx(t)]
    }

    pub fn cost(&self, t: usize) -> &CostFn {
        &self.costs[self.idx(t)]
    }

    pub fn costs(&self) -> &[CostFn] {
        &self.costs
    }

    pub fn a_seq(&self) -> &[Matrix] {
        &self.a
    }

    pub fn b_seq(&self) -> &[Matrix] {
        &self.b
    }

    pub fn w_seq(&self) -> &[Vector] {
        &self.w
    }

    pub fn initial_state(&self) -> &Vector {
        &self.x1
    }

    pub fn segments(&self) -> &[Interval] {
        &self.segments
    }

    /// True when any step carries a cost with negative reward terms.
    pub fn has_signed_costs(&self) -> bool {
        self.costs.iter().any(|c| c.signed())
    }

    /// One step of the recursion `A_t x + B_t u + w_t`.
    pub fn transition(&self, t: usize, x: &Vector, u: &Vector) -> Vector {
        let i = self.idx(t);
        &self.a[i] * x + &self.b[i] * u + &self.w[i]
    }

    /// A copy restricted to the first `horizon` steps.
    pub fn truncated(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > self.horizon() {
            return Err(LtvError::OutOfHorizon { t: horizon, horizon: self.horizon() });
        }
        let inst = LtvInstance::new(
            self.a[..horizon].to_vec(),
            self.b[..horizon].to_vec(),
            self.w[..horizon].to_vec(),
            self.costs[..horizon].to_vec(),
        )?;
        let segs = self
            .segments
            .iter()
            .filter(|s| s.start <= horizon)
            .map(|s| Interval { start: s.start, end: s.end.min(horizon) })
            .collect();
        inst.with_initial_state(self.x1.clone())?.with_segments(segs)
    }
}
