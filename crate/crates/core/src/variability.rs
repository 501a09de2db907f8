//! Interval variability of a sequence around its own mean.

use crate::error::{LtvError, Result};
use crate::instance::Interval;
use crate::linalg::Vector;
use crate::operator::MarkovOperator;

/// `(1/|I|) Σ_{t∈I} ‖z_t - z̄_I‖²` for a 1-based sequence `z_1..z_T`.
pub fn vector_variability(seq: &[Vector], interval: &Interval) -> Result<f64> {
    if interval.start == 0 || interval.end < interval.start {
        return Err(LtvError::EmptyInterval);
    }
    if interval.end > seq.len() {
        return Err(LtvError::OutOfHorizon { t: interval.end, horizon: seq.len() });
    }
    let items = &seq[interval.start - 1..interval.end];
    let dim = items[0].len();
    if let Some(bad) = items.iter().position(|z| z.len() != dim) {
        return Err(LtvError::Dimension {
            t: interval.start + bad,
            what: "sequence element",
            expected: format!("{dim}"),
            found: format!("{}", items[bad].len()),
        });
    }
    if items.iter().all(|z| z == &items[0]) {
        // Averaging identical values can leave rounding residue; report zero exactly.
        return Ok(0.0);
    }
    let n = items.len() as f64;
    let mean = items.iter().fold(Vector::zeros(dim), |acc, z| acc + z) / n;
    Ok(items.iter().map(|z| (z - &mean).norm_squared()).sum::<f64>() / n)
}

/// Mean squared vectorized Frobenius distance of `G_t`, `t ∈ I`, to their mean.
/// `ops[k]` is the operator at step `k + 1`.
pub fn variability(ops: &[MarkovOperator], interval: &Interval) -> Result<f64> {
    if interval.end > ops.len() {
        return Err(LtvError::OutOfHorizon { t: interval.end, horizon: ops.len() });
    }
    if interval.start == 0 || interval.end < interval.start {
        return Err(LtvError::EmptyInterval);
    }
    let h = ops[interval.start - 1].h();
    let shape = ops[interval.start - 1].shape();
    for t in interval.steps() {
        let g = &ops[t - 1];
        if g.h() != h || g.shape() != shape {
            return Err(LtvError::Dimension {
                t,
                what: "Markov operator",
                expected: format!("{h} blocks of {}x{}", shape.0, shape.1),
                found: format!("{} blocks of {}x{}", g.h(), g.shape().0, g.shape().1),
            });
        }
    }
    let flat: Vec<Vector> = ops.iter().map(|g| g.to_vector()).collect();
    vector_variability(&flat, interval)
}

/// `|I| · variability`.
pub fn total_variability(ops: &[MarkovOperator], interval: &Interval) -> Result<f64> {
    Ok(interval.len() as f64 * variability(ops, interval)?)
}
