//! Dense linear-algebra helpers shared by every crate in the workspace.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance for the power iteration behind [`op_norm`].
pub const OPNORM_TOL: f64 = 1e-10;
/// Iteration cap for the power iteration behind [`op_norm`].
pub const OPNORM_MAX_ITER: usize = 200;

/// Spectral norm (largest singular value).
///
/// Vectors and 1x1/2x2 matrices use closed forms. Larger matrices run power
/// iteration on the smaller Gram matrix; if that does not settle within
/// [`OPNORM_MAX_ITER`] steps the symmetric eigen-solver is used instead.
pub fn op_norm(m: &Matrix) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r == 1 || c == 1 {
        return m.norm();
    }
    if r == 2 && c == 2 {
        let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let s = a * a + b * b + cc * cc + d * d;
        let det = a * d - b * cc;
        let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
        return ((s + disc) / 2.0).max(0.0).sqrt();
    }
    let gram = if c <= r { m.transpose() * m } else { m * m.transpose() };
    match power_iteration(&gram) {
        Some(lambda) => lambda.max(0.0).sqrt(),
        None => {
            let eig = gram.symmetric_eigenvalues();
            eig.iter().cloned().fold(0.0_f64, f64::max).sqrt()
        }
    }
}

fn power_iteration(gram: &Matrix) -> Option<f64> {
    let n = gram.nrows();
    // Non-uniform start so that symmetric structures do not hide the top direction.
    let mut v = Vector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 0.1);
    v /= v.norm();
    let mut prev = 0.0;
    for _ in 0..OPNORM_MAX_ITER {
        let gv = gram * &v;
        let lambda = gv.norm();
        if lambda == 0.0 {
            // Either the matrix is zero or the start vector is in its kernel.
            return if gram.iter().all(|x| *x == 0.0) { Some(0.0) } else { None };
        }
        if (lambda - prev).abs() <= OPNORM_TOL * lambda {
            return Some(lambda);
        }
        prev = lambda;
        v = gv / lambda;
    }
    None
}

/// Radially shrink `v` so that its Euclidean norm is at most `radius`.
pub fn clip_norm(v: &Vector, radius: f64) -> Vector {
    let n = v.norm();
    if n > radius && n > 0.0 {
        v * (radius / n)
    } else {
        v.clone()
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &Vector) -> Vector {
    let n = v.len();
    if n == 0 {
        return v.clone();
    }
    let mut sorted: Vec<f64> = v.iter().cloned().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cumsum += s;
        let candidate = (cumsum - 1.0) / (k as f64 + 1.0);
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// Euclidean distance from `v` to the probability simplex, together with the
/// unit direction away from it (zero on the simplex).
pub fn simplex_distance(v: &Vector) -> (f64, Vector) {
    let diff = v - project_simplex(v);
    let d = diff.norm();
    if d > 0.0 {
        (d, diff / d)
    } else {
        (0.0, Vector::zeros(v.len()))
    }
}

/// Checks that every entry is finite.
pub fn all_finite<'a, I: IntoIterator<Item = &'a f64>>(it: I) -> bool {
    it.into_iter().all(|x| x.is_finite())
}

/// Row-major nested arrays to a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<Matrix> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if rows.iter().any(|row| row.len() != c) {
        return None;
    }
    Some(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Matrix to row-major nested arrays.
pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn opnorm_closed_forms_agree_with_svd() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let svd = m.clone().svd(false, false);
        let top = svd.singular_values.max();
        assert_relative_eq!(op_norm(&m), top, max_relative = 1e-12);
    }

    #[test]
    fn opnorm_power_iteration_matches_svd() {
        let m = Matrix::from_row_slice(3, 4, &[1.0, 0.3, -2.0, 0.0, 0.5, 1.5, 0.2, -0.7, 2.2, 0.0, 0.1, 1.0]);
        let top = m.clone().svd(false, false).singular_values.max();
        assert_relative_eq!(op_norm(&m), top, max_relative = 1e-9);
    }

    #[test]
    fn opnorm_of_vector_shapes() {
        let m = Matrix::from_row_slice(1, 3, &[3.0, 0.0, 4.0]);
        assert_eq!(op_norm(&m), 5.0);
        assert_eq!(op_norm(&Matrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn simplex_projection_basics() {
        let v = Vector::from_vec(vec![0.2, 0.8]);
        assert_eq!(project_simplex(&v), v);
        let p = project_simplex(&Vector::from_vec(vec![2.0, 0.0, 0.0]));
        assert_eq!(p, Vector::from_vec(vec![1.0, 0.0, 0.0]));
        let (d, _) = simplex_distance(&Vector::from_vec(vec![0.0, 0.0]));
        assert_relative_eq!(d, (0.5f64).sqrt(), max_relative = 1e-14);
    }
}
