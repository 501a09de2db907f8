//! Compiling a MAX-3SAT formula into a time-varying control problem whose best
//! static state-feedback gain encodes a maximizing assignment.
//!
//! Variable `i` owns state coordinate `i` (1-based); coordinate `n+1` is an
//! absorbing sink entered once the current clause has been satisfied. Each
//! clause is an episode of `n+2` steps that starts and ends at `e_1`.

use std::fmt;

use ltv_core::linalg::{project_simplex, simplex_distance};
use ltv_core::rng::{stream, StreamId};
use ltv_core::{CostFn, LiteralSign, LtvInstance, Matrix, SatCost, Vector};
use rand::Rng;

use crate::error::{InstanceError, Result};

/// Largest variable count accepted by [`CnfFormula::brute_force`].
pub const BRUTE_FORCE_CAP: usize = 16;

/// Default weight of the simplex-regularity penalty.
pub const DEFAULT_SAT_SCALE: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    /// 1-based variable index.
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn from_dimacs(code: i64) -> Option<Self> {
        if code == 0 {
            return None;
        }
        let var = usize::try_from(code.unsigned_abs()).ok()?;
        Some(Literal { var, negated: code < 0 })
    }

    pub fn holds(&self, assignment: &[bool]) -> bool {
        assignment[self.var - 1] != self.negated
    }

    fn sign(&self) -> LiteralSign {
        if self.negated {
            LiteralSign::Negative
        } else {
            LiteralSign::Positive
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "-{}", self.var)
        } else {
            write!(f, "{}", self.var)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    n_vars: usize,
    clauses: Vec<Vec<Literal>>,
}

impl CnfFormula {
    /// Validates `n ≥ 1`, `m ≥ 1`, and that each clause has one to three
    /// literals over distinct variables in `1..=n`.
    pub fn new(n_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<Self> {
        if n_vars == 0 {
            return Err(InstanceError::InvalidParameter("formula needs at least one variable".into()));
        }
        if clauses.is_empty() {
            return Err(InstanceError::InvalidParameter("formula needs at least one clause".into()));
        }
        for (j, c) in clauses.iter().enumerate() {
            let clause = j + 1;
            if c.is_empty() || c.len() > 3 {
                return Err(InstanceError::Clause { clause, reason: format!("{} literals (expected 1 to 3)", c.len()) });
            }
            for (k, lit) in c.iter().enumerate() {
                if lit.var == 0 || lit.var > n_vars {
                    return Err(InstanceError::Clause { clause, reason: format!("variable {} outside 1..={n_vars}", lit.var) });
                }
                if c[..k].iter().any(|o| o.var == lit.var) {
                    return Err(InstanceError::Clause { clause, reason: format!("variable {} appears twice", lit.var) });
                }
            }
        }
        Ok(CnfFormula { n_vars, clauses })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    pub fn satisfied(&self, assignment: &[bool]) -> usize {
        self.clauses.iter().filter(|c| c.iter().any(|l| l.holds(assignment))).count()
    }

    /// Exhaustive MAX-3SAT: the optimum count and the first assignment (in
    /// binary counting order, variable 1 least significant) attaining it.
    pub fn brute_force(&self) -> Result<(usize, Vec<bool>)> {
        let n = self.n_vars;
        if n > BRUTE_FORCE_CAP {
            return Err(InstanceError::TooManyVariables { n, cap: BRUTE_FORCE_CAP });
        }
        let mut best = (0, vec![false; n]);
        for mask in 0u32..(1u32 << n) {
            let v: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let k = self.satisfied(&v);
            if k > best.0 || mask == 0 {
                best = (k, v);
            }
            if best.0 == self.clauses.len() {
                break;
            }
        }
        Ok(best)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.n_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }

    /// Uniformly random formula: each clause draws 1 to 3 distinct variables
    /// (at most `n`) with fair signs.
    pub fn random(n_vars: usize, n_clauses: usize, seed: u64) -> Result<Self> {
        if n_vars == 0 {
            return Err(InstanceError::InvalidParameter("formula needs at least one variable".into()));
        }
        let mut rng = stream(seed, StreamId::Instance);
        let clauses = (0..n_clauses)
            .map(|_| {
                let len = rng.random_range(1..=3usize.min(n_vars));
                let mut vars: Vec<usize> = Vec::with_capacity(len);
                while vars.len() < len {
                    let v = rng.random_range(1..=n_vars);
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
                vars.into_iter().map(|var| Literal { var, negated: rng.random() }).collect()
            })
            .collect();
        CnfFormula::new(n_vars, clauses)
    }
}

/// Reads DIMACS CNF: `c` comment lines, one `p cnf <n> <m>` header, clauses
/// as zero-terminated integer lists (possibly spanning lines), and an optional
/// `%` end marker. The final clause may omit its terminating zero.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(InstanceError::Dimacs { line, reason: "second problem line".into() });
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                ["p", "cnf", n, m] => n.parse::<usize>().ok().zip(m.parse::<usize>().ok()),
                _ => None,
            };
            header = Some(parsed.ok_or_else(|| InstanceError::Dimacs { line, reason: format!("malformed problem line {trimmed:?}") })?);
            continue;
        }
        let Some((n, _)) = header else {
            return Err(InstanceError::Dimacs { line, reason: "clause before the problem line".into() });
        };
        for tok in trimmed.split_whitespace() {
            let code: i64 = tok.parse().map_err(|_| InstanceError::Dimacs { line, reason: format!("not an integer: {tok:?}") })?;
            match Literal::from_dimacs(code) {
                None => {
                    if current.is_empty() {
                        return Err(InstanceError::Dimacs { line, reason: "empty clause".into() });
                    }
                    clauses.push(std::mem::take(&mut current));
                }
                Some(lit) => {
                    if lit.var > n {
                        return Err(InstanceError::Dimacs { line, reason: format!("literal {code} exceeds the declared {n} variables") });
                    }
                    if current.len() == 3 {
                        return Err(InstanceError::Dimacs { line, reason: "clause with more than 3 literals".into() });
                    }
                    if current.iter().any(|l| l.var == lit.var) {
                        return Err(InstanceError::Dimacs { line, reason: format!("variable {} repeated within a clause", lit.var) });
                    }
                    current.push(lit);
                }
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let Some((n, m)) = header else {
        return Err(InstanceError::Dimacs { line: last_line, reason: "missing problem line".into() });
    };
    if clauses.len() != m {
        return Err(InstanceError::Dimacs { line: last_line, reason: format!("header declares {m} clauses, found {}", clauses.len()) });
    }
    CnfFormula::new(n, clauses)
}

/// Builds the `m(n+2)`-step instance with `d_x = n+1`, `d_u = 2` and `x_1 = e_1`.
pub fn compile_max3sat(formula: &CnfFormula, scale: f64) -> Result<LtvInstance> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(InstanceError::InvalidParameter(format!("regularity scale {scale} must be finite and non-negative")));
    }
    let n = formula.n_vars();
    let d = n + 1;
    let sink = n;
    let episode = n + 2;
    let horizon = formula.n_clauses() * episode;
    let (mut a, mut b, mut costs) = (Vec::with_capacity(horizon), Vec::with_capacity(horizon), Vec::with_capacity(horizon));
    for clause in formula.clauses() {
        for s in 1..=episode {
            let mut at = Matrix::zeros(d, d);
            let mut bt = Matrix::zeros(d, 2);
            let mut literal = None;
            if s < n {
                at.row_mut(s).columns_mut(0, n).fill(1.0);
                at[(sink, sink)] = 1.0;
            } else if s == n {
                at.row_mut(sink).fill(1.0);
            } else if s == n + 1 {
                at.row_mut(0).fill(1.0);
            } else {
                bt.row_mut(0).fill(1.0);
            }
            if s <= n {
                if let Some(lit) = clause.iter().find(|l| l.var == s) {
                    let col = usize::from(lit.negated);
                    // At s = n both updates land on the sink row and cancel.
                    bt[(s, col)] -= 1.0;
                    bt[(sink, col)] += 1.0;
                    literal = Some(lit.sign());
                }
            }
            a.push(at);
            b.push(bt);
            costs.push(CostFn::Sat(SatCost { scale, literal }));
        }
    }
    let mut x1 = Vector::zeros(d);
    x1[0] = 1.0;
    Ok(LtvInstance::new(a, b, vec![Vector::zeros(d); horizon], costs)?.with_initial_state(x1)?)
}

/// `K = [v̄_1, …, v̄_n, 0]` with `v̄ = e_1` for true and `e_2` for false.
pub fn assignment_to_k(assignment: &[bool]) -> Matrix {
    let n = assignment.len();
    let mut k = Matrix::zeros(2, n + 1);
    for (i, &v) in assignment.iter().enumerate() {
        k[(usize::from(!v), i)] = 1.0;
    }
    k
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    /// Larger coordinate wins; ties go to true.
    Deterministic,
    /// True with probability equal to the first coordinate of the column's
    /// projection onto the simplex.
    Randomized,
}

/// Reads an assignment off the first `n` columns of a `2 × (n+1)` gain.
pub fn k_to_assignment<R: Rng + ?Sized>(k: &Matrix, rounding: Rounding, tolerance: f64, rng: &mut R) -> Result<Vec<bool>> {
    if k.nrows() != 2 || k.ncols() < 2 {
        return Err(InstanceError::InvalidParameter(format!("gain is {}x{}, expected 2x(n+1) with n ≥ 1", k.nrows(), k.ncols())));
    }
    let n = k.ncols() - 1;
    (0..n)
        .map(|i| {
            let col: Vector = k.column(i).into_owned();
            let (distance, _) = simplex_distance(&col);
            if !(distance <= tolerance) {
                return Err(InstanceError::OffSimplex { column: i + 1, distance, tolerance });
            }
            Ok(match rounding {
                Rounding::Deterministic => col[0] >= col[1],
                Rounding::Randomized => rng.random::<f64>() < project_simplex(&col)[0],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimacs_round_trip() {
        let text = "c example\np cnf 3 2\n1 -3 0\n2 3\n-1 0\n%\n0\n";
        let f = parse_dimacs(text).unwrap();
        assert_eq!(f.n_clauses(), 2);
        assert_eq!(f.clauses()[1].len(), 3);
        assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn dimacs_rejections() {
        for bad in [
            "p cnf 2 1\n1 1 0\n",
            "p cnf 2 1\n1 -1 0\n",
            "p cnf 2 1\n3 0\n",
            "p cnf 4 1\n1 2 3 4 0\n",
            "p cnf 2 2\n1 0\n",
            "1 0\n",
            "p cnf 2 1\n0\n",
            "p cnf 2 1\n1 x 0\n",
            "p cnf 0 0\n",
            "p cnf 2 1\n-9223372036854775808 0\n",
        ] {
            assert!(parse_dimacs(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn assignment_gain_columns() {
        let k = assignment_to_k(&[true, false]);
        assert_eq!(k, Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        let mut rng = stream(0, StreamId::Rounding);
        assert_eq!(k_to_assignment(&k, Rounding::Deterministic, 1e-9, &mut rng).unwrap(), vec![true, false]);
        let tie = Matrix::from_row_slice(2, 2, &[0.6, 0.0, 0.4, 0.0]);
        assert_eq!(k_to_assignment(&tie, Rounding::Deterministic, 1e-9, &mut rng).unwrap(), vec![true]);
        let off = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(k_to_assignment(&off, Rounding::Randomized, 0.1, &mut rng), Err(InstanceError::OffSimplex { column: 1, .. })));
    }
}
