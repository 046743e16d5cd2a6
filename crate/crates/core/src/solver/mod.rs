//! Embedded dense convex solvers: a Mehrotra predictor-corrector
//! interior-point method for LPs/convex QPs and a Frank-Wolfe driver for
//! smooth concave maximization over a polytope.

mod ipm;
mod linalg;

pub mod frank_wolfe;

pub use frank_wolfe::{maximize_concave, FrankWolfeConfig, FrankWolfeReport};
pub use ipm::IpmConfig;

use ndarray::Array1;

use crate::error::{ExploreError, Result};

/// Row-compressed sparse matrix; rows are kept sorted by column.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, rows: vec![Vec::new(); n_rows] }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Adds `v` to entry `(r, c)`.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(r < self.n_rows && c < self.n_cols, "entry ({r}, {c}) out of bounds");
        if v == 0.0 {
            return;
        }
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |&(col, _)| col) {
            Ok(i) => row[i].1 += v,
            Err(i) => row.insert(i, (c, v)),
        }
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn matvec(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_rows);
        for (r, row) in self.rows.iter().enumerate() {
            out[r] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
        out
    }

    pub fn matvec_t(&self, y: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_cols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * y[r];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericError,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration limit",
            SolveStatus::NumericError => "numeric error",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Primal point (original variables only, slacks stripped).
    pub x: Array1<f64>,
    /// Multipliers for the equality rows followed by the inequality rows.
    pub y: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
}

impl SolveReport {
    pub fn require_optimal(self) -> Result<Self> {
        if self.status == SolveStatus::Optimal {
            Ok(self)
        } else {
            Err(ExploreError::Solver {
                status: self.status,
                detail: format!(
                    "primal residual {:.2e}, dual residual {:.2e}, complementarity {:.2e} after {} iterations",
                    self.primal_residual, self.dual_residual, self.complementarity, self.iterations
                ),
            })
        }
    }
}

/// `min cᵀx  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  l <= x <= u`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: Array1<f64>,
    pub a_eq: SparseMatrix,
    pub b_eq: Array1<f64>,
    pub a_ub: SparseMatrix,
    pub b_ub: Array1<f64>,
    pub lower: Array1<f64>,
    pub upper: Array1<f64>,
}

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        Self {
            c: Array1::zeros(n),
            a_eq: SparseMatrix::new(0, n),
            b_eq: Array1::zeros(0),
            a_ub: SparseMatrix::new(0, n),
            b_ub: Array1::zeros(0),
            lower: Array1::from_elem(n, f64::NEG_INFINITY),
            upper: Array1::from_elem(n, f64::INFINITY),
        }
    }

    pub fn solve(&self, cfg: &IpmConfig) -> Result<SolveReport> {
        QuadraticProgram::from_linear(self.clone()).solve(cfg)
    }
}

/// `min ½ xᵀQx + cᵀx` under the same constraint classes as [`LinearProgram`].
/// `Q` must be symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub q: SparseMatrix,
    pub c: Array1<f64>,
    pub a_eq: SparseMatrix,
    pub b_eq: Array1<f64>,
    pub a_ub: SparseMatrix,
    pub b_ub: Array1<f64>,
    pub lower: Array1<f64>,
    pub upper: Array1<f64>,
}

impl QuadraticProgram {
    pub fn new(n: usize) -> Self {
        Self::from_linear(LinearProgram::new(n))
    }

    pub fn from_linear(lp: LinearProgram) -> Self {
        let n = lp.c.len();
        Self {
            q: SparseMatrix::new(n, n),
            c: lp.c,
            a_eq: lp.a_eq,
            b_eq: lp.b_eq,
            a_ub: lp.a_ub,
            b_ub: lp.b_ub,
            lower: lp.lower,
            upper: lp.upper,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn objective_at(&self, x: &Array1<f64>) -> f64 {
        0.5 * self.q.matvec(x).dot(x) + self.c.dot(x)
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.n_vars();
        let ok = self.q.n_rows() == n
            && self.q.n_cols() == n
            && self.a_eq.n_cols() == n
            && self.a_ub.n_cols() == n
            && self.a_eq.n_rows() == self.b_eq.len()
            && self.a_ub.n_rows() == self.b_ub.len()
            && self.lower.len() == n
            && self.upper.len() == n;
        if !ok {
            return Err(ExploreError::Shape(format!(
                "inconsistent program shapes: n={n}, Q {}x{}, A_eq {}x{} (b {}), A_ub {}x{} (b {}), bounds {}/{}",
                self.q.n_rows(),
                self.q.n_cols(),
                self.a_eq.n_rows(),
                self.a_eq.n_cols(),
                self.b_eq.len(),
                self.a_ub.n_rows(),
                self.a_ub.n_cols(),
                self.b_ub.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        for i in 0..n {
            if !(self.lower[i] < self.upper[i] + 1e-15) || self.lower[i].is_nan() {
                return Err(ExploreError::InvalidParam(format!(
                    "empty bound interval for variable {i}: [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    /// Interior-point solve; non-optimal outcomes are reported through
    /// [`SolveReport::status`], errors are reserved for malformed inputs.
    pub fn solve(&self, cfg: &IpmConfig) -> Result<SolveReport> {
        self.check_shapes()?;
        Ok(ipm::solve(self, cfg))
    }
}

#[cfg(test)]
mod tests;
