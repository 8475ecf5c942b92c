//! Dense convex quadratic programming for the force optimiser.
//!
//! Minimises `0.5 yᵀHy + fᵀy` subject to two-sided linear inequalities
//! `lo <= A_ineq y <= hi` and equalities `A_eq y = b_eq`, with a primal
//! active-set method; equalities are eliminated by null-space substitution
//! before the iteration starts. Problems are small and dense (at most a few
//! hundred variables), active sets barely move between control ticks, and
//! every code path is deterministic.

mod active_set;
mod constraints;
mod reference;

pub use constraints::{build_friction_constraints, StepConstraints};
pub use reference::brute_force_box_solve;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Primal feasibility tolerance: constraint violation accepted as "satisfied".
pub const FEAS_TOL: f64 = 1e-6;
/// Optimality tolerance on the stationarity and complementarity residuals.
pub const OPT_TOL: f64 = 1e-6;
/// Active-set iteration cap; hitting it returns the best iterate, flagged.
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("hessian is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("problem contains a non-finite entry")]
    NonFinite,
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    /// All KKT conditions met within tolerance.
    Solved,
    /// Iteration cap reached; `y` is the best feasible iterate found.
    MaxIterations,
    /// No point satisfies the constraints (within tolerance).
    Infeasible,
}

/// A dense QP instance. Bounds may be infinite on either side; an equality
/// written as a two-sided inequality with `lo == hi` is legal but the
/// dedicated equality block is cheaper.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    /// Inequality rows; `lo <= a_ineq y <= hi` elementwise.
    pub a_ineq: DMatrix<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpProblem {
    /// Problem with no constraints at all.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Self {
        let d = f.len();
        Self {
            h,
            f,
            a_ineq: DMatrix::zeros(0, d),
            lo: DVector::zeros(0),
            hi: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, d),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub(crate) fn validate(&self) -> Result<(), QpError> {
        let d = self.dim();
        if self.h.nrows() != d || self.h.ncols() != d {
            return Err(QpError::DimensionMismatch(format!(
                "hessian is {}x{} for {d} variables",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.a_ineq.ncols() != d && self.a_ineq.nrows() > 0 {
            return Err(QpError::DimensionMismatch(format!(
                "inequality matrix has {} columns for {d} variables",
                self.a_ineq.ncols()
            )));
        }
        if self.lo.len() != self.a_ineq.nrows() || self.hi.len() != self.a_ineq.nrows() {
            return Err(QpError::DimensionMismatch(format!(
                "{} inequality rows with {} lower and {} upper bounds",
                self.a_ineq.nrows(),
                self.lo.len(),
                self.hi.len()
            )));
        }
        if self.a_eq.ncols() != d && self.a_eq.nrows() > 0 {
            return Err(QpError::DimensionMismatch(format!(
                "equality matrix has {} columns for {d} variables",
                self.a_eq.ncols()
            )));
        }
        if self.b_eq.len() != self.a_eq.nrows() {
            return Err(QpError::DimensionMismatch(format!(
                "{} equality rows with {} right-hand sides",
                self.a_eq.nrows(),
                self.b_eq.len()
            )));
        }
        let mut asym = 0.0_f64;
        for i in 0..d {
            for j in i + 1..d {
                asym = asym.max((self.h[(i, j)] - self.h[(j, i)]).abs());
            }
        }
        if asym > 1e-10 {
            return Err(QpError::NotSymmetric(asym));
        }
        let finite = self.h.iter().all(|v| v.is_finite())
            && self.f.iter().all(|v| v.is_finite())
            && self.a_ineq.iter().all(|v| v.is_finite())
            && self.a_eq.iter().all(|v| v.is_finite())
            && self.b_eq.iter().all(|v| v.is_finite())
            // bounds may be infinite but never NaN
            && self.lo.iter().all(|v| !v.is_nan())
            && self.hi.iter().all(|v| !v.is_nan());
        if !finite {
            return Err(QpError::NonFinite);
        }
        Ok(())
    }

    /// Objective value at `y`.
    pub fn objective(&self, y: &DVector<f64>) -> f64 {
        0.5 * (&self.h * y).dot(y) + self.f.dot(y)
    }

    /// Largest constraint violation at `y` (0 when feasible).
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.a_eq.nrows() > 0 {
            let res = &self.a_eq * y - &self.b_eq;
            v = v.max(res.amax());
        }
        if self.a_ineq.nrows() > 0 {
            let g = &self.a_ineq * y;
            for i in 0..g.len() {
                v = v.max(self.lo[i] - g[i]).max(g[i] - self.hi[i]);
            }
        }
        v
    }

    /// Matrices and vectors in a structured text form, for dumping problem
    /// instances to disk and replaying them against an external oracle.
    pub fn debug_dump(&self) -> String {
        fn mat(name: &str, m: &DMatrix<f64>, out: &mut String) {
            use std::fmt::Write;
            writeln!(out, "{name} {}x{}", m.nrows(), m.ncols()).unwrap();
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        fn vec(name: &str, v: &DVector<f64>, out: &mut String) {
            use std::fmt::Write;
            let row: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{name} {}", v.len()).unwrap();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        let mut out = String::new();
        mat("h", &self.h, &mut out);
        vec("f", &self.f, &mut out);
        mat("a_ineq", &self.a_ineq, &mut out);
        vec("lo", &self.lo, &mut out);
        vec("hi", &self.hi, &mut out);
        mat("a_eq", &self.a_eq, &mut out);
        vec("b_eq", &self.b_eq, &mut out);
        out
    }
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub y: DVector<f64>,
    pub status: QpStatus,
    /// Worst KKT residual: max of primal violation, stationarity,
    /// complementary slackness and dual negativity.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// One multiplier per inequality row, signed: positive at the upper
    /// bound, negative at the lower bound, zero when inactive.
    pub ineq_duals: DVector<f64>,
    pub eq_duals: DVector<f64>,
}

/// Solves the problem; `warm_start` seeds both the starting point and the
/// initial working set. Structural defects (shape mismatches, NaN data)
/// return an error; infeasibility and the iteration cap are reported in the
/// solution status.
pub fn solve(problem: &QpProblem, warm_start: Option<&DVector<f64>>) -> Result<QpSolution, QpError> {
    problem.validate()?;
    if let Some(w) = warm_start {
        if w.len() != problem.dim() {
            return Err(QpError::DimensionMismatch(format!(
                "warm start has length {}, problem has {} variables",
                w.len(),
                problem.dim()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite);
        }
    }
    Ok(active_set::solve_impl(problem, warm_start))
}
