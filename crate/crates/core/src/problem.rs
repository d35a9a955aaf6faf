//! Problem and report types shared by the solvers.

use std::time::Duration;

use crate::error::SolverError;
use crate::matrix::{ColumnMatrix, DenseSymmetricMatrix};
use crate::proj::{proj_generalized_simplex, SsnConfig};
use crate::set::GeneralizedSimplex;
use crate::vector::{diff_norm2, dot, norm2, norm_inf};

/// `min (1/2) x^T Q x + c^T x` over a [`GeneralizedSimplex`].
///
/// `Q` must be symmetric positive definite for the solvers to make sense;
/// symmetry is enforced by [`DenseSymmetricMatrix`], definiteness is not
/// checked at construction (it costs a factorization) and can be verified
/// on demand with [`QpProblem::verify_positive_definite`]. The exchange
/// method reports `NonPositiveCurvature` lazily if an indefinite direction
/// ever shows up.
#[derive(Clone, Debug)]
pub struct QpProblem {
    q: DenseSymmetricMatrix,
    c: Vec<f64>,
    set: GeneralizedSimplex,
}

impl QpProblem {
    pub fn new(
        q: DenseSymmetricMatrix,
        c: Vec<f64>,
        set: GeneralizedSimplex,
    ) -> Result<Self, SolverError> {
        if q.dim() != set.dim() {
            return Err(SolverError::DimensionMismatch {
                expected: set.dim(),
                got: q.dim(),
            });
        }
        if c.len() != set.dim() {
            return Err(SolverError::DimensionMismatch {
                expected: set.dim(),
                got: c.len(),
            });
        }
        Ok(Self { q, c, set })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &DenseSymmetricMatrix {
        &self.q
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn set(&self) -> &GeneralizedSimplex {
        &self.set
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self.q.quadratic_form(x) + dot(&self.c, x)
    }

    /// `Q x + c` into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.q.matvec(x, out);
        for i in 0..out.len() {
            out[i] += self.c[i];
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Attempts a Cholesky factorization of `Q`.
    pub fn verify_positive_definite(&self) -> Result<(), SolverError> {
        self.q.cholesky().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Exchange gap criterion met.
    GapConverged,
    /// Projected-gradient fixed-point residual criterion met.
    ResidualConverged,
    /// A caller-supplied stopping rule fired.
    UserErrorConverged,
    MaxIterations,
    TimeLimit,
}

/// What every solver hands back. `x` satisfies the report feasibility
/// contract of [`GeneralizedSimplex::is_report_feasible`].
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// `||x - P_F(x - grad)|| / (1 + ||x||)` at the returned point.
    pub kkt_residual: f64,
    pub wall_time: Duration,
}

/// Initial point handed to an iterative solver.
#[derive(Clone, Debug)]
pub enum StartPoint {
    /// Already feasible; validated and used as is (bounds snapped).
    Feasible(Vec<f64>),
    /// Arbitrary point, projected onto the feasible set first.
    Project(Vec<f64>),
}

/// Scaled fixed-point residual of the projected gradient map,
/// `||x - P_F(x - (Qx + c))||_2 / (1 + ||x||_2)`.
///
/// Zero exactly at KKT points; the projection is computed by the dual
/// Newton solver with default settings.
pub fn kkt_residual(problem: &QpProblem, x: &[f64]) -> Result<f64, SolverError> {
    let g = problem.gradient(x);
    kkt_residual_with_gradient(problem.set(), x, &g, &SsnConfig::default())
}

/// Reporting error against a reference point: `||x - xbar||_2 / (1 + ||xbar||_2)`.
pub fn relative_error(x: &[f64], xbar: &[f64]) -> f64 {
    diff_norm2(x, xbar) / (1.0 + norm2(xbar))
}

/// Same residual, for callers that already hold the gradient at `x`.
pub fn kkt_residual_with_gradient(
    set: &GeneralizedSimplex,
    x: &[f64],
    gradient: &[f64],
    ssn: &SsnConfig,
) -> Result<f64, SolverError> {
    if x.len() != set.dim() {
        return Err(SolverError::DimensionMismatch {
            expected: set.dim(),
            got: x.len(),
        });
    }
    let shifted: Vec<f64> = x.iter().zip(gradient).map(|(xi, gi)| xi - gi).collect();
    let p = proj_generalized_simplex(&shifted, set, ssn)?;
    Ok(diff_norm2(x, &p) / (1.0 + norm2(x)))
}

/// A primal point with multipliers claiming its optimality: `y` for the
/// budget row and `z` for the box rows, with the sign convention that
/// `z_i >= 0` where the lower bound is active, `z_i <= 0` where the upper
/// bound is active, and `z_i = 0` elsewhere.
#[derive(Clone, Debug)]
pub struct KktCertificate {
    pub x: Vec<f64>,
    pub y: f64,
    pub z: Vec<f64>,
}

impl KktCertificate {
    /// `|| Q x + c - y e - z ||_inf`: how well the multipliers close the
    /// stationarity equation at `x`.
    pub fn stationarity_residual(&self, problem: &QpProblem) -> f64 {
        let g = problem.gradient(&self.x);
        let mut m: f64 = 0.0;
        for i in 0..g.len() {
            m = m.max((g[i] - self.y - self.z[i]).abs());
        }
        m
    }

    /// Largest violation of the sign convention, using `tol`-based bound
    /// activity at `x`.
    pub fn sign_violation(&self, set: &GeneralizedSimplex, tol: f64) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.x.len() {
            let at_lower = self.x[i] <= set.lower()[i] + tol;
            let at_upper = self.x[i] >= set.upper()[i] - tol;
            if at_lower {
                m = m.max(-self.z[i]);
            } else if at_upper {
                m = m.max(self.z[i]);
            } else {
                m = m.max(self.z[i].abs());
            }
        }
        m
    }

    /// Complementarity defect: each multiplier scaled by the distance of
    /// `x_i` to the bound it claims is active.
    pub fn complementarity_defect(&self, set: &GeneralizedSimplex) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.x.len() {
            if self.z[i] > 0.0 {
                m = m.max(self.z[i] * (self.x[i] - set.lower()[i]).abs());
            } else if self.z[i] < 0.0 {
                m = m.max(-self.z[i] * (set.upper()[i] - self.x[i]).abs());
            }
        }
        m
    }
}

/// `||g||_inf` helper exposed for reporting.
pub fn gradient_sup_norm(problem: &QpProblem, x: &[f64]) -> f64 {
    norm_inf(&problem.gradient(x))
}

/// Rewrites `min (1/2) x^T Q x + c^T x` over `{ a^T x = b, l <= x <= u }`
/// with nonzero weights `a` as an equivalent problem over a generalized
/// simplex in `x'_i = a_i x_i`: Hessian `D^{-1} Q D^{-1}` and linear term
/// `D^{-1} c` with `D = Diag(a)`. Map minimizers back with
/// `x_i = x'_i / a_i`.
pub fn rescale_weighted_qp(
    q: &DenseSymmetricMatrix,
    c: &[f64],
    a: &[f64],
    b: f64,
    lower: &[f64],
    upper: &[f64],
) -> Result<QpProblem, SolverError> {
    let set = crate::set::rescale_weighted_budget(a, b, lower, upper)?;
    if c.len() != a.len() {
        return Err(SolverError::DimensionMismatch { expected: a.len(), got: c.len() });
    }
    let inv: Vec<f64> = a.iter().map(|w| 1.0 / w).collect();
    let scaled_q = q.diagonal_congruence(&inv);
    let scaled_c: Vec<f64> = c.iter().zip(&inv).map(|(ci, wi)| ci * wi).collect();
    QpProblem::new(scaled_q, scaled_c, set)
}
