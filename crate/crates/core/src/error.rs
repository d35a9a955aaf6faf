//! Error type shared by every solver in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The feasible set is empty, or an interiority assumption a solver
    /// relies on (strict bounds, strict budget slack) does not hold.
    #[error("infeasible: {0}")]
    Infeasible(&'static str),

    /// A state no iteration can make progress from, e.g. no coordinate is
    /// movable in either direction.
    #[error("degenerate: {0}")]
    Degenerate(&'static str),

    /// The quadratic has nonpositive curvature along the exchange direction
    /// `e_t - e_s`; the problem is not strictly convex.
    #[error("nonpositive curvature {value:.3e} along exchange pair ({s}, {t})")]
    NonPositiveCurvature { s: usize, t: usize, value: f64 },

    /// The evaluation point lies outside the objective's domain.
    #[error("point outside the objective domain")]
    DomainError,

    /// An accepted step left the objective's domain.
    #[error("iterate left the objective domain at outer iteration {0}")]
    DomainViolation(usize),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("quadratic form is negative ({0:.3e}) beyond rounding slack")]
    NegativeQuadraticForm(f64),

    /// An inner solve hit its iteration budget before reaching the accuracy
    /// the outer loop asked for.
    #[error("inner solver stalled: {0}")]
    InnerSolverStall(&'static str),

    #[error("line search failed after {0} backtracks")]
    LineSearchFail(usize),

    /// The instance generator kept producing degenerate data.
    #[error("no nondegenerate instance after {0} attempts")]
    DegenerateInstance(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}
