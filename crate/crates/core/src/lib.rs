//! Solvers for convex programs whose feasible set is a box intersected with a
//! single budget constraint,
//!
//! ```text
//!     F = { x : eᵀx = b,  l <= x <= u }.
//! ```
//!
//! The crate provides:
//!
//! * exact Euclidean projection onto `F` through a one dimensional semismooth
//!   Newton solve on the dual of the projection problem ([`proj`]),
//! * a two coordinate exchange method for strictly convex quadratics over `F`
//!   whose per-iteration cost is two columns of the Hessian ([`vem`]),
//! * projected gradient, accelerated gradient, and Frank-Wolfe baselines for
//!   the same quadratic programs ([`baselines`]),
//! * an inexact projected Newton loop for semismoothly differentiable
//!   objectives ([`sqp`]) and one for self-concordant objectives
//!   ([`pnewton`]), both driving the exchange method as the inner solver,
//! * the D-optimal experiment design objective as a ready-made
//!   self-concordant problem ([`dopt`]),
//! * seeded random instance generators ([`generator`]) and a binary
//!   instance file format ([`io`]).

pub mod baselines;
pub mod dopt;
pub mod error;
pub mod generator;
pub mod io;
pub mod lp;
pub mod matrix;
pub mod pnewton;
pub mod problem;
pub mod proj;
pub mod set;
pub mod sqp;
pub mod vector;
pub mod vem;

pub use error::SolverError;
pub use matrix::{CholeskyFactor, ColumnMatrix, DenseSymmetricMatrix};
pub use problem::{kkt_residual, KktCertificate, QpProblem, SolveReport, StartPoint, Termination};
pub use set::{active_sets, preprocess, ActiveSets, GeneralizedSimplex, Reduction};
