//! Inexact SQP Newton method for minimizing semismoothly differentiable
//! convex objectives over `F = { x : e^T x = b, l <= x <= u }`.
//!
//! Each outer iteration builds the regularized quadratic model
//!
//! ```text
//!     q_k(x) = (1/2)(x - x^k)^T (V_k + eps_k I)(x - x^k)
//!            + grad f(x^k)^T (x - x^k),
//! ```
//!
//! with `V_k` a generalized Hessian element and
//! `eps_k = tau1 min(tau2, ||G(x^k)||)`, and solves it with the exchange
//! method until the model value is nonpositive and the model's own
//! natural residual drops below `min(rho, ||G||) * ||G||`. A trial point
//! whose residual beats `gamma * f_pre` is taken whole; otherwise a
//! backtracking line search on `f` damps the step. `G` is the natural map
//! `x - Proj_F(x - grad f(x))` and all its norms here are plain Euclidean.

use std::time::{Duration, Instant};

use crate::error::SolverError;
use crate::matrix::{ColumnMatrix, DenseSymmetricMatrix};
use crate::problem::{QpProblem, SolveReport, StartPoint, Termination};
use crate::proj::{proj_generalized_simplex, SsnConfig};
use crate::set::GeneralizedSimplex;
use crate::vem::{vem_solve_observed, VemConfig, VemView};
use crate::vector::{diff_norm2, dot, norm2};

/// Convex objective with a semismooth gradient: enough structure for the
/// SQP model. `hessian_element` returns one element of the B-subdifferential
/// of the gradient; any measurable selection works.
pub trait Sc1Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian_element(&self, x: &[f64]) -> DenseSymmetricMatrix;
}

#[derive(Clone, Debug)]
pub struct SqpConfig {
    /// Armijo slope fraction, in (0, 1/2).
    pub mu: f64,
    /// Full-step acceptance factor against `f_pre`, in (0, 1).
    pub gamma: f64,
    /// Inner residual factor, in (0, 1).
    pub rho: f64,
    /// Line-search backtracking factor, in (0, 1).
    pub delta: f64,
    /// Model regularization scale, in (0, 1).
    pub tau1: f64,
    /// Model regularization cap, in (0, 1).
    pub tau2: f64,
    /// Stop once the Euclidean natural-map norm `||G(x)||` drops here.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub time_limit: Option<Duration>,
    /// Exchange-method settings for the inner QP solves. The default
    /// leaves `tol = 0` so the inner loop stops only through the
    /// certification callback or at an exactly nonpositive gap.
    pub inner: VemConfig,
    /// Projection settings for natural-map evaluations.
    pub ssn: SsnConfig,
}

impl Default for SqpConfig {
    fn default() -> Self {
        Self {
            mu: 0.25,
            gamma: 0.5,
            rho: 0.5,
            delta: 0.5,
            tau1: 0.5,
            tau2: 0.5,
            outer_tol: 1e-8,
            max_outer: 1000,
            time_limit: None,
            inner: VemConfig { tol: 0.0, ..VemConfig::default() },
            ssn: SsnConfig::default(),
        }
    }
}

impl SqpConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(SolverError::InvalidConfig("mu must lie in (0, 1/2)"));
        }
        for (v, name) in [
            (self.gamma, "gamma must lie in (0, 1)"),
            (self.rho, "rho must lie in (0, 1)"),
            (self.delta, "delta must lie in (0, 1)"),
            (self.tau1, "tau1 must lie in (0, 1)"),
            (self.tau2, "tau2 must lie in (0, 1)"),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(SolverError::InvalidConfig(name));
            }
        }
        if !(self.outer_tol > 0.0) {
            return Err(SolverError::InvalidConfig("outer_tol must be positive"));
        }
        if self.max_outer == 0 {
            return Err(SolverError::InvalidConfig("max_outer must be at least 1"));
        }
        Ok(())
    }
}

/// Inner-loop accounting for one solve.
#[derive(Clone, Debug, Default)]
pub struct SqpTrace {
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    /// `||G(x^k)||` at the top of each outer iteration, ending with the
    /// final iterate's value.
    pub g_norms: Vec<f64>,
    /// `f_pre` after each outer iteration; nonincreasing.
    pub f_pre_history: Vec<f64>,
    pub full_steps: usize,
    pub damped_steps: usize,
}

const BACKTRACK_LIMIT: usize = 60;
const EPS_INFLATION_LIMIT: usize = 40;

/// `G(x) = x - Proj_F(x - grad f(x))`; the zero vector exactly at
/// solutions of the constrained problem.
pub fn natural_map<O: Sc1Objective>(
    objective: &O,
    x: &[f64],
    set: &GeneralizedSimplex,
    ssn: &SsnConfig,
) -> Result<Vec<f64>, SolverError> {
    let g = objective.gradient(x);
    natural_map_with_gradient(x, &g, set, ssn)
}

fn natural_map_with_gradient(
    x: &[f64],
    gradient: &[f64],
    set: &GeneralizedSimplex,
    ssn: &SsnConfig,
) -> Result<Vec<f64>, SolverError> {
    let shifted: Vec<f64> = x.iter().zip(gradient).map(|(xi, gi)| xi - gi).collect();
    let p = proj_generalized_simplex(&shifted, set, ssn)?;
    Ok(x.iter().zip(&p).map(|(xi, pi)| xi - pi).collect())
}

pub fn sqp_solve<O: Sc1Objective>(
    objective: &O,
    x0_tilde: &[f64],
    set: &GeneralizedSimplex,
    cfg: &SqpConfig,
) -> Result<SolveReport, SolverError> {
    sqp_solve_traced(objective, x0_tilde, set, cfg).map(|(report, _)| report)
}

pub fn sqp_solve_traced<O: Sc1Objective>(
    objective: &O,
    x0_tilde: &[f64],
    set: &GeneralizedSimplex,
    cfg: &SqpConfig,
) -> Result<(SolveReport, SqpTrace), SolverError> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut trace = SqpTrace::default();

    let mut x = proj_generalized_simplex(x0_tilde, set, &cfg.ssn)?;
    let mut grad = objective.gradient(&x);
    let mut norm_g = norm2(&natural_map_with_gradient(&x, &grad, set, &cfg.ssn)?);
    let mut f_pre = norm_g;
    trace.g_norms.push(norm_g);
    trace.f_pre_history.push(f_pre);

    // Warm start for the inner solver; starts at the caller's raw point.
    let mut x_tilde = x0_tilde.to_vec();

    let mut termination = Termination::MaxIterations;
    while trace.outer_iterations < cfg.max_outer {
        if norm_g <= cfg.outer_tol {
            termination = Termination::ResidualConverged;
            break;
        }
        if let Some(limit) = cfg.time_limit {
            if clock.elapsed() > limit {
                termination = Termination::TimeLimit;
                break;
            }
        }

        let eps0 = cfg.tau1 * cfg.tau2.min(norm_g);
        let rho_bound = cfg.rho.min(norm_g) * norm_g;
        let v = objective.hessian_element(&x);

        let inner = match solve_inner_model(
            &v, eps0, &x, &grad, rho_bound, set, &x_tilde, cfg, clock,
        )? {
            InnerOutcome::Solved(report) => report,
            InnerOutcome::OutOfTime => {
                termination = Termination::TimeLimit;
                break;
            }
        };
        trace.inner_iterations_total += inner.iterations;
        x_tilde = inner.x;

        let grad_tilde = objective.gradient(&x_tilde);
        let g_vec_tilde = natural_map_with_gradient(&x_tilde, &grad_tilde, set, &cfg.ssn)?;
        let norm_g_tilde = norm2(&g_vec_tilde);

        if norm_g_tilde <= cfg.gamma * f_pre {
            x.copy_from_slice(&x_tilde);
            grad = grad_tilde;
            norm_g = norm_g_tilde;
            f_pre = norm_g;
            trace.full_steps += 1;
        } else {
            let dx: Vec<f64> = x_tilde.iter().zip(&x).map(|(t, xi)| t - xi).collect();
            let slope = dot(&grad, &dx);
            let f0 = objective.value(&x);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=BACKTRACK_LIMIT {
                let trial: Vec<f64> =
                    x.iter().zip(&dx).map(|(xi, di)| xi + alpha * di).collect();
                if objective.value(&trial) <= f0 + cfg.mu * alpha * slope {
                    x = trial;
                    accepted = true;
                    break;
                }
                alpha *= cfg.delta;
            }
            if !accepted {
                return Err(SolverError::LineSearchFail(BACKTRACK_LIMIT));
            }
            grad = objective.gradient(&x);
            norm_g = norm2(&natural_map_with_gradient(&x, &grad, set, &cfg.ssn)?);
            if norm_g <= cfg.gamma * f_pre {
                f_pre = norm_g;
            }
            trace.damped_steps += 1;
        }

        trace.outer_iterations += 1;
        trace.g_norms.push(norm_g);
        trace.f_pre_history.push(f_pre);
    }
    if termination == Termination::MaxIterations && norm_g <= cfg.outer_tol {
        termination = Termination::ResidualConverged;
    }

    let scaled_residual = norm_g / (1.0 + norm2(&x));
    let report = SolveReport {
        objective: objective.value(&x),
        x,
        iterations: trace.outer_iterations,
        termination,
        kkt_residual: scaled_residual,
        wall_time: clock.elapsed(),
    };
    Ok((report, trace))
}

enum InnerOutcome {
    Solved(SolveReport),
    OutOfTime,
}

/// Solves the model QP to the two certification criteria, inflating the
/// regularization tenfold whenever the exchange method meets nonpositive
/// curvature (at most [`EPS_INFLATION_LIMIT`] times).
#[allow(clippy::too_many_arguments)]
fn solve_inner_model(
    v: &DenseSymmetricMatrix,
    eps0: f64,
    x_k: &[f64],
    grad_k: &[f64],
    rho_bound: f64,
    set: &GeneralizedSimplex,
    warm: &[f64],
    cfg: &SqpConfig,
    clock: Instant,
) -> Result<InnerOutcome, SolverError> {
    let n = x_k.len();
    let mut eps = eps0;
    for _ in 0..=EPS_INFLATION_LIMIT {
        let h = v.with_shifted_diagonal(eps);
        let mut c_inner = vec![0.0; n];
        h.matvec(x_k, &mut c_inner);
        for i in 0..n {
            c_inner[i] = grad_k[i] - c_inner[i];
        }
        let problem = QpProblem::new(h, c_inner, set.clone())?;

        let mut inner_cfg = cfg.inner.clone();
        if let Some(limit) = cfg.time_limit {
            inner_cfg.time_limit = Some(limit.saturating_sub(clock.elapsed()));
        }
        let mut observer_error = None;
        let mut observer = |view: &VemView<'_>| -> bool {
            if view.k % 50 != 0 {
                return false;
            }
            match model_criteria_hold(view.x, view.g, x_k, grad_k, rho_bound, set, &cfg.ssn) {
                Ok(ok) => ok,
                Err(e) => {
                    observer_error = Some(e);
                    true
                }
            }
        };
        let report = match vem_solve_observed(
            &problem,
            StartPoint::Project(warm.to_vec()),
            &inner_cfg,
            &mut observer,
        ) {
            Ok(report) => report,
            Err(SolverError::NonPositiveCurvature { .. }) => {
                eps *= 10.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(e) = observer_error {
            return Err(e);
        }
        match report.termination {
            Termination::UserErrorConverged => return Ok(InnerOutcome::Solved(report)),
            // A nonpositive exchange gap certifies the model optimum, which
            // satisfies both criteria outright (its residual is zero and its
            // value is at most q_k(x^k) = 0). Re-evaluating them in floating
            // point would reject it: near outer convergence the residual
            // bound is ~||G||^2, below the projection's own noise floor.
            Termination::GapConverged => return Ok(InnerOutcome::Solved(report)),
            Termination::TimeLimit => return Ok(InnerOutcome::OutOfTime),
            _ => {
                return Err(SolverError::InnerSolverStall(
                    "inner QP iteration budget exhausted before certification",
                ))
            }
        }
    }
    Err(SolverError::NonPositiveCurvature { s: 0, t: 0, value: eps })
}

/// The two acceptance criteria for an inner iterate `x` with model
/// gradient `g`: nonpositive model value, evaluated through
/// `q_k(x) = (1/2)(x - x^k)^T (g + grad f(x^k))`, and the model's natural
/// residual within `rho_bound`.
fn model_criteria_hold(
    x: &[f64],
    g: &[f64],
    x_k: &[f64],
    grad_k: &[f64],
    rho_bound: f64,
    set: &GeneralizedSimplex,
    ssn: &SsnConfig,
) -> Result<bool, SolverError> {
    let mut model_value = 0.0;
    for i in 0..x.len() {
        model_value += (x[i] - x_k[i]) * (g[i] + grad_k[i]);
    }
    if 0.5 * model_value > 0.0 {
        return Ok(false);
    }
    let shifted: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - gi).collect();
    let p = proj_generalized_simplex(&shifted, set, ssn)?;
    Ok(diff_norm2(x, &p) <= rho_bound)
}

/// `f(x) = (1/2)||x - target||^2`: the constrained minimizer is the
/// projection of `target`.
#[derive(Clone, Debug)]
pub struct DistanceObjective {
    pub target: Vec<f64>,
}

impl Sc1Objective for DistanceObjective {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.target)
            .map(|(xi, ti)| (xi - ti) * (xi - ti))
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.target).map(|(xi, ti)| xi - ti).collect()
    }

    fn hessian_element(&self, _x: &[f64]) -> DenseSymmetricMatrix {
        DenseSymmetricMatrix::identity(self.target.len())
    }
}

/// A quadratic posed through the SC1 interface, for cross-checking the
/// meta-solver against the exchange method on the same problem.
#[derive(Clone, Debug)]
pub struct QuadraticSc1 {
    pub q: DenseSymmetricMatrix,
    pub c: Vec<f64>,
}

impl Sc1Objective for QuadraticSc1 {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.q.quadratic_form(x) + dot(&self.c, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.q.matvec(x, &mut g);
        for i in 0..x.len() {
            g[i] += self.c[i];
        }
        g
    }

    fn hessian_element(&self, _x: &[f64]) -> DenseSymmetricMatrix {
        self.q.clone()
    }
}

/// `f(x) = -sum log(x_i + shift)`, smooth on every box with
/// `l_i > -shift`.
#[derive(Clone, Debug)]
pub struct ShiftedLogBarrier {
    pub shift: f64,
    pub n: usize,
}

impl Sc1Objective for ShiftedLogBarrier {
    fn value(&self, x: &[f64]) -> f64 {
        -x.iter().map(|xi| (xi + self.shift).ln()).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|xi| -1.0 / (xi + self.shift)).collect()
    }

    fn hessian_element(&self, x: &[f64]) -> DenseSymmetricMatrix {
        let d: Vec<f64> = x
            .iter()
            .map(|xi| 1.0 / ((xi + self.shift) * (xi + self.shift)))
            .collect();
        DenseSymmetricMatrix::from_diagonal(&d)
    }
}
