//! Inexact projected Newton method for self-concordant minimization over
//! `F = { x : e^T x = b, l <= x <= u }`.
//!
//! Self-concordance buys an explicit damped step size in place of a line
//! search. Each outer iteration minimizes the Hessian model
//!
//! ```text
//!     q_k(x) = (1/2)(x - x^k)^T H_k (x - x^k) + grad f(x^k)^T (x - x^k)
//! ```
//!
//! over `F` until the linear-oracle certificate
//! `max_{x in F} grad q_k(x~)^T (x~ - x) <= xi_k` holds, then either takes
//! the full step (inside the region where `gamma + xi <= h_inverse(beta)`,
//! or once `lambda` has started contracting) or damps the step by
//! `delta (gamma^2 - xi^2) / (gamma^3 + gamma^2 - xi^2 gamma)`. The scalar
//! `lambda` shrinks by `sigma` exactly on contraction steps and the solve
//! stops once it reaches `lambda_stop`.

use std::time::{Duration, Instant};

use crate::error::SolverError;
use crate::lp::linear_gap;
use crate::matrix::{ColumnMatrix, DenseSymmetricMatrix};
use crate::problem::{kkt_residual_with_gradient, QpProblem, SolveReport, StartPoint, Termination};
use crate::set::GeneralizedSimplex;
use crate::vem::{vem_solve_observed, VemConfig, VemView};
use crate::vector::{dot, norm2};

/// Objective with the structure the projected Newton method needs. The
/// feasible set need not lie inside the domain; the solver keeps iterates
/// interior and `in_domain` guards every accepted step.
pub trait SelfConcordantObjective {
    fn in_domain(&self, x: &[f64]) -> bool;
    /// Errors with [`SolverError::DomainError`] outside the domain.
    fn value(&self, x: &[f64]) -> Result<f64, SolverError>;
    /// Callers guarantee `x` in-domain.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Callers guarantee `x` in-domain; positive semidefinite there.
    fn hessian(&self, x: &[f64]) -> DenseSymmetricMatrix;
}

/// Which method solves the per-iteration QP model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpSubsolver {
    /// Pairwise exchange steps; O(n) per iteration after the first
    /// gradient, certificate checked every 50 iterations.
    Vem,
    /// Away-step Frank-Wolfe with exact line search, O(n) per iteration
    /// through an incrementally maintained gradient; the certificate is
    /// checked every iteration because the linear oracle doubles as the
    /// direction finder. Away steps need the vertex decomposition to be
    /// readable off the point itself, so this subsolver only accepts
    /// scaled-simplex sets: `l = 0` and `u_i >= b` (plain Frank-Wolfe
    /// steps cannot certify shrinking bounds; their gap decays as 1/k).
    FrankWolfe,
}

#[derive(Clone, Debug)]
pub struct PnConfig {
    /// Region parameter, in (0, 1/20).
    pub beta: f64,
    /// Contraction factor for `lambda` and `xi`, in (0, 1).
    pub sigma: f64,
    /// Certificate scale divisor, > 1.
    pub c: f64,
    /// Certificate scale cap against `h_inverse(beta)`, in (0, 1/2).
    pub c1: f64,
    /// Damped-step scale, in (0, 1).
    pub delta: f64,
    /// Stop once `lambda` drops here.
    pub lambda_stop: f64,
    pub max_outer: usize,
    pub time_limit: Option<Duration>,
    pub subsolver: QpSubsolver,
    /// Settings for the inner QP solves; `inner.max_iter` also caps the
    /// Frank-Wolfe subsolver.
    pub inner: VemConfig,
}

impl Default for PnConfig {
    fn default() -> Self {
        Self {
            beta: 0.04,
            sigma: 0.5,
            c: 25.0,
            c1: 0.25,
            delta: 0.9,
            lambda_stop: 1e-3,
            max_outer: 1000,
            time_limit: None,
            subsolver: QpSubsolver::Vem,
            inner: VemConfig { tol: 0.0, ..VemConfig::default() },
        }
    }
}

impl PnConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.beta > 0.0 && self.beta < 0.05) {
            return Err(SolverError::InvalidConfig("beta must lie in (0, 1/20)"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(SolverError::InvalidConfig("sigma must lie in (0, 1)"));
        }
        if !(self.c > 1.0) {
            return Err(SolverError::InvalidConfig("c must exceed 1"));
        }
        if !(self.c1 > 0.0 && self.c1 < 0.5) {
            return Err(SolverError::InvalidConfig("c1 must lie in (0, 1/2)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SolverError::InvalidConfig("delta must lie in (0, 1)"));
        }
        if !(self.lambda_stop > 0.0) {
            return Err(SolverError::InvalidConfig("lambda_stop must be positive"));
        }
        if self.max_outer == 0 {
            return Err(SolverError::InvalidConfig("max_outer must be at least 1"));
        }
        let b = self.beta;
        let lhs1 = 1.0 / (self.c * (1.0 - b)) + b / ((1.0 - 2.0 * b) * (1.0 - b) * (1.0 - b));
        if lhs1 > self.sigma {
            return Err(SolverError::InvalidConfig(
                "1/(c(1-beta)) + beta/((1-2beta)(1-beta)^2) must not exceed sigma",
            ));
        }
        if 1.0 / self.c + 1.0 / (1.0 - 2.0 * b) > 2.0 {
            return Err(SolverError::InvalidConfig(
                "1/c + 1/(1-2beta) must not exceed 2",
            ));
        }
        Ok(())
    }
}

/// Outer-loop accounting for one solve.
#[derive(Clone, Debug, Default)]
pub struct PnTrace {
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    /// Wall time spent inside the QP subsolver.
    pub qp_time: Duration,
    pub final_lambda: f64,
    pub full_steps: usize,
    pub damped_steps: usize,
}

/// `h(tau) = tau(1 - 2 tau + 2 tau^2) / ((1 - 2 tau)(1 - tau)^2 - tau^2)`,
/// increasing from 0 on `[0, tau_bar)` where `tau_bar ~ 0.3516` is the
/// denominator's root.
pub fn h_func(tau: f64) -> Result<f64, SolverError> {
    let den = h_denominator(tau);
    if den <= 0.0 {
        return Err(SolverError::DomainError);
    }
    Ok(tau * (1.0 - 2.0 * tau + 2.0 * tau * tau) / den)
}

fn h_denominator(tau: f64) -> f64 {
    (1.0 - 2.0 * tau) * (1.0 - tau) * (1.0 - tau) - tau * tau
}

/// Derivative of `h` on its domain, for Newton polishing in [`h_inverse`].
/// With numerator `n = tau - 2 tau^2 + 2 tau^3` and denominator
/// `d = 1 - 4 tau + 4 tau^2 - 2 tau^3`: `h' = (n' d - n d') / d^2`.
fn h_derivative(tau: f64) -> f64 {
    let n = tau - 2.0 * tau * tau + 2.0 * tau * tau * tau;
    let np = 1.0 - 4.0 * tau + 6.0 * tau * tau;
    let d = 1.0 - 4.0 * tau + 4.0 * tau * tau - 2.0 * tau * tau * tau;
    let dp = -4.0 + 8.0 * tau - 6.0 * tau * tau;
    (np * d - n * dp) / (d * d)
}

/// Inverts `h` by bisection with Newton steps that are kept only while
/// they stay inside the shrinking bracket. `h` grows without bound toward
/// the domain edge, so every `v >= 0` is attained.
pub fn h_inverse(v: f64, tol: f64) -> f64 {
    assert!(v >= 0.0, "h_inverse needs a nonnegative argument");
    if v == 0.0 {
        return 0.0;
    }
    // Bracket the domain edge from below.
    let mut edge_lo = 0.0;
    let mut edge_hi = 0.4;
    for _ in 0..80 {
        let mid = 0.5 * (edge_lo + edge_hi);
        if h_denominator(mid) > 0.0 {
            edge_lo = mid;
        } else {
            edge_hi = mid;
        }
    }

    let mut lo = 0.0;
    let mut hi = edge_lo;
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..200 {
        let err = h_func(tau).expect("bracket stays in-domain") - v;
        if err.abs() <= tol {
            return tau;
        }
        if err < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let newton = tau - err / h_derivative(tau);
        tau = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    tau
}

/// `omega(tau) = tau - ln(1 + tau)`; the self-concordant decrease measure.
pub fn omega(tau: f64) -> Result<f64, SolverError> {
    if tau <= -1.0 {
        return Err(SolverError::DomainError);
    }
    Ok(tau - (1.0 + tau).ln())
}

/// `sqrt(d^T H d)` for positive semidefinite `H`. Rounding may push the
/// quadratic form slightly negative; values within `1e-10 ||d||^2 ||H||_F`
/// of zero clamp to 0, anything lower is a caller error.
pub fn local_norm(h: &DenseSymmetricMatrix, d: &[f64]) -> Result<f64, SolverError> {
    let form = h.quadratic_form(d);
    if form >= 0.0 {
        return Ok(form.sqrt());
    }
    let nd = norm2(d);
    if form < -1e-10 * nd * nd * h.frobenius_norm() {
        return Err(SolverError::NegativeQuadraticForm(form));
    }
    Ok(0.0)
}

pub fn pn_solve<O: SelfConcordantObjective>(
    objective: &O,
    x0: &[f64],
    set: &GeneralizedSimplex,
    cfg: &PnConfig,
) -> Result<SolveReport, SolverError> {
    pn_solve_traced(objective, x0, set, cfg).map(|(report, _)| report)
}

pub fn pn_solve_traced<O: SelfConcordantObjective>(
    objective: &O,
    x0: &[f64],
    set: &GeneralizedSimplex,
    cfg: &PnConfig,
) -> Result<(SolveReport, PnTrace), SolverError> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut trace = PnTrace::default();

    if x0.len() != set.dim() {
        return Err(SolverError::DimensionMismatch { expected: set.dim(), got: x0.len() });
    }
    if set.bounds_violation(x0) > 1e-12
        || set.budget_violation(x0).abs() > 1e-8 * set.b().abs().max(1.0)
    {
        return Err(SolverError::Infeasible("start point must lie in the feasible set"));
    }
    let mut x = x0.to_vec();
    set.clamp_to_bounds(&mut x);
    if !objective.in_domain(&x) {
        return Err(SolverError::DomainError);
    }

    let h_inv_beta = h_inverse(cfg.beta, 1e-14);
    let mut lambda = cfg.beta / cfg.sigma;
    let mut xi = (cfg.beta / cfg.c).min(cfg.c1 * h_inv_beta);
    let mut x_tilde = x.clone();

    let mut termination = Termination::MaxIterations;
    while trace.outer_iterations < cfg.max_outer {
        if let Some(limit) = cfg.time_limit {
            if clock.elapsed() > limit {
                termination = Termination::TimeLimit;
                break;
            }
        }
        let grad = objective.gradient(&x);
        let hess = objective.hessian(&x);

        let n = x.len();
        let mut c_inner = vec![0.0; n];
        hess.matvec(&x, &mut c_inner);
        for i in 0..n {
            c_inner[i] = grad[i] - c_inner[i];
        }
        let problem = QpProblem::new(hess, c_inner, set.clone())?;

        let qp_clock = Instant::now();
        let inner = match solve_model(&problem, &x_tilde, xi, cfg, clock)? {
            ModelOutcome::Certified { x, iterations } => {
                trace.qp_time += qp_clock.elapsed();
                trace.inner_iterations_total += iterations;
                x
            }
            ModelOutcome::OutOfTime => {
                trace.qp_time += qp_clock.elapsed();
                termination = Termination::TimeLimit;
                break;
            }
        };
        x_tilde = inner;

        let dx: Vec<f64> = x_tilde.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let gamma = local_norm(problem.q(), &dx)?;

        let contract = gamma + xi <= h_inv_beta || lambda <= cfg.beta;
        let next: Vec<f64> = if contract {
            lambda *= cfg.sigma;
            xi *= cfg.sigma;
            trace.full_steps += 1;
            x_tilde.clone()
        } else {
            // gamma > xi here: xi never exceeds c1 h_inverse(beta) with
            // c1 < 1/2 while gamma + xi > h_inverse(beta).
            let denom = gamma * gamma * gamma + gamma * gamma - xi * xi * gamma;
            assert!(denom > 0.0, "damped-step denominator must be positive");
            let alpha = cfg.delta * (gamma * gamma - xi * xi) / denom;
            trace.damped_steps += 1;
            x.iter().zip(&dx).map(|(xi_, di)| xi_ + alpha * di).collect()
        };
        if !objective.in_domain(&next) {
            return Err(SolverError::DomainViolation(trace.outer_iterations));
        }
        x = next;
        trace.outer_iterations += 1;

        if lambda <= cfg.lambda_stop {
            termination = Termination::ResidualConverged;
            break;
        }
    }
    trace.final_lambda = lambda;

    let grad_final = objective.gradient(&x);
    let kkt = kkt_residual_with_gradient(set, &x, &grad_final, &cfg.inner.ssn)?;
    let report = SolveReport {
        objective: objective.value(&x)?,
        x,
        iterations: trace.outer_iterations,
        termination,
        kkt_residual: kkt,
        wall_time: clock.elapsed(),
    };
    Ok((report, trace))
}

enum ModelOutcome {
    Certified { x: Vec<f64>, iterations: usize },
    OutOfTime,
}

fn solve_model(
    problem: &QpProblem,
    warm: &[f64],
    xi: f64,
    cfg: &PnConfig,
    clock: Instant,
) -> Result<ModelOutcome, SolverError> {
    let mut inner_cfg = cfg.inner.clone();
    if let Some(limit) = cfg.time_limit {
        inner_cfg.time_limit = Some(limit.saturating_sub(clock.elapsed()));
    }
    match cfg.subsolver {
        QpSubsolver::Vem => {
            let set = problem.set();
            let mut observer_error = None;
            let mut observer = |view: &VemView<'_>| -> bool {
                if view.k % 50 != 0 {
                    return false;
                }
                match linear_gap(view.g, view.x, set) {
                    Ok(gap) => gap <= xi,
                    Err(e) => {
                        observer_error = Some(e);
                        true
                    }
                }
            };
            let report = vem_solve_observed(
                problem,
                StartPoint::Feasible(warm.to_vec()),
                &inner_cfg,
                &mut observer,
            )?;
            if let Some(e) = observer_error {
                return Err(e);
            }
            match report.termination {
                // An exact model optimum has certificate value <= 0 < xi.
                Termination::UserErrorConverged | Termination::GapConverged => {
                    Ok(ModelOutcome::Certified { x: report.x, iterations: report.iterations })
                }
                Termination::TimeLimit => Ok(ModelOutcome::OutOfTime),
                _ => Err(SolverError::InnerSolverStall(
                    "QP subsolver exhausted its budget before certifying",
                )),
            }
        }
        QpSubsolver::FrankWolfe => fw_model_solve(problem, warm, xi, &inner_cfg, clock),
    }
}

/// Away-step Frank-Wolfe on the QP model over a scaled simplex
/// `{ x : e^T x = b, 0 <= x <= u }` with `u_i >= b`, whose vertices are
/// `b e_i` and whose vertex weights are `x_i / b`. Every iteration picks
/// the better of the toward-vertex and away-from-vertex directions and
/// takes the exact quadratic line-search step. With `H x = g - c` in
/// hand, `H d` for either direction is one column plus one axpy, so an
/// iteration costs O(n); the gradient is refreshed from scratch on the
/// usual period to shed accumulated rounding.
fn fw_model_solve(
    problem: &QpProblem,
    warm: &[f64],
    xi: f64,
    inner_cfg: &VemConfig,
    clock: Instant,
) -> Result<ModelOutcome, SolverError> {
    let n = problem.dim();
    let set = problem.set();
    let b = set.b();
    if !(b > 0.0)
        || set.lower().iter().any(|&l| l != 0.0)
        || set.upper().iter().any(|&u| u < b)
    {
        return Err(SolverError::InvalidConfig(
            "the Frank-Wolfe subsolver needs a scaled-simplex set (l = 0, u_i >= b)",
        ));
    }
    let c = problem.c();
    let mut x = warm.to_vec();
    set.clamp_to_bounds(&mut x);
    let mut g = problem.gradient(&x);
    let mut hd = vec![0.0; n];

    for k in 0..inner_cfg.max_iter {
        if k > 0 && k % inner_cfg.gradient_refresh_period == 0 {
            g = problem.gradient(&x);
        }
        let mut t = 0;
        let mut s = usize::MAX;
        for i in 0..n {
            if g[i] < g[t] {
                t = i;
            }
            if x[i] > 0.0 && (s == usize::MAX || g[i] > g[s]) {
                s = i;
            }
        }
        let gx = dot(&g, &x);
        let fw_gap = gx - b * g[t];
        if fw_gap <= xi {
            return Ok(ModelOutcome::Certified { x, iterations: k });
        }
        let away_gap = if s == usize::MAX { 0.0 } else { b * g[s] - gx };

        if fw_gap >= away_gap {
            // d = b e_t - x; H d = b Q[:,t] - (g - c).
            let col = problem.q().column(t);
            for i in 0..n {
                hd[i] = b * col[i] - (g[i] - c[i]);
            }
            let curvature = b * hd[t] - dot(&x, &hd);
            let eta =
                if curvature > 0.0 { (fw_gap / curvature).clamp(0.0, 1.0) } else { 1.0 };
            for i in 0..n {
                x[i] *= 1.0 - eta;
                g[i] += eta * hd[i];
            }
            x[t] += eta * b;
        } else {
            // d = x - b e_s; H d = (g - c) - b Q[:,s].
            let col = problem.q().column(s);
            for i in 0..n {
                hd[i] = (g[i] - c[i]) - b * col[i];
            }
            let curvature = dot(&x, &hd) - b * hd[s];
            // Keeps coordinate s nonnegative; s never carries the whole
            // budget here since its away gap would then be zero.
            let eta_max = x[s] / (b - x[s]);
            let eta = if curvature > 0.0 {
                (away_gap / curvature).min(eta_max).max(0.0)
            } else {
                eta_max
            };
            if !eta.is_finite() {
                return Err(SolverError::Degenerate(
                    "away step has no finite length",
                ));
            }
            let new_s = if eta == eta_max { 0.0 } else { (1.0 + eta) * x[s] - eta * b };
            for i in 0..n {
                x[i] *= 1.0 + eta;
                g[i] += eta * hd[i];
            }
            x[s] = new_s;
        }
        if k % 256 == 0 {
            if let Some(limit) = inner_cfg.time_limit {
                if clock.elapsed() > limit {
                    return Ok(ModelOutcome::OutOfTime);
                }
            }
        }
    }
    Err(SolverError::InnerSolverStall(
        "QP subsolver exhausted its budget before certifying",
    ))
}

/// `f(x) = -sum log x_i` on the positive orthant; the canonical
/// self-concordant barrier.
#[derive(Clone, Debug)]
pub struct LogBarrier {
    pub n: usize,
}

impl SelfConcordantObjective for LogBarrier {
    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v > 0.0)
    }

    fn value(&self, x: &[f64]) -> Result<f64, SolverError> {
        if !self.in_domain(x) {
            return Err(SolverError::DomainError);
        }
        Ok(-x.iter().map(|v| v.ln()).sum::<f64>())
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -1.0 / v).collect()
    }

    fn hessian(&self, x: &[f64]) -> DenseSymmetricMatrix {
        let d: Vec<f64> = x.iter().map(|v| 1.0 / (v * v)).collect();
        DenseSymmetricMatrix::from_diagonal(&d)
    }
}
