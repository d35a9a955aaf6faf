//! Vertex exchange solver for strongly convex quadratics over
//! `F = { x : e^T x = b, l <= x <= u }`.
//!
//! Each iteration moves budget from the coordinate with the largest
//! gradient entry among those that can decrease (`x_s > l_s`) to the one
//! with the smallest among those that can increase (`x_t < u_t`). The step
//! length minimizes the quadratic along `e_t - e_s`, clipped at the first
//! bound hit. Only the two involved matrix columns are touched per
//! iteration, so the cost is `O(n)` once the gradient is warm.
//!
//! The maintained gradient and objective are updated incrementally and
//! recomputed from scratch every [`VemConfig::gradient_refresh_period`]
//! iterations to shed accumulated rounding.

use std::time::{Duration, Instant};

use crate::error::SolverError;
use crate::matrix::ColumnMatrix;
use crate::problem::{
    kkt_residual_with_gradient, QpProblem, SolveReport, StartPoint, Termination,
};
use crate::proj::{proj_generalized_simplex, SsnConfig};
use crate::set::GeneralizedSimplex;
use crate::vector::dot;

/// Which criterion ends the exchange loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationRule {
    /// Stop when `g_s - g_t <= tol * max(1, ||Q||_F)`. The default; costs
    /// nothing beyond the pair selection already being done.
    GapOverQNorm,
    /// Stop when the scaled projected-gradient residual drops below `tol`.
    /// Checked every [`KKT_CHECK_PERIOD`] iterations; each check runs the
    /// dual projection solver.
    KktResidual,
}

/// Cadence of the residual check under [`TerminationRule::KktResidual`].
pub const KKT_CHECK_PERIOD: usize = 10;

#[derive(Clone, Debug)]
pub struct VemConfig {
    /// Tolerance fed to the termination rule. Zero is allowed and means
    /// "run until the gap is exactly nonpositive".
    pub tol: f64,
    pub max_iter: usize,
    pub termination: TerminationRule,
    pub time_limit: Option<Duration>,
    /// Iterations between full gradient and objective recomputations.
    pub gradient_refresh_period: usize,
    /// Coordinates within this distance of a bound count as sitting on it
    /// and are not eligible for exchange in that direction.
    pub boundary_tol: f64,
    /// Settings of the projection subsolver (start-point projection and
    /// residual checks).
    pub ssn: SsnConfig,
}

impl Default for VemConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1_000_000,
            termination: TerminationRule::GapOverQNorm,
            time_limit: None,
            gradient_refresh_period: 100_000,
            boundary_tol: 1e-14,
            ssn: SsnConfig::default(),
        }
    }
}

impl VemConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol >= 0.0) {
            return Err(SolverError::InvalidConfig("tol must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1"));
        }
        if self.gradient_refresh_period == 0 {
            return Err(SolverError::InvalidConfig(
                "gradient_refresh_period must be at least 1",
            ));
        }
        if !(self.boundary_tol >= 0.0) {
            return Err(SolverError::InvalidConfig("boundary_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Read-only snapshot handed to a [`VemObserver`] once per iteration,
/// before the exchange step is taken.
#[derive(Debug)]
pub struct VemView<'a> {
    /// Iterations completed so far.
    pub k: usize,
    pub x: &'a [f64],
    /// Maintained gradient `Qx + c` (refreshed periodically).
    pub g: &'a [f64],
    /// Selected source coordinate (largest eligible gradient entry).
    pub s: usize,
    /// Selected destination coordinate (smallest eligible gradient entry).
    pub t: usize,
    /// `g[s] - g[t]`.
    pub gap: f64,
    /// Maintained objective value at `x`.
    pub objective: f64,
}

/// Caller-supplied stopping rule; returning `true` ends the solve with
/// [`Termination::UserErrorConverged`].
pub trait VemObserver {
    fn inspect(&mut self, view: &VemView<'_>) -> bool;
}

impl<F: FnMut(&VemView<'_>) -> bool> VemObserver for F {
    fn inspect(&mut self, view: &VemView<'_>) -> bool {
        self(view)
    }
}

struct NeverStop;

impl VemObserver for NeverStop {
    fn inspect(&mut self, _view: &VemView<'_>) -> bool {
        false
    }
}

/// Picks the exchange pair `(s, t, g[s] - g[t])` at `x`. `None` when every
/// coordinate is pinned to a bound in the relevant direction (the feasible
/// set is a single point up to `boundary_tol`). Ties break toward the
/// smallest index.
pub fn select_exchange_pair(
    x: &[f64],
    g: &[f64],
    set: &GeneralizedSimplex,
    boundary_tol: f64,
) -> Option<(usize, usize, f64)> {
    let (lower, upper) = (set.lower(), set.upper());
    let mut s: Option<usize> = None;
    let mut t: Option<usize> = None;
    for i in 0..x.len() {
        if x[i] - lower[i] > boundary_tol && s.map_or(true, |j| g[i] > g[j]) {
            s = Some(i);
        }
        if upper[i] - x[i] > boundary_tol && t.map_or(true, |j| g[i] < g[j]) {
            t = Some(i);
        }
    }
    match (s, t) {
        (Some(s), Some(t)) => Some((s, t, g[s] - g[t])),
        _ => None,
    }
}

/// Exchange step length at `x` for the pair `(s, t)`: the unconstrained
/// minimizer `(g_s - g_t) / (Q_ss + Q_tt - 2 Q_st)` clipped to the bound
/// gaps `x_s - l_s` and `u_t - x_t`. Errors when the curvature along the
/// exchange direction is not positive.
pub fn optimal_step(
    problem: &QpProblem,
    x: &[f64],
    s: usize,
    t: usize,
) -> Result<f64, SolverError> {
    let n = problem.dim();
    if x.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: x.len() });
    }
    if s >= n || t >= n || s == t {
        return Err(SolverError::Degenerate("exchange pair must be two distinct coordinates"));
    }
    let col_s = problem.q().column(s);
    let col_t = problem.q().column(t);
    let denom = col_s[s] + col_t[t] - col_s[t] - col_t[s];
    if denom <= 0.0 {
        return Err(SolverError::NonPositiveCurvature { s, t, value: denom });
    }
    let gap = (dot(col_s, x) + problem.c()[s]) - (dot(col_t, x) + problem.c()[t]);
    let eta_max = (x[s] - problem.set().lower()[s]).min(problem.set().upper()[t] - x[t]);
    Ok((gap / denom).min(eta_max))
}

/// Runs the exchange method from `start` with the default (never-firing)
/// observer.
pub fn vem_solve(
    problem: &QpProblem,
    start: StartPoint,
    cfg: &VemConfig,
) -> Result<SolveReport, SolverError> {
    vem_solve_observed(problem, start, cfg, &mut NeverStop)
}

/// Runs the exchange method, showing the observer each iterate before the
/// step. The observer can end the solve early (for example when an inner
/// solve has become accurate enough for its caller).
pub fn vem_solve_observed<O: VemObserver>(
    problem: &QpProblem,
    start: StartPoint,
    cfg: &VemConfig,
    observer: &mut O,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let x0 = resolve_start(problem.set(), start, &cfg.ssn)?;
    vem_core(problem.q(), problem.c(), problem.set(), x0, cfg, observer)
}

/// Turns a [`StartPoint`] into a vector that satisfies the bounds exactly
/// and the budget to working accuracy.
pub(crate) fn resolve_start(
    set: &GeneralizedSimplex,
    start: StartPoint,
    ssn: &SsnConfig,
) -> Result<Vec<f64>, SolverError> {
    match start {
        StartPoint::Feasible(mut x) => {
            if x.len() != set.dim() {
                return Err(SolverError::DimensionMismatch {
                    expected: set.dim(),
                    got: x.len(),
                });
            }
            if set.bounds_violation(&x) > 1e-12 {
                return Err(SolverError::Infeasible("start point violates the bounds"));
            }
            if set.budget_violation(&x).abs() > 1e-8 * set.b().abs().max(1.0) {
                return Err(SolverError::Infeasible("start point violates the budget"));
            }
            set.clamp_to_bounds(&mut x);
            Ok(x)
        }
        StartPoint::Project(x) => proj_generalized_simplex(&x, set, ssn),
    }
}

fn refresh_gradient<M: ColumnMatrix>(q: &M, c: &[f64], x: &[f64], g: &mut [f64]) {
    q.matvec(x, g);
    for i in 0..g.len() {
        g[i] += c[i];
    }
}

/// Exchange loop over any column-access matrix. `x` must already satisfy
/// the bounds exactly.
pub(crate) fn vem_core<M: ColumnMatrix, O: VemObserver>(
    q: &M,
    c: &[f64],
    set: &GeneralizedSimplex,
    mut x: Vec<f64>,
    cfg: &VemConfig,
    observer: &mut O,
) -> Result<SolveReport, SolverError> {
    let n = set.dim();
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(c.len(), n);
    let clock = Instant::now();
    let (lower, upper) = (set.lower(), set.upper());

    let gap_scale = match cfg.termination {
        TerminationRule::GapOverQNorm => q.frobenius_norm().max(1.0),
        TerminationRule::KktResidual => 1.0,
    };

    let mut g = vec![0.0; n];
    refresh_gradient(q, c, &x, &mut g);
    // q(x) = (1/2) x^T (g + c) whenever g = Qx + c exactly.
    let mut objective = 0.5 * (dot(&x, &g) + dot(&x, c));

    let mut iterations = 0usize;
    let mut termination = Termination::MaxIterations;

    while iterations < cfg.max_iter {
        if iterations > 0 && iterations % cfg.gradient_refresh_period == 0 {
            refresh_gradient(q, c, &x, &mut g);
            objective = 0.5 * (dot(&x, &g) + dot(&x, c));
        }

        let Some((s, t, gap)) = select_exchange_pair(&x, &g, set, cfg.boundary_tol) else {
            // Every coordinate is pinned; the point is the whole feasible
            // set, hence optimal.
            termination = Termination::GapConverged;
            break;
        };

        // A nonpositive gap certifies optimality under any rule; stepping
        // on it would move backward.
        if gap <= 0.0 {
            termination = Termination::GapConverged;
            break;
        }
        match cfg.termination {
            TerminationRule::GapOverQNorm => {
                if gap <= cfg.tol * gap_scale {
                    termination = Termination::GapConverged;
                    break;
                }
            }
            TerminationRule::KktResidual => {
                if iterations % KKT_CHECK_PERIOD == 0
                    && kkt_residual_with_gradient(set, &x, &g, &cfg.ssn)? <= cfg.tol
                {
                    termination = Termination::ResidualConverged;
                    break;
                }
            }
        }

        let view = VemView { k: iterations, x: &x, g: &g, s, t, gap, objective };
        if observer.inspect(&view) {
            termination = Termination::UserErrorConverged;
            break;
        }

        let col_s = q.column(s);
        let col_t = q.column(t);
        let denom = col_s[s] + col_t[t] - col_s[t] - col_t[s];
        if denom <= 0.0 {
            return Err(SolverError::NonPositiveCurvature { s, t, value: denom });
        }

        let room_s = x[s] - lower[s];
        let room_t = upper[t] - x[t];
        let eta_max = room_s.min(room_t);
        let eta = (gap / denom).min(eta_max);

        let new_s = if eta == room_s { lower[s] } else { x[s] - eta };
        let new_t = if eta == room_t { upper[t] } else { x[t] + eta };
        if new_s == x[s] && new_t == x[t] {
            // The step underflowed both coordinates; the gap sits at the
            // resolution of the arithmetic.
            termination = Termination::GapConverged;
            break;
        }
        x[s] = new_s;
        x[t] = new_t;

        for i in 0..n {
            g[i] += eta * (col_t[i] - col_s[i]);
        }
        objective += (0.5 * denom * eta - gap) * eta;

        iterations += 1;
        if iterations % 256 == 0 {
            if let Some(limit) = cfg.time_limit {
                if clock.elapsed() > limit {
                    termination = Termination::TimeLimit;
                    break;
                }
            }
        }
    }

    // Report exact values at the final iterate, not the incrementally
    // maintained ones.
    refresh_gradient(q, c, &x, &mut g);
    let objective = 0.5 * (dot(&x, &g) + dot(&x, c));
    let kkt = kkt_residual_with_gradient(set, &x, &g, &cfg.ssn)?;
    Ok(SolveReport {
        x,
        objective,
        iterations,
        termination,
        kkt_residual: kkt,
        wall_time: clock.elapsed(),
    })
}
