//! First-order reference solvers: projected gradient, its accelerated
//! variant, and Frank-Wolfe with the open-loop step `1/(k+2)`.
//!
//! These exist for comparison runs, not speed. PG and FISTA are
//! "economical": no objective values are computed inside the loop, only
//! gradients. All three keep every iterate feasible (PG and FISTA through
//! the dual projection solver, Frank-Wolfe by taking convex combinations
//! of feasible points).

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::SolverError;
use crate::matrix::{ColumnMatrix, DenseSymmetricMatrix};
use crate::problem::{
    kkt_residual_with_gradient, QpProblem, SolveReport, StartPoint, Termination,
};
use crate::proj::{proj_generalized_simplex, SsnConfig};
use crate::vem::resolve_start;
use crate::vector::{diff_norm2, norm2};

/// Iterations between scaled natural-residual checks; each check costs a
/// projection (and for FISTA one extra gradient).
const RESIDUAL_CHECK_PERIOD: usize = 10;

#[derive(Clone, Debug)]
pub struct BaselineConfig {
    /// Both stopping rules use this: successive-iterate distance (every
    /// iteration) and scaled natural residual (every
    /// [`RESIDUAL_CHECK_PERIOD`] iterations). The reference setup for
    /// Frank-Wolfe uses `1e-3`.
    pub tol: f64,
    pub max_iter: usize,
    pub time_limit: Option<Duration>,
    /// Gradient Lipschitz constant (largest eigenvalue of `Q`). `None`
    /// means estimate it with [`estimate_lipschitz`] at solve start.
    /// Ignored by Frank-Wolfe.
    pub lipschitz: Option<f64>,
    pub ssn: SsnConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1_000_000,
            time_limit: None,
            lipschitz: None,
            ssn: SsnConfig::default(),
        }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol >= 0.0) {
            return Err(SolverError::InvalidConfig("tol must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1"));
        }
        if let Some(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                return Err(SolverError::InvalidConfig("lipschitz must be positive and finite"));
            }
        }
        Ok(())
    }

    fn resolve_lipschitz(&self, q: &DenseSymmetricMatrix) -> Result<f64, SolverError> {
        let l = self.lipschitz.unwrap_or_else(|| estimate_lipschitz(q));
        if l > 0.0 && l.is_finite() {
            Ok(l)
        } else {
            Err(SolverError::InvalidConfig(
                "gradient Lipschitz constant must be positive",
            ))
        }
    }
}

/// Upper estimate of the largest eigenvalue of `q`: 20 power iterations
/// from a fixed seeded Gaussian start, then a 1% safety inflation.
pub fn estimate_lipschitz(q: &DenseSymmetricMatrix) -> f64 {
    let n = q.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9E37_79B9_7F4A_7C15);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut w = vec![0.0; n];
    let mut lam = 0.0;
    for _ in 0..20 {
        let scale = norm2(&v);
        if scale == 0.0 {
            return 0.0;
        }
        for vi in v.iter_mut() {
            *vi /= scale;
        }
        q.matvec(&v, &mut w);
        lam = norm2(&w);
        std::mem::swap(&mut v, &mut w);
    }
    1.01 * lam
}

/// Projected gradient with the fixed step `1/L`:
/// `x <- Proj_F(x - (Qx + c)/L)`.
pub fn pg_solve(
    problem: &QpProblem,
    start: StartPoint,
    cfg: &BaselineConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let lipschitz = cfg.resolve_lipschitz(problem.q())?;
    let clock = Instant::now();
    let mut x = resolve_start(problem.set(), start, &cfg.ssn)?;
    let mut g = vec![0.0; problem.dim()];

    let mut iterations = 0usize;
    let mut termination = Termination::MaxIterations;
    while iterations < cfg.max_iter {
        if let Some(limit) = cfg.time_limit {
            if clock.elapsed() > limit {
                termination = Termination::TimeLimit;
                break;
            }
        }
        problem.gradient_into(&x, &mut g);
        if iterations % RESIDUAL_CHECK_PERIOD == 0
            && kkt_residual_with_gradient(problem.set(), &x, &g, &cfg.ssn)? <= cfg.tol
        {
            termination = Termination::ResidualConverged;
            break;
        }
        let shifted: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| xi - gi / lipschitz)
            .collect();
        let next = proj_generalized_simplex(&shifted, problem.set(), &cfg.ssn)?;
        let dist = diff_norm2(&next, &x);
        x = next;
        iterations += 1;
        if dist <= cfg.tol {
            termination = Termination::ResidualConverged;
            break;
        }
    }
    finish(problem, x, iterations, termination, &cfg.ssn, clock)
}

/// Accelerated projected gradient: momentum `t_{k+1} = (1+sqrt(1+4t_k^2))/2`,
/// gradient step from the extrapolated point, projection back onto `F`.
/// The extrapolated point may leave `F`; residuals are measured at the
/// feasible iterate `x`.
pub fn fista_solve(
    problem: &QpProblem,
    start: StartPoint,
    cfg: &BaselineConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let lipschitz = cfg.resolve_lipschitz(problem.q())?;
    let clock = Instant::now();
    let x0 = resolve_start(problem.set(), start, &cfg.ssn)?;
    let n = problem.dim();
    let mut x = x0.clone();
    let mut x_prev = x0;
    let mut t = 1.0_f64;
    let mut y = vec![0.0; n];
    let mut g = vec![0.0; n];

    let mut iterations = 0usize;
    let mut termination = Termination::MaxIterations;
    while iterations < cfg.max_iter {
        if let Some(limit) = cfg.time_limit {
            if clock.elapsed() > limit {
                termination = Termination::TimeLimit;
                break;
            }
        }
        if iterations % RESIDUAL_CHECK_PERIOD == 0 {
            problem.gradient_into(&x, &mut g);
            if kkt_residual_with_gradient(problem.set(), &x, &g, &cfg.ssn)? <= cfg.tol {
                termination = Termination::ResidualConverged;
                break;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        problem.gradient_into(&y, &mut g);
        for i in 0..n {
            y[i] -= g[i] / lipschitz;
        }
        let next = proj_generalized_simplex(&y, problem.set(), &cfg.ssn)?;
        let dist = diff_norm2(&next, &x);
        x_prev = std::mem::replace(&mut x, next);
        t = t_next;
        iterations += 1;
        if dist <= cfg.tol {
            // The step starts at the extrapolated point, so two
            // consecutive iterates can sit together far from
            // stationarity; a small step only nominates a stop and the
            // residual at the new point decides it. A rejected stop
            // resets the momentum, making the next step a plain
            // projected-gradient step whose length is trustworthy.
            problem.gradient_into(&x, &mut g);
            if kkt_residual_with_gradient(problem.set(), &x, &g, &cfg.ssn)? <= cfg.tol {
                termination = Termination::ResidualConverged;
                break;
            }
            t = 1.0;
            x_prev = x.clone();
        }
    }
    finish(problem, x, iterations, termination, &cfg.ssn, clock)
}

/// Frank-Wolfe with the open-loop step `1/(k+2)`: move toward the vertex
/// minimizing the linearized objective. No projections, one gradient and
/// one sort per iteration; accuracy stalls at `O(1/k)`.
pub fn fw_solve(
    problem: &QpProblem,
    start: StartPoint,
    cfg: &BaselineConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut x = resolve_start(problem.set(), start, &cfg.ssn)?;
    let n = problem.dim();
    let mut g = vec![0.0; n];

    let mut iterations = 0usize;
    let mut termination = Termination::MaxIterations;
    while iterations < cfg.max_iter {
        if let Some(limit) = cfg.time_limit {
            if clock.elapsed() > limit {
                termination = Termination::TimeLimit;
                break;
            }
        }
        problem.gradient_into(&x, &mut g);
        let (v, _) = crate::lp::lp_minimize(&g, problem.set())?;
        let step = 1.0 / (iterations + 2) as f64;
        let mut dist_sq = 0.0;
        for i in 0..n {
            let move_i = step * (v[i] - x[i]);
            dist_sq += move_i * move_i;
            x[i] += move_i;
        }
        iterations += 1;
        if dist_sq.sqrt() <= cfg.tol {
            termination = Termination::ResidualConverged;
            break;
        }
    }
    finish(problem, x, iterations, termination, &cfg.ssn, clock)
}

fn finish(
    problem: &QpProblem,
    x: Vec<f64>,
    iterations: usize,
    termination: Termination,
    ssn: &SsnConfig,
    clock: Instant,
) -> Result<SolveReport, SolverError> {
    let g = problem.gradient(&x);
    let kkt = kkt_residual_with_gradient(problem.set(), &x, &g, ssn)?;
    Ok(SolveReport {
        objective: problem.objective(&x),
        x,
        iterations,
        termination,
        kkt_residual: kkt,
        wall_time: clock.elapsed(),
    })
}
