//! Euclidean projection onto `F = { x : e^T x = b, l <= x <= u }`.
//!
//! The projection of `xbar` is `P_C(y* e + xbar)` where `P_C` clamps to the
//! box and `y*` is a root of the scalar, nondecreasing, piecewise linear
//! function
//!
//! ```text
//!     phi'(y) = e^T P_C(y e + xbar) - b,
//! ```
//!
//! the derivative of the dual objective `phi`. [`ssn_solve`] finds that
//! root with a damped generalized Newton iteration whose "Hessian" is the
//! number of coordinates currently strictly inside the box; it converges
//! quadratically near the root whenever that count is positive, and falls
//! back to bisection otherwise. Cost per iteration is one pass over `xbar`.

use crate::error::SolverError;
use crate::set::GeneralizedSimplex;
use crate::vector::CompensatedSum;

/// Tuning knobs for [`ssn_solve`]. The defaults drive the residual to
/// machine scale in a handful of iterations on everything the generators
/// produce.
#[derive(Clone, Copy, Debug)]
pub struct SsnConfig {
    /// Stop once `|phi'(y)| <= grad_tol`.
    pub grad_tol: f64,
    /// Newton iteration budget before the bisection safeguard takes over.
    pub max_iter: usize,
    /// Backtracking factor of the line search, in (0, 1).
    pub delta: f64,
    /// Sufficient-decrease slope fraction, in (0, 1/2).
    pub mu: f64,
    /// Hessian regularization scale, in (0, 1): the Newton system uses
    /// `v + tau1 * min(tau2, |phi'|)` so it stays solvable at `v = 0`.
    pub tau1: f64,
    /// Regularization cap, in (0, 1).
    pub tau2: f64,
    /// Initial dual iterate.
    pub y0: f64,
}

impl Default for SsnConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-12,
            max_iter: 50,
            delta: 0.5,
            mu: 0.25,
            tau1: 0.5,
            tau2: 0.5,
            y0: 0.0,
        }
    }
}

impl SsnConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.grad_tol > 0.0) {
            return Err(SolverError::InvalidConfig("grad_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SolverError::InvalidConfig("delta must lie in (0, 1)"));
        }
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(SolverError::InvalidConfig("mu must lie in (0, 1/2)"));
        }
        if !(self.tau1 > 0.0 && self.tau1 < 1.0) {
            return Err(SolverError::InvalidConfig("tau1 must lie in (0, 1)"));
        }
        if !(self.tau2 > 0.0 && self.tau2 < 1.0) {
            return Err(SolverError::InvalidConfig("tau2 must lie in (0, 1)"));
        }
        if !self.y0.is_finite() {
            return Err(SolverError::InvalidConfig("y0 must be finite"));
        }
        Ok(())
    }
}

/// What happened inside [`ssn_solve`]. `|final_phi_prime| <= grad_tol`
/// whenever `used_safeguard` is false.
#[derive(Clone, Debug)]
pub struct SsnTrace {
    /// Newton iterations taken (safeguard bisection steps not included).
    pub iterations: usize,
    /// Accepted dual iterates, starting with `y0`.
    pub y_history: Vec<f64>,
    pub final_phi_prime: f64,
    pub used_safeguard: bool,
}

/// Elementwise clamp of `x` to `[lower, upper]`.
pub fn proj_box(x: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>, SolverError> {
    if x.len() != lower.len() {
        return Err(SolverError::DimensionMismatch {
            expected: lower.len(),
            got: x.len(),
        });
    }
    if x.len() != upper.len() {
        return Err(SolverError::DimensionMismatch {
            expected: upper.len(),
            got: x.len(),
        });
    }
    Ok(x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&l, &u))| v.clamp(l, u))
        .collect())
}

/// Dual objective of the projection problem:
/// `phi(y) = (1/2)||P_C(y e + xbar)||^2 - b y + l^T min(z, 0) + u^T max(z, 0)`
/// with `z = y e + xbar - P_C(y e + xbar)`. Convex and differentiable in `y`.
pub fn phi_value(y: f64, xbar: &[f64], set: &GeneralizedSimplex) -> f64 {
    debug_assert_eq!(xbar.len(), set.dim());
    phi_value_and_scale(y, xbar, set).0
}

/// `phi` together with the summed absolute magnitude of its terms. The
/// second value bounds the rounding floor of the first: each term is
/// computed to a few ulps of its own size, so after cancellation the
/// value is only trustworthy to about `EPSILON` times this scale.
fn phi_value_and_scale(y: f64, xbar: &[f64], set: &GeneralizedSimplex) -> (f64, f64) {
    let (lower, upper) = (set.lower(), set.upper());
    let mut acc = CompensatedSum::new();
    let mut scale = 0.0f64;
    for i in 0..xbar.len() {
        let w = y + xbar[i];
        let p = w.clamp(lower[i], upper[i]);
        let mut elem = 0.5 * p * p;
        let mut mag = elem;
        if w < lower[i] {
            let t = lower[i] * (w - lower[i]);
            elem += t;
            mag += t.abs();
        } else if w > upper[i] {
            let t = upper[i] * (w - upper[i]);
            elem += t;
            mag += t.abs();
        }
        acc.add(elem);
        scale += mag;
    }
    let shift = set.b() * y;
    (acc.value() - shift, scale + shift.abs())
}

/// `phi'(y) = e^T P_C(y e + xbar) - b`. Nondecreasing in `y`; compensated
/// summation keeps the value meaningful down to machine scale even for
/// million-entry vectors.
pub fn phi_prime(y: f64, xbar: &[f64], set: &GeneralizedSimplex) -> f64 {
    debug_assert_eq!(xbar.len(), set.dim());
    let (lower, upper) = (set.lower(), set.upper());
    let mut acc = CompensatedSum::new();
    for i in 0..xbar.len() {
        acc.add((y + xbar[i]).clamp(lower[i], upper[i]));
    }
    acc.value() - set.b()
}

/// Number of coordinates with `l_i <= y + xbar_i <= u_i` (closed
/// intervals), the generalized second derivative of `phi` at `y`.
pub fn generalized_hessian_scalar(y: f64, xbar: &[f64], set: &GeneralizedSimplex) -> f64 {
    debug_assert_eq!(xbar.len(), set.dim());
    let (lower, upper) = (set.lower(), set.upper());
    let mut count = 0usize;
    for i in 0..xbar.len() {
        let w = y + xbar[i];
        if w >= lower[i] && w <= upper[i] {
            count += 1;
        }
    }
    count as f64
}

/// `phi'` and the interior count in one pass.
fn prime_and_count(y: f64, xbar: &[f64], set: &GeneralizedSimplex) -> (f64, f64) {
    let (lower, upper) = (set.lower(), set.upper());
    let mut acc = CompensatedSum::new();
    let mut count = 0usize;
    for i in 0..xbar.len() {
        let w = y + xbar[i];
        if w < lower[i] {
            acc.add(lower[i]);
        } else if w > upper[i] {
            acc.add(upper[i]);
        } else {
            acc.add(w);
            count += 1;
        }
    }
    (acc.value() - set.b(), count as f64)
}

/// Cheap starting guess: the uniform shift that would fix the budget if no
/// bound became active, `(b - e^T P_C(xbar)) / n`.
pub fn warm_start_y(xbar: &[f64], set: &GeneralizedSimplex) -> f64 {
    let d = phi_prime(0.0, xbar, set);
    -d / xbar.len() as f64
}

const BACKTRACK_LIMIT: usize = 60;

/// Solves `phi'(y) = 0` by damped semismooth Newton.
///
/// Returns the root and a trace. If the Newton loop exhausts its budget,
/// stalls, or a line search fails, a doubling-bracket bisection finishes
/// the job and the trace says so; the only hard error besides bad input is
/// an infeasible set (no bracket exists unless `e^T l < b < e^T u`).
pub fn ssn_solve(
    xbar: &[f64],
    set: &GeneralizedSimplex,
    cfg: &SsnConfig,
) -> Result<(f64, SsnTrace), SolverError> {
    cfg.validate()?;
    if xbar.len() != set.dim() {
        return Err(SolverError::DimensionMismatch {
            expected: set.dim(),
            got: xbar.len(),
        });
    }
    if !(set.lower_sum() < set.b() && set.b() < set.upper_sum()) {
        return Err(SolverError::Infeasible(
            "budget not strictly between the bound sums",
        ));
    }

    let mut y = cfg.y0;
    let (mut dphi, mut v) = prime_and_count(y, xbar, set);
    let mut history = vec![y];
    let mut iterations = 0usize;
    let mut clean_exit = false;

    while iterations < cfg.max_iter {
        if dphi.abs() <= cfg.grad_tol {
            clean_exit = true;
            break;
        }
        let eps = cfg.tau1 * cfg.tau2.min(dphi.abs());
        let dy = -dphi / (v + eps);
        let slope = dphi * dy;
        debug_assert!(slope < 0.0);

        let (phi0, phi_scale) = phi_value_and_scale(y, xbar, set);
        // Each evaluation of phi is trustworthy only to a few ulps of the
        // summed term magnitudes, not of the (heavily cancelled) result.
        // Near the root the true decrease is quadratic in the dual error
        // and falls below that floor, where a literal sufficient-decrease
        // test rejects exact Newton steps on rounding noise. The allowance
        // admits a step whenever the measured increase is within the
        // floor; it changes nothing while decreases are still measurable.
        let noise = 16.0 * f64::EPSILON * (1.0 + phi_scale);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=BACKTRACK_LIMIT {
            let trial = y + alpha * dy;
            if phi_value(trial, xbar, set) <= phi0 + cfg.mu * alpha * slope + noise {
                accepted = Some(trial);
                break;
            }
            alpha *= cfg.delta;
        }
        let Some(next) = accepted else { break };
        if next == y {
            // The step underflowed; Newton cannot move any further.
            break;
        }
        y = next;
        (dphi, v) = prime_and_count(y, xbar, set);
        history.push(y);
        iterations += 1;
    }
    if !clean_exit && dphi.abs() <= cfg.grad_tol {
        clean_exit = true;
    }

    if clean_exit {
        return Ok((
            y,
            SsnTrace {
                iterations,
                y_history: history,
                final_phi_prime: dphi,
                used_safeguard: false,
            },
        ));
    }

    let (yb, db) = bisect_root(xbar, set, cfg.grad_tol, cfg.y0);
    // Keep whichever of the Newton iterate and the bisection result sits
    // closer to the root.
    let (y, dphi) = if db.abs() <= dphi.abs() { (yb, db) } else { (y, dphi) };
    history.push(y);
    Ok((
        y,
        SsnTrace {
            iterations,
            y_history: history,
            final_phi_prime: dphi,
            used_safeguard: true,
        },
    ))
}

/// Doubling bracket around `start`, then bisection. `phi'` is
/// nondecreasing, so a sign change brackets a root; strict budget
/// interiority guarantees the bracket exists at finite `y`.
fn bisect_root(xbar: &[f64], set: &GeneralizedSimplex, grad_tol: f64, start: f64) -> (f64, f64) {
    let eval = |y: f64| phi_prime(y, xbar, set);
    let mut radius = 1.0;
    let mut lo = start - radius;
    let mut hi = start + radius;
    let (mut dlo, mut dhi) = (eval(lo), eval(hi));
    loop {
        if dlo.abs() <= grad_tol {
            return (lo, dlo);
        }
        if dhi.abs() <= grad_tol {
            return (hi, dhi);
        }
        if dlo > 0.0 {
            hi = lo;
            dhi = dlo;
            radius *= 2.0;
            lo -= radius;
            dlo = eval(lo);
        } else if dhi < 0.0 {
            lo = hi;
            dlo = dhi;
            radius *= 2.0;
            hi += radius;
            dhi = eval(hi);
        } else {
            break;
        }
    }
    let mut best = if dlo.abs() <= dhi.abs() { (lo, dlo) } else { (hi, dhi) };
    while hi - lo > f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = eval(mid);
        if d.abs() < best.1.abs() {
            best = (mid, d);
        }
        if d.abs() <= grad_tol {
            return (mid, d);
        }
        if d < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Projection of `xbar` onto the feasible set: solves the dual root
/// problem and clamps the shifted point.
pub fn proj_generalized_simplex(
    xbar: &[f64],
    set: &GeneralizedSimplex,
    cfg: &SsnConfig,
) -> Result<Vec<f64>, SolverError> {
    let (y, _) = ssn_solve(xbar, set, cfg)?;
    proj_box(
        &xbar.iter().map(|&v| v + y).collect::<Vec<f64>>(),
        set.lower(),
        set.upper(),
    )
}
