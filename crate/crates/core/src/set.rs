//! The feasible set `F = { x : e^T x = b, l <= x <= u }` and the structural
//! preprocessing that reduces it to a strictly interior instance.

use crate::error::SolverError;
use crate::vector::{compensated_sum, CompensatedSum};

/// A box intersected with a single budget hyperplane.
///
/// Construction checks shape only: equal-length finite bound vectors with
/// `l <= u` elementwise. Whether the budget is attainable, and whether the
/// strict interiority the solvers assume holds (`l < u`,
/// `e^T l < b < e^T u`), is the business of
/// [`GeneralizedSimplex::has_strict_interior`] and [`preprocess`]; solvers
/// report `Infeasible` when it fails.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedSimplex {
    b: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl GeneralizedSimplex {
    pub fn new(b: f64, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SolverError> {
        if lower.len() != upper.len() {
            return Err(SolverError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(SolverError::InvalidConfig("empty bound vectors"));
        }
        if !b.is_finite() {
            return Err(SolverError::InvalidConfig("budget is not finite"));
        }
        for i in 0..lower.len() {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(SolverError::InvalidConfig("bounds contain non-finite entries"));
            }
            if lower[i] > upper[i] {
                return Err(SolverError::Infeasible("lower bound exceeds upper bound"));
            }
        }
        Ok(Self { b, lower, upper })
    }

    /// The standard simplex `{ x >= 0, e^T x = 1 }` with unit upper bounds.
    pub fn standard(n: usize) -> Self {
        Self {
            b: 1.0,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower_sum(&self) -> f64 {
        compensated_sum(&self.lower)
    }

    pub fn upper_sum(&self) -> f64 {
        compensated_sum(&self.upper)
    }

    /// Strict interiority: `l < u` elementwise and `e^T l < b < e^T u`.
    /// Every iterative solver in the crate assumes this.
    pub fn has_strict_interior(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| l < u)
            && self.lower_sum() < self.b
            && self.upper_sum() > self.b
    }

    /// `|e^T x - b|`, compensated.
    pub fn budget_violation(&self, x: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for &v in x {
            acc.add(v);
        }
        (acc.value() - self.b).abs()
    }

    /// Largest overshoot of a box bound (0 when `l <= x <= u` holds).
    pub fn bounds_violation(&self, x: &[f64]) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..x.len() {
            m = m.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        m.max(0.0)
    }

    /// The feasibility every solver report guarantees:
    /// `|e^T x - b| <= 1e-10 max(1, |b|)` and bounds violated by at most
    /// 1e-14.
    pub fn is_report_feasible(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self.budget_violation(x) <= 1e-10 * self.b.abs().max(1.0)
            && self.bounds_violation(x) <= 1e-14
    }

    pub fn clamp_to_bounds(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Index partition of a point relative to the box bounds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActiveSets {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub free: Vec<usize>,
}

/// Partitions `0..n` by tolerance-based bound membership: `x_i <= l_i + tol`
/// goes to `lower`, else `x_i >= u_i - tol` to `upper`, else `free`.
/// Every index lands in exactly one bucket; when a bound gap is below
/// `2 tol` the lower set wins.
pub fn active_sets(x: &[f64], set: &GeneralizedSimplex, tol: f64) -> ActiveSets {
    debug_assert_eq!(x.len(), set.dim());
    let mut out = ActiveSets::default();
    for i in 0..x.len() {
        if x[i] <= set.lower[i] + tol {
            out.lower.push(i);
        } else if x[i] >= set.upper[i] - tol {
            out.upper.push(i);
        } else {
            out.free.push(i);
        }
    }
    out
}

/// Result of [`preprocess`].
#[derive(Clone, Debug, PartialEq)]
pub enum Reduction {
    /// A strictly interior subproblem over the surviving coordinates.
    Reduced {
        set: GeneralizedSimplex,
        /// Original indices of the surviving coordinates, ascending.
        free: Vec<usize>,
        /// `(original index, pinned value)` for coordinates removed up front.
        fixed: Vec<(usize, f64)>,
    },
    /// The feasible set is a single point.
    Singleton { x: Vec<f64> },
}

impl Reduction {
    /// Reassembles a full-length vector from a solution of the reduced
    /// problem.
    pub fn expand(&self, reduced_x: &[f64]) -> Vec<f64> {
        match self {
            Reduction::Singleton { x } => x.clone(),
            Reduction::Reduced { free, fixed, .. } => {
                assert_eq!(reduced_x.len(), free.len());
                let n = free.len() + fixed.len();
                let mut out = vec![0.0; n];
                for (k, &i) in free.iter().enumerate() {
                    out[i] = reduced_x[k];
                }
                for &(i, v) in fixed {
                    out[i] = v;
                }
                out
            }
        }
    }
}

/// Pins coordinates whose bound gap is at most 1e-14, shrinks the budget
/// accordingly, and classifies what is left:
///
/// * budget strictly between the remaining bound sums: a strictly interior
///   [`Reduction::Reduced`] instance (idempotent under re-preprocessing),
/// * budget equal to one of the sums (within `1e-12 max(1, |b|)`): the set
///   is the single point with every coordinate at that bound,
/// * budget outside the bound sums: [`SolverError::Infeasible`].
pub fn preprocess(set: &GeneralizedSimplex) -> Result<Reduction, SolverError> {
    let n = set.dim();
    let mut fixed = Vec::new();
    let mut free = Vec::new();
    let mut fixed_sum = CompensatedSum::new();
    for i in 0..n {
        if set.upper[i] - set.lower[i] <= 1e-14 {
            fixed.push((i, set.lower[i]));
            fixed_sum.add(set.lower[i]);
        } else {
            free.push(i);
        }
    }
    let b_rem = set.b - fixed_sum.value();
    let tol = 1e-12 * set.b.abs().max(1.0);

    if free.is_empty() {
        if b_rem.abs() <= tol {
            let mut x = vec![0.0; n];
            for &(i, v) in &fixed {
                x[i] = v;
            }
            return Ok(Reduction::Singleton { x });
        }
        return Err(SolverError::Infeasible("every coordinate is pinned but the budget does not match"));
    }

    let lower: Vec<f64> = free.iter().map(|&i| set.lower[i]).collect();
    let upper: Vec<f64> = free.iter().map(|&i| set.upper[i]).collect();
    let low_sum = compensated_sum(&lower);
    let up_sum = compensated_sum(&upper);

    if b_rem < low_sum - tol || b_rem > up_sum + tol {
        return Err(SolverError::Infeasible("budget outside [e^T l, e^T u]"));
    }
    if (b_rem - low_sum).abs() <= tol {
        let mut x = vec![0.0; n];
        for &(i, v) in &fixed {
            x[i] = v;
        }
        for &i in &free {
            x[i] = set.lower[i];
        }
        return Ok(Reduction::Singleton { x });
    }
    if (up_sum - b_rem).abs() <= tol {
        let mut x = vec![0.0; n];
        for &(i, v) in &fixed {
            x[i] = v;
        }
        for &i in &free {
            x[i] = set.upper[i];
        }
        return Ok(Reduction::Singleton { x });
    }

    Ok(Reduction::Reduced {
        set: GeneralizedSimplex::new(b_rem, lower, upper)?,
        free,
        fixed,
    })
}

/// Rewrites the weighted budget set `{ x : a^T x = b, l <= x <= u }` with
/// nonzero weights `a` as a generalized simplex in the substituted
/// variables `x'_i = a_i x_i`. Bounds swap where `a_i < 0`. Map points
/// back with `x_i = x'_i / a_i`.
pub fn rescale_weighted_budget(
    a: &[f64],
    b: f64,
    lower: &[f64],
    upper: &[f64],
) -> Result<GeneralizedSimplex, SolverError> {
    if a.len() != lower.len() {
        return Err(SolverError::DimensionMismatch { expected: lower.len(), got: a.len() });
    }
    if a.len() != upper.len() {
        return Err(SolverError::DimensionMismatch { expected: upper.len(), got: a.len() });
    }
    if a.iter().any(|w| !w.is_finite() || *w == 0.0) {
        return Err(SolverError::InvalidConfig("budget weights must be finite and nonzero"));
    }
    let n = a.len();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        if a[i] > 0.0 {
            lo[i] = a[i] * lower[i];
            hi[i] = a[i] * upper[i];
        } else {
            lo[i] = a[i] * upper[i];
            hi[i] = a[i] * lower[i];
        }
    }
    GeneralizedSimplex::new(b, lo, hi)
}
