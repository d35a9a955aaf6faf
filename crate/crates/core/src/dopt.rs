//! D-optimal experimental design objective
//! `f(x) = -logdet(A Diag(x) A^T)` over design weights on the simplex,
//! with its gradient, Hessian, and the Gaussian data generator.
//!
//! With `M(x) = A Diag(x) A^T = L L^T` and `Z = L^{-1} A`:
//!
//! ```text
//!     grad f(x)_i = -||z_i||^2          (z_i the i-th column of Z)
//!     hess f(x)   = B . B               (Hadamard square, B = Z^T Z)
//! ```
//!
//! Both reuse one factorization of `M`; nothing solves a linear system
//! per coordinate.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::SolverError;
use crate::matrix::{CholeskyFactor, DenseSymmetricMatrix};
use crate::pnewton::SelfConcordantObjective;
use crate::vector::dot;

/// Design weights below this threshold contribute nothing to `M(x)`;
/// sparse iterates then cost proportionally less per evaluation.
const ACTIVE_WEIGHT: f64 = 1e-12;

/// The experiment matrix `A` with columns `a_1..a_n` in `R^p`, stored
/// row-major (`p` rows of length `n`).
#[derive(Clone, Debug)]
pub struct DesignProblem {
    a: Vec<f64>,
    p: usize,
    n: usize,
}

impl DesignProblem {
    /// `a` is row-major `p x n`. Requires `p <= n` and full row rank at
    /// the uniform weights (so `f` is finite somewhere on the simplex).
    pub fn new(p: usize, n: usize, a: Vec<f64>) -> Result<Self, SolverError> {
        if p == 0 || n == 0 || p > n {
            return Err(SolverError::InvalidConfig(
                "design needs 1 <= p <= n experiment columns",
            ));
        }
        if a.len() != p * n {
            return Err(SolverError::DimensionMismatch { expected: p * n, got: a.len() });
        }
        let problem = Self { a, p, n };
        let uniform = vec![1.0 / n as f64; n];
        if problem.factor_information(&uniform).is_err() {
            return Err(SolverError::Degenerate("design matrix must have full row rank"));
        }
        Ok(problem)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Row `r` of `A`: feature `r` across all `n` experiments.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.n..(r + 1) * self.n]
    }

    /// Factors `M(x) = sum_i x_i a_i a_i^T` over the active weights.
    /// A nonpositive pivot means `x` sits outside the domain.
    fn factor_information(&self, x: &[f64]) -> Result<CholeskyFactor, SolverError> {
        let (p, n) = (self.p, self.n);
        assert_eq!(x.len(), n, "weight vector must have one entry per experiment");
        if x.iter().any(|&v| v < 0.0) {
            return Err(SolverError::DomainError);
        }
        let active: Vec<usize> = (0..n).filter(|&i| x[i] > ACTIVE_WEIGHT).collect();
        let m = active.len();
        // W = A Diag(sqrt(x)) restricted to active columns; M = W W^T.
        let mut w = vec![0.0; p * m];
        for r in 0..p {
            let row = self.row(r);
            for (j, &i) in active.iter().enumerate() {
                w[r * m + j] = row[i] * x[i].sqrt();
            }
        }
        let mut entries = vec![0.0; p * p];
        for r in 0..p {
            for s in 0..=r {
                let v = dot(&w[r * m..(r + 1) * m], &w[s * m..(s + 1) * m]);
                entries[r * p + s] = v;
                entries[s * p + r] = v;
            }
        }
        DenseSymmetricMatrix::from_entries(p, entries)?
            .cholesky()
            .map_err(|_| SolverError::DomainError)
    }

    /// `Z = L^{-1} A`, returned column-major so each `z_i` is contiguous.
    fn whitened_columns(&self, factor: &CholeskyFactor) -> Vec<f64> {
        let (p, n) = (self.p, self.n);
        let z = factor.forward_solve_matrix(&self.a, n);
        let mut zt = vec![0.0; n * p];
        for r in 0..p {
            for i in 0..n {
                zt[i * p + r] = z[r * n + i];
            }
        }
        zt
    }
}

/// `-logdet M(x)`; errors with [`SolverError::DomainError`] when `M(x)`
/// is not positive definite or some weight is negative.
pub fn dopt_value(problem: &DesignProblem, x: &[f64]) -> Result<f64, SolverError> {
    Ok(-problem.factor_information(x)?.log_det())
}

/// `grad f(x)_i = -a_i^T M(x)^{-1} a_i`. Requires `x` in-domain.
pub fn dopt_gradient(problem: &DesignProblem, x: &[f64]) -> Result<Vec<f64>, SolverError> {
    let factor = problem.factor_information(x)?;
    let zt = problem.whitened_columns(&factor);
    let p = problem.p;
    Ok((0..problem.n)
        .map(|i| {
            let zi = &zt[i * p..(i + 1) * p];
            -dot(zi, zi)
        })
        .collect())
}

/// `hess f(x) = B . B` with `B = A^T M(x)^{-1} A`; positive semidefinite.
pub fn dopt_hessian(
    problem: &DesignProblem,
    x: &[f64],
) -> Result<DenseSymmetricMatrix, SolverError> {
    let factor = problem.factor_information(x)?;
    let zt = problem.whitened_columns(&factor);
    let (p, n) = (problem.p, problem.n);
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let zi = &zt[i * p..(i + 1) * p];
        for j in 0..=i {
            let b = dot(zi, &zt[j * p..(j + 1) * p]);
            let v = b * b;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    DenseSymmetricMatrix::from_entries(n, entries)
}

/// The projected Newton solver's view of the design objective. The domain
/// is restricted to nonnegative weights (all feasible sets used with it
/// satisfy `l >= 0`), where the weighted Gram construction of `M` applies.
impl SelfConcordantObjective for DesignProblem {
    fn in_domain(&self, x: &[f64]) -> bool {
        self.factor_information(x).is_ok()
    }

    fn value(&self, x: &[f64]) -> Result<f64, SolverError> {
        dopt_value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        dopt_gradient(self, x).expect("gradient requires x in dom(f)")
    }

    fn hessian(&self, x: &[f64]) -> DenseSymmetricMatrix {
        dopt_hessian(self, x).expect("hessian requires x in dom(f)")
    }
}

/// Draws the columns `a_1..a_n` i.i.d. standard normal in `R^p` from a
/// seeded PRNG; the same seed reproduces `A` bit for bit.
pub fn generate_design_data(n: usize, p: usize, seed: u64) -> Result<DesignProblem, SolverError> {
    if !(p >= 1 && p < n) {
        return Err(SolverError::InvalidConfig("design generation needs 1 <= p < n"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut a = vec![0.0; p * n];
    for i in 0..n {
        for r in 0..p {
            a[r * n + i] = StandardNormal.sample(&mut rng);
        }
    }
    DesignProblem::new(p, n, a)
}
