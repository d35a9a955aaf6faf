//! Seeded random instances with known solutions.
//!
//! Both generators draw from `ChaCha8` keyed by the instance seed, with
//! one PRNG stream per draw phase so that adding draws to one phase never
//! shifts another. Identical inputs produce bit-identical instances.
//!
//! Projection instances (streams: 0 lower bounds, 1 upper offsets, 2 the
//! point to project) have `b` at the midpoint of the bound sums, so the
//! feasible set always has a strict interior.
//!
//! QP instances (streams: 0 orthogonal basis, 1 eigenvalue profile,
//! 2 planted solution, 3 budget multiplier, 4 bound multipliers) are built
//! backwards from a planted primal-dual pair: draw the Hessian spectrum
//! and an optimal point `xbar`, decide which coordinates sit on bounds,
//! draw multipliers with the matching signs, then choose the linear term
//! as `c = -Q xbar + ybar e + zbar` so the pair satisfies the optimality
//! conditions by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::matrix::{qr_orthogonal_factor, ColumnMatrix, DenseSymmetricMatrix};
use crate::problem::{KktCertificate, QpProblem};
use crate::set::GeneralizedSimplex;
use crate::vector::{dot, CompensatedSum};

/// Offset between retry sub-seeds when an instance comes out degenerate.
const RESEED_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

const STREAM_PROJ_LOWER: u64 = 0;
const STREAM_PROJ_UPPER: u64 = 1;
const STREAM_PROJ_POINT: u64 = 2;

const STREAM_QP_BASIS: u64 = 0;
const STREAM_QP_EIGS: u64 = 1;
const STREAM_QP_XBAR: u64 = 2;
const STREAM_QP_YBAR: u64 = 3;
const STREAM_QP_ZBAR: u64 = 4;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Projection test instance: bounds `l = max(0, N(0,1))`,
/// `u = l + U(0,1)`, budget at the midpoint `b = (e^T l + e^T u)/2`, and
/// a point `x0 ~ U(0,1)^n` to project.
pub fn gen_projection_instance(
    n: usize,
    seed: u64,
) -> Result<(GeneralizedSimplex, Vec<f64>), SolverError> {
    if n < 2 {
        return Err(SolverError::InvalidConfig("projection instances need n >= 2"));
    }
    let mut rng = stream_rng(seed, STREAM_PROJ_LOWER);
    let lower: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g.max(0.0)
        })
        .collect();
    let mut rng = stream_rng(seed, STREAM_PROJ_UPPER);
    let upper: Vec<f64> = lower
        .iter()
        .map(|l| l + rng.random_range(0.0..1.0))
        .collect();
    let mut mid = CompensatedSum::new();
    for i in 0..n {
        mid.add(lower[i] + upper[i]);
    }
    let b = 0.5 * mid.value();
    let mut rng = stream_rng(seed, STREAM_PROJ_POINT);
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    Ok((GeneralizedSimplex::new(b, lower, upper)?, x0))
}

/// Parameters of a random QP instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpInstanceSpec {
    pub n: usize,
    /// Spectral condition number of the Hessian (up to drawing integer
    /// eigenvalues); must be at least 1.
    pub cond: f64,
    /// Fraction controlling how many coordinates of the planted solution
    /// sit on a bound: `|xbar_i| >= ratio` pins coordinate i. In (0, 1).
    pub ratio: f64,
    pub seed: u64,
}

impl QpInstanceSpec {
    fn validate(&self) -> Result<(), SolverError> {
        if self.n < 2 {
            return Err(SolverError::InvalidConfig("qp instances need n >= 2"));
        }
        if !(self.cond >= 1.0 && self.cond.is_finite()) {
            return Err(SolverError::InvalidConfig("cond must be finite and at least 1"));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(SolverError::InvalidConfig("ratio must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// A generated QP with its planted primal-dual solution.
#[derive(Clone, Debug)]
pub struct GeneratedQp {
    pub spec: QpInstanceSpec,
    pub problem: QpProblem,
    /// Planted optimal point.
    pub xbar: Vec<f64>,
    /// Budget-row multiplier at `xbar`.
    pub ybar: f64,
    /// Bound multipliers at `xbar` (positive on pinned-low coordinates,
    /// negative on pinned-high ones, zero elsewhere).
    pub zbar: Vec<f64>,
    /// Hessian eigenvalues before Frobenius normalization; integers with
    /// minimum 1 and maximum `cond`.
    pub d: Vec<f64>,
    /// Frobenius norm the raw Hessian was divided by.
    pub fro_scale: f64,
}

impl GeneratedQp {
    /// Largest eigenvalue of the normalized Hessian, the gradient
    /// Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.spec.cond / self.fro_scale
    }

    pub fn certificate(&self) -> KktCertificate {
        KktCertificate {
            x: self.xbar.clone(),
            y: self.ybar,
            z: self.zbar.clone(),
        }
    }
}

/// Generates a QP with a planted solution. Retries with shifted sub-seeds
/// (at most 10) when every coordinate of `xbar` lands on a bound, which
/// would leave the feasible set without free directions at the solution.
pub fn gen_qp_instance(spec: &QpInstanceSpec) -> Result<GeneratedQp, SolverError> {
    spec.validate()?;
    let mut attempts = 0usize;
    loop {
        let seed = spec.seed.wrapping_add((attempts as u64).wrapping_mul(RESEED_STEP));
        match try_gen_qp(spec, seed) {
            Some(generated) => return Ok(generated),
            None => {
                attempts += 1;
                if attempts > 10 {
                    return Err(SolverError::DegenerateInstance(attempts));
                }
            }
        }
    }
}

fn try_gen_qp(spec: &QpInstanceSpec, seed: u64) -> Option<GeneratedQp> {
    let n = spec.n;

    let mut rng = stream_rng(seed, STREAM_QP_XBAR);
    let xbar: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

    // Pinning pattern. Indices with |xbar_i| >= ratio go on a bound; at
    // least one coordinate must stay free.
    let pinned_low: Vec<bool> = xbar.iter().map(|&v| v <= -spec.ratio).collect();
    let pinned_high: Vec<bool> = xbar.iter().map(|&v| v >= spec.ratio).collect();
    if pinned_low
        .iter()
        .zip(&pinned_high)
        .all(|(&l, &h)| l || h)
    {
        return None;
    }

    let mut lower = vec![-1.0; n];
    let mut upper = vec![1.0; n];
    for i in 0..n {
        if pinned_low[i] {
            lower[i] = xbar[i];
        }
        if pinned_high[i] {
            upper[i] = xbar[i];
        }
    }

    let q = random_spd_matrix(n, spec.cond, seed);
    let (q, d, fro_scale) = q;

    let ybar: f64 = StandardNormal.sample(&mut stream_rng(seed, STREAM_QP_YBAR));
    let mut rng = stream_rng(seed, STREAM_QP_ZBAR);
    let zbar: Vec<f64> = (0..n)
        .map(|i| {
            if pinned_low[i] {
                rng.random_range(0.0..1.0)
            } else if pinned_high[i] {
                -rng.random_range(0.0..1.0)
            } else {
                0.0
            }
        })
        .collect();

    let mut b = CompensatedSum::new();
    for &v in &xbar {
        b.add(v);
    }
    let set = GeneralizedSimplex::new(b.value(), lower, upper).ok()?;

    let mut qx = vec![0.0; n];
    q.matvec(&xbar, &mut qx);
    let c: Vec<f64> = (0..n).map(|i| -qx[i] + ybar + zbar[i]).collect();

    let problem = QpProblem::new(q, c, set).ok()?;
    Some(GeneratedQp {
        spec: *spec,
        problem,
        xbar,
        ybar,
        zbar,
        d,
        fro_scale,
    })
}

/// Dense SPD matrix with spectrum `d` (integers in `[1, cond]`, extremes
/// forced to exactly 1 and `cond`) in a random orthogonal basis, divided
/// by its Frobenius norm. Returns the matrix, the spectrum, and the norm.
fn random_spd_matrix(n: usize, cond: f64, seed: u64) -> (DenseSymmetricMatrix, Vec<f64>, f64) {
    let mut rng = stream_rng(seed, STREAM_QP_BASIS);
    let gaussian: Vec<f64> = (0..n * n)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    // A square Gaussian matrix is almost surely full rank, so the QR
    // factorization cannot fail here.
    let mut basis = qr_orthogonal_factor(n, gaussian).expect("Gaussian matrix was rank deficient");

    let cond_int = cond as u64;
    let mut rng = stream_rng(seed, STREAM_QP_EIGS);
    let mut d: Vec<f64> = (0..n)
        .map(|_| rng.random_range(1..=cond_int) as f64)
        .collect();
    let argmin = (0..n)
        .min_by(|&i, &j| d[i].total_cmp(&d[j]))
        .expect("spectrum is nonempty");
    d[argmin] = 1.0;
    let argmax = (0..n)
        .max_by(|&i, &j| d[i].total_cmp(&d[j]).then(j.cmp(&i)))
        .expect("spectrum is nonempty");
    d[argmax] = cond;

    // basis becomes W = U Diag(sqrt(d)); the Gram matrix W W^T equals
    // U Diag(d) U^T and its lower triangle is mirrored, so symmetry is
    // exact by construction.
    let sqrt_d: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    for row in basis.chunks_exact_mut(n) {
        for (v, s) in row.iter_mut().zip(&sqrt_d) {
            *v *= s;
        }
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let row_i = &basis[i * n..(i + 1) * n];
        for j in 0..=i {
            let v = dot(row_i, &basis[j * n..(j + 1) * n]);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let fro = entries.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in entries.iter_mut() {
        *v /= fro;
    }
    let q = DenseSymmetricMatrix::from_entries(n, entries)
        .expect("mirrored entries must be symmetric");
    (q, d, fro)
}
