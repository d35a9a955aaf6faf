//! Dense symmetric matrices stored row-major in a flat `Vec<f64>`.
//!
//! Row-major storage makes `column(j)` a contiguous slice (row j equals
//! column j by symmetry), which is what the exchange method needs: its
//! per-iteration work is two column reads, never a full matvec.

use crate::error::SolverError;
use crate::vector::dot;

/// Read access to columns of a symmetric matrix.
///
/// The exchange method is generic over this trait so tests can interpose
/// counting wrappers and callers can supply implicitly represented
/// Hessians. `column(j)` must return row j of the matrix, which equals
/// column j by symmetry.
pub trait ColumnMatrix {
    fn dim(&self) -> usize;

    fn column(&self, j: usize) -> &[f64];

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.column(j)[i]
    }

    /// `out = A x`, built column by column so implementors only need
    /// `column`.
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        out.fill(0.0);
        for j in 0..n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let col = self.column(j);
            for i in 0..n {
                out[i] += xj * col[i];
            }
        }
    }

    fn frobenius_norm(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            let col = self.column(j);
            acc += dot(col, col);
        }
        acc.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSymmetricMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DenseSymmetricMatrix {
    /// Wraps `entries` (row-major, length n*n) after verifying exact
    /// symmetry: `entries[i*n+j]` must equal `entries[j*n+i]` bit for bit.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self, SolverError> {
        if entries.len() != n * n {
            return Err(SolverError::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(SolverError::InvalidConfig("matrix entries are not symmetric"));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds `(A + A^T) / 2` from an arbitrary square `entries` buffer.
    pub fn symmetrized(n: usize, entries: Vec<f64>) -> Result<Self, SolverError> {
        if entries.len() != n * n {
            return Err(SolverError::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        let mut entries = entries;
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (entries[i * n + j] + entries[j * n + i]);
                entries[i * n + j] = m;
                entries[j * n + i] = m;
            }
        }
        Ok(Self { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = d[i];
        }
        Self { n, entries }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Returns a copy with `shift` added to every diagonal entry.
    pub fn with_shifted_diagonal(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.entries[i * self.n + i] += shift;
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            *e *= factor;
        }
    }

    /// `Diag(d) A Diag(d)`, evaluated as `a_ij * (d_i d_j)` on the lower
    /// triangle and mirrored so the result stays symmetric bit for bit.
    pub fn diagonal_congruence(&self, d: &[f64]) -> Self {
        debug_assert_eq!(d.len(), self.n);
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.entries[i * n + j] * (d[i] * d[j]);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    /// `d^T A d`.
    pub fn quadratic_form(&self, d: &[f64]) -> f64 {
        debug_assert_eq!(d.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            if d[i] != 0.0 {
                acc += d[i] * dot(&self.entries[i * self.n..(i + 1) * self.n], d);
            }
        }
        acc
    }

    /// Lower Cholesky factorization; fails on the first nonpositive pivot.
    pub fn cholesky(&self) -> Result<CholeskyFactor, SolverError> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.entries[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(SolverError::NotPositiveDefinite { index: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(CholeskyFactor { n, l })
    }
}

impl ColumnMatrix for DenseSymmetricMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn column(&self, j: usize) -> &[f64] {
        &self.entries[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// Lower triangular factor `L` with `A = L L^T`.
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place via the two triangular solves.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `L Y = B` for a row-major `B` with `cols` columns, operating
    /// on whole rows so the inner loops stay contiguous.
    pub fn forward_solve_matrix(&self, b: &[f64], cols: usize) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n * cols);
        let n = self.n;
        let mut y = b.to_vec();
        for r in 0..n {
            let (done, rest) = y.split_at_mut(r * cols);
            let row = &mut rest[..cols];
            for k in 0..r {
                let f = self.l[r * n + k];
                if f != 0.0 {
                    let prev = &done[k * cols..(k + 1) * cols];
                    for c in 0..cols {
                        row[c] -= f * prev[c];
                    }
                }
            }
            let d = self.l[r * n + r];
            for c in 0..cols {
                row[c] /= d;
            }
        }
        y
    }

    /// `log det A = 2 sum_i log L_ii`.
    pub fn log_det(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += self.l[i * self.n + i].ln();
        }
        2.0 * acc
    }
}

/// Orthogonal factor of the Householder QR decomposition of a square
/// row-major matrix. Consumes the input buffer as workspace.
pub fn qr_orthogonal_factor(n: usize, mut a: Vec<f64>) -> Result<Vec<f64>, SolverError> {
    if a.len() != n * n {
        return Err(SolverError::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    // Reflector vectors, one per column, stored densely (v[k][i] for i >= k).
    let mut vs = vec![0.0; n * n];
    let mut w = vec![0.0; n];
    for k in 0..n {
        let mut norm_sq = 0.0;
        for i in k..n {
            let e = a[i * n + k];
            norm_sq += e * e;
        }
        let norm = norm_sq.sqrt();
        let v = &mut vs[k * n..(k + 1) * n];
        for i in k..n {
            v[i] = a[i * n + k];
        }
        // Sign chosen away from cancellation; a zero column leaves the
        // identity reflector (v = 0).
        v[k] += if v[k] >= 0.0 { norm } else { -norm };
        let vtv = {
            let mut s = 0.0;
            for i in k..n {
                s += v[i] * v[i];
            }
            s
        };
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // a <- (I - beta v v^T) a, restricted to rows/cols k..n.
        for j in k..n {
            w[j] = 0.0;
        }
        for i in k..n {
            let vi = v[i];
            if vi != 0.0 {
                let row = &a[i * n..(i + 1) * n];
                for j in k..n {
                    w[j] += vi * row[j];
                }
            }
        }
        for i in k..n {
            let f = beta * v[i];
            if f != 0.0 {
                let row = &mut a[i * n..(i + 1) * n];
                for j in k..n {
                    row[j] -= f * w[j];
                }
            }
        }
    }
    // Accumulate Q = H_0 H_1 ... H_{n-1} by applying reflectors to the
    // identity in reverse order.
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &vs[k * n..(k + 1) * n];
        let mut vtv = 0.0;
        for i in k..n {
            vtv += v[i] * v[i];
        }
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for j in 0..n {
            w[j] = 0.0;
        }
        for i in k..n {
            let vi = v[i];
            if vi != 0.0 {
                let row = &q[i * n..(i + 1) * n];
                for j in k..n {
                    w[j] += vi * row[j];
                }
            }
        }
        for i in k..n {
            let f = beta * v[i];
            if f != 0.0 {
                let row = &mut q[i * n..(i + 1) * n];
                for j in k..n {
                    row[j] -= f * w[j];
                }
            }
        }
    }
    Ok(q)
}
