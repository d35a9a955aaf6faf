//! Independent oracles shared by the integration tests. Everything here
//! recomputes results through a different route than the library code
//! under test: interval bisection instead of semismooth Newton, exhaustive
//! active-set enumeration instead of exchange steps, finite differences
//! instead of closed-form calculus.

use rand::Rng;
use simplex_qp::vector::{compensated_sum, dot};
use simplex_qp::{ColumnMatrix, GeneralizedSimplex, QpProblem};

/// Root of `phi(y) = e^T clamp(xbar + y, l, u) - b` by safeguarded
/// interval bisection. `phi` is nondecreasing in `y`, so the root bracket
/// shrinks unconditionally; the result carries the bracket midpoint once
/// the width drops to 1e-15 of the root scale.
pub fn bisect_dual_root(xbar: &[f64], set: &GeneralizedSimplex) -> f64 {
    let phi = |y: f64| -> f64 {
        let clamped: Vec<f64> = xbar
            .iter()
            .zip(set.lower().iter().zip(set.upper().iter()))
            .map(|(&v, (&lo, &hi))| (v + y).clamp(lo, hi))
            .collect();
        compensated_sum(&clamped) - set.b()
    };

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..xbar.len() {
        lo = lo.min(set.lower()[i] - xbar[i]);
        hi = hi.max(set.upper()[i] - xbar[i]);
    }
    // At lo every coordinate clamps low, at hi every coordinate clamps
    // high; the strict-interior budget assumption brackets the root.
    assert!(phi(lo) <= 0.0 && phi(hi) >= 0.0, "bisection bracket must straddle the root");

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Projection onto the set through the bisection dual root.
pub fn oracle_projection(xbar: &[f64], set: &GeneralizedSimplex) -> Vec<f64> {
    let y = bisect_dual_root(xbar, set);
    xbar.iter()
        .zip(set.lower().iter().zip(set.upper().iter()))
        .map(|(&v, (&lo, &hi))| (v + y).clamp(lo, hi))
        .collect()
}

/// Dense linear solve by Gaussian elimination with partial pivoting;
/// `a` is row-major m x m, consumed. `None` when a pivot collapses.
fn solve_dense(mut a: Vec<f64>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let m = rhs.len();
    debug_assert_eq!(a.len(), m * m);
    let mut scale = 0.0f64;
    for &v in &a {
        scale = scale.max(v.abs());
    }
    if scale == 0.0 {
        return None;
    }
    for k in 0..m {
        let mut pivot_row = k;
        let mut pivot_mag = a[k * m + k].abs();
        for r in (k + 1)..m {
            let mag = a[r * m + k].abs();
            if mag > pivot_mag {
                pivot_row = r;
                pivot_mag = mag;
            }
        }
        if pivot_mag <= 1e-12 * scale {
            return None;
        }
        if pivot_row != k {
            for j in 0..m {
                a.swap(k * m + j, pivot_row * m + j);
            }
            rhs.swap(k, pivot_row);
        }
        let pivot = a[k * m + k];
        for r in (k + 1)..m {
            let factor = a[r * m + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k..m {
                a[r * m + j] -= factor * a[k * m + j];
            }
            rhs[r] -= factor * rhs[k];
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let mut acc = rhs[k];
        for j in (k + 1)..m {
            acc -= a[k * m + j] * x[j];
        }
        x[k] = acc / a[k * m + k];
    }
    Some(x)
}

/// Exact minimizer of `q(x) = x'Qx/2 + c'x` over the set by exhaustive
/// enumeration of lower/free/upper assignments. Each assignment fixes the
/// pinned coordinates, solves the equality-constrained system on the free
/// block, and keeps the KKT-consistent candidate of least objective.
/// Exponential in the dimension; intended for n <= 12.
pub fn enumerate_qp_optimum(problem: &QpProblem) -> Vec<f64> {
    let q = problem.q();
    let c = problem.c();
    let set = problem.set();
    let n = set.dim();
    assert!(n <= 12, "enumeration oracle is 3^n");
    let slack = 1e-9 * (1.0 + q.frobenius_norm());

    let objective = |x: &[f64]| -> f64 {
        let mut qx = vec![0.0; n];
        q.matvec(x, &mut qx);
        0.5 * dot(x, &qx) + dot(c, x)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(n as u32);
    let mut assignment = vec![0u8; n]; // 0 = lower, 1 = free, 2 = upper

    for code in 0..total {
        let mut rem = code;
        for slot in assignment.iter_mut() {
            *slot = (rem % 3) as u8;
            rem /= 3;
        }

        let mut x = vec![0.0; n];
        let mut free = Vec::new();
        for i in 0..n {
            match assignment[i] {
                0 => x[i] = set.lower()[i],
                2 => x[i] = set.upper()[i],
                _ => free.push(i),
            }
        }
        let m = free.len();
        let pinned_budget: f64 = (0..n).filter(|i| assignment[*i] != 1).map(|i| x[i]).sum();

        let y = if m == 0 {
            if (pinned_budget - set.b()).abs() > slack.max(1e-9 * set.b().abs().max(1.0)) {
                continue;
            }
            // Any multiplier between the upper-active and lower-active
            // gradient entries certifies this vertex.
            let mut g = vec![0.0; n];
            q.matvec(&x, &mut g);
            for i in 0..n {
                g[i] += c[i];
            }
            let mut y_min = f64::NEG_INFINITY;
            let mut y_max = f64::INFINITY;
            for i in 0..n {
                if assignment[i] == 0 {
                    y_max = y_max.min(g[i]);
                } else {
                    y_min = y_min.max(g[i]);
                }
            }
            if y_min > y_max + slack {
                continue;
            }
            match (y_min.is_finite(), y_max.is_finite()) {
                (true, true) => 0.5 * (y_min + y_max.max(y_min)),
                (true, false) => y_min,
                (false, true) => y_max,
                (false, false) => 0.0,
            }
        } else {
            // Unknowns (x_free, y): stationarity rows then the budget row.
            let dim = m + 1;
            let mut a = vec![0.0; dim * dim];
            let mut rhs = vec![0.0; dim];
            for (r, &i) in free.iter().enumerate() {
                let col_i = q.column(i);
                for (s, &j) in free.iter().enumerate() {
                    a[r * dim + s] = col_i[j];
                }
                a[r * dim + m] = -1.0;
                let mut acc = -c[i];
                for j in 0..n {
                    if assignment[j] != 1 {
                        acc -= col_i[j] * x[j];
                    }
                }
                rhs[r] = acc;
            }
            for s in 0..m {
                a[m * dim + s] = 1.0;
            }
            rhs[m] = set.b() - pinned_budget;

            let Some(sol) = solve_dense(a, rhs) else { continue };
            let mut in_bounds = true;
            for (s, &i) in free.iter().enumerate() {
                if sol[s] < set.lower()[i] - slack || sol[s] > set.upper()[i] + slack {
                    in_bounds = false;
                    break;
                }
            }
            if !in_bounds {
                continue;
            }
            for (s, &i) in free.iter().enumerate() {
                x[i] = sol[s].clamp(set.lower()[i], set.upper()[i]);
            }
            sol[m]
        };

        // Multiplier signs on the pinned coordinates.
        let mut g = vec![0.0; n];
        q.matvec(&x, &mut g);
        let mut valid = true;
        for i in 0..n {
            let z = g[i] + c[i] - y;
            match assignment[i] {
                0 if z < -slack => valid = false,
                2 if z > slack => valid = false,
                _ => {}
            }
            if !valid {
                break;
            }
        }
        if !valid {
            continue;
        }

        let value = objective(&x);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, x));
        }
    }

    best.expect("a strongly convex QP has a KKT-consistent assignment").1
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        out[i] = (up - down) / (2.0 * h);
    }
    out
}

/// Central differences of a gradient map, symmetrized; row-major n x n.
pub fn central_fd_hessian<G: Fn(&[f64]) -> Vec<f64>>(grad: G, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n * n];
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let up = grad(&probe);
        probe[j] = x[j] - h;
        let down = grad(&probe);
        probe[j] = x[j];
        for i in 0..n {
            out[i * n + j] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = avg;
            out[j * n + i] = avg;
        }
    }
    out
}

/// Strictly positive random point on the standard simplex, bounded away
/// from the boundary so finite differences stay in the domain.
pub fn random_interior_simplex_point<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}
