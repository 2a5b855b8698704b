//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.

use super::matrix::{axpy, canonical_sign, dot, norm2, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(σ) Vᵀ` with `r = min(rows, cols)` singular triplets.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `rows × r`, orthonormal columns.
    pub u: Matrix,
    /// `cols × r`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    /// Number of singular values above `rel_tol * σ₁`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .take_while(|s| **s > rel_tol * top)
            .count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let (m, r) = self.u.shape();
        let n = self.v.rows();
        Matrix::from_fn(m, n, |i, j| {
            (0..r)
                .map(|k| self.u[(i, k)] * self.singular_values[k] * self.v[(j, k)])
                .sum()
        })
    }
}

/// Thin SVD. In each left singular vector the largest-magnitude entry
/// (lowest index on ties) is non-negative.
pub fn thin_svd(a: &Matrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    let r = m.min(n);
    if r == 0 {
        return Ok(SvdResult {
            singular_values: Vec::new(),
            u: Matrix::zeros(m, 0),
            v: Matrix::zeros(n, 0),
        });
    }
    // Rotate the columns of whichever orientation is tall.
    let tall = m >= n;
    let (len, count) = if tall { (m, n) } else { (n, m) };
    let mut work: Vec<Vec<f64>> = if tall {
        (0..n).map(|j| a.column(j)).collect()
    } else {
        (0..m).map(|i| a.row(i).to_vec()).collect()
    };
    let mut right: Vec<Vec<f64>> = (0..count)
        .map(|j| {
            let mut e = vec![0.0; count];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * (len as f64).max(10.0);
    // Columns at roundoff level relative to the whole matrix are left alone;
    // rotating them only reshuffles rounding noise.
    let total: f64 = work.iter().map(|c| dot(c, c)).sum();
    let negligible = (tol * tol) * total;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..count.saturating_sub(1) {
            for j in (i + 1)..count {
                let alpha = dot(&work[i], &work[i]);
                let beta = dot(&work[j], &work[j]);
                let gamma = dot(&work[i], &work[j]);
                if gamma == 0.0 || alpha <= negligible || beta <= negligible {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = work.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
                let (lo, hi) = right.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { rows: m, cols: n });
    }

    let mut order: Vec<(usize, f64)> = work.iter().map(|c| norm2(c)).enumerate().collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let top = order[0].1;

    let mut left_cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut right_cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut sigmas = Vec::with_capacity(r);
    for &(idx, sigma) in &order {
        let mut u: Vec<f64> = if sigma > 0.0 {
            work[idx].iter().map(|x| x / sigma).collect()
        } else {
            vec![0.0; len]
        };
        if sigma <= top * 1e-12 {
            // Direction carries no reliable information; rebuild it orthonormally.
            u = complete_orthonormal(&left_cols, u, len);
        }
        left_cols.push(u);
        right_cols.push(right[idx].clone());
        sigmas.push(sigma);
    }

    let (mut u_cols, mut v_cols) = if tall {
        (left_cols, right_cols)
    } else {
        (right_cols, left_cols)
    };
    for (u, v) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        if canonical_sign(u) < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(SvdResult {
        singular_values: sigmas,
        u: Matrix::from_columns(m, &u_cols),
        v: Matrix::from_columns(n, &v_cols),
    })
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Orthonormalizes `candidate` against `basis`, falling back to coordinate vectors.
fn complete_orthonormal(basis: &[Vec<f64>], candidate: Vec<f64>, len: usize) -> Vec<f64> {
    let project = |mut v: Vec<f64>| -> Option<Vec<f64>> {
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let nv = norm2(&v);
        (nv > 1e-8).then(|| v.into_iter().map(|x| x / nv).collect())
    };
    if norm2(&candidate) > 0.0 {
        if let Some(v) = project(candidate) {
            return v;
        }
    }
    for k in 0..len {
        let mut e = vec![0.0; len];
        e[k] = 1.0;
        if let Some(v) = project(e) {
            return v;
        }
    }
    unreachable!("basis cannot span the whole space while a column is still missing")
}
