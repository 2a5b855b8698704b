use super::SignalDecomposition;
use crate::error::{Error, Result};
use crate::numerics::{thin_svd, Matrix};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Exact decomposition of a known coefficient matrix.
///
/// From the SVD `XB = Σ σ_k γ_k u_kᵀ`: `w_k = (σ_k/√n) u_k`,
/// `α_k = (n/σ_k²) B w_k`, `t_k = √n γ_k` and `μ_k = σ_k²/n`, for the
/// numerical rank `K` of `XB`. A zero signal yields `K = 0`.
pub fn population_decomposition(x: &Matrix, b_true: &Matrix) -> Result<SignalDecomposition> {
    if x.cols() != b_true.rows() {
        return Err(Error::DimensionMismatch {
            context: "population decomposition",
            expected: (x.cols(), b_true.cols()),
            got: b_true.shape(),
        });
    }
    let n = x.rows();
    let (p, q) = b_true.shape();
    let xb = x.matmul(b_true)?;
    let svd = thin_svd(&xb)?;
    let k = svd.numerical_rank(RANK_CUTOFF);
    if k == 0 {
        return Ok(SignalDecomposition::empty(p, q, n));
    }
    let nf = n as f64;
    let root_n = nf.sqrt();
    let mut a_cols = Vec::with_capacity(k);
    let mut w_cols = Vec::with_capacity(k);
    let mut t_cols = Vec::with_capacity(k);
    let mut mu = Vec::with_capacity(k);
    for c in 0..k {
        let sigma = svd.singular_values[c];
        let w: Vec<f64> = svd.v.column(c).iter().map(|u| u * sigma / root_n).collect();
        let alpha: Vec<f64> = b_true
            .mul_vec(&w)
            .into_iter()
            .map(|v| v * nf / (sigma * sigma))
            .collect();
        let t: Vec<f64> = svd.u.column(c).iter().map(|g| g * root_n).collect();
        a_cols.push(alpha);
        w_cols.push(w);
        t_cols.push(t);
        mu.push(sigma * sigma / nf);
    }
    Ok(SignalDecomposition {
        a: Matrix::from_columns(p, &a_cols),
        w: Matrix::from_columns(q, &w_cols),
        mu,
        scores: Some(Matrix::from_columns(n, &t_cols)),
        converged: vec![true; k],
    })
}
