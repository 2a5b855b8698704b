//! Dense linear-algebra kernels and seeded samplers.

mod cholesky;
mod matrix;
mod random;
mod svd;

pub use cholesky::{cholesky_factor, spd_solve, SpdFactor};
pub use matrix::{axpy, canonical_sign, dot, norm1, norm2, Matrix};
pub use random::{sample_ar1, sample_compound, sample_mvn, RandomStream};
pub use svd::{thin_svd, SvdResult};

/// `sign(z) · max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}
