//! Seeded random streams and the samplers built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// A reproducible stream of random numbers identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id in the cipher's stream word, so two
/// streams with the same seed and different ids never overlap. Cloning a
/// stream replays it from the same position.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream `index` of this stream. Children of one parent differ in
    /// stream id; children of different parents differ in key.
    pub fn substream(&self, index: u64) -> RandomStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_f42d)));
        RandomStream::new(key, index)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        let dist = Uniform::new(low, high).expect("uniform bounds");
        self.rng.sample(dist)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Uniform index in `0..bound`.
    pub fn index(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }

    pub fn standard_normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.standard_normal())
    }

    pub fn shuffle(&mut self, items: &mut [usize]) {
        // Fisher-Yates, spelled out so the permutation depends only on this stream.
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `count` rows drawn i.i.d. from `N(mean, L Lᵀ)`.
pub fn sample_mvn(
    mean: &[f64],
    chol: &Matrix,
    rs: &mut RandomStream,
    count: usize,
) -> Result<Matrix> {
    let dim = mean.len();
    if chol.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch {
            context: "multivariate normal factor",
            expected: (dim, dim),
            got: chol.shape(),
        });
    }
    let mut out = Matrix::zeros(count, dim);
    let mut z = vec![0.0; dim];
    for i in 0..count {
        z.iter_mut().for_each(|v| *v = rs.standard_normal());
        let row = out.row_mut(i);
        for (j, r) in row.iter_mut().enumerate() {
            let lrow = chol.row(j);
            *r = mean[j] + (0..=j).map(|k| lrow[k] * z[k]).sum::<f64>();
        }
    }
    Ok(out)
}

/// Rows from `N(0, Σ)` with `Σ_jk = rho^|j-k|`, built by the AR(1) recursion.
pub fn sample_ar1(rho: f64, dim: usize, rs: &mut RandomStream, count: usize) -> Result<Matrix> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "AR(1) correlation must satisfy |rho| < 1, got {rho}"
        )));
    }
    let innovation = (1.0 - rho * rho).sqrt();
    let mut out = Matrix::zeros(count, dim);
    for i in 0..count {
        let row = out.row_mut(i);
        let mut prev = 0.0;
        for (j, r) in row.iter_mut().enumerate() {
            let e = rs.standard_normal();
            prev = if j == 0 {
                e
            } else {
                rho * prev + innovation * e
            };
            *r = prev;
        }
    }
    Ok(out)
}

/// Rows from `N(0, Σ)` with unit diagonal and constant off-diagonal `r`, via
/// `x = √(1−r) z + (√(1+(d−1)r) − √(1−r))/d · (Σz) 1`.
pub fn sample_compound(r: f64, dim: usize, rs: &mut RandomStream, count: usize) -> Result<Matrix> {
    let lower = if dim > 1 {
        -1.0 / (dim as f64 - 1.0)
    } else {
        -1.0
    };
    if !(r < 1.0 && r >= lower) {
        return Err(Error::InvalidParameter(format!(
            "compound-symmetric correlation {r} outside [{lower}, 1) for dimension {dim}"
        )));
    }
    let a = (1.0 - r).sqrt();
    let b = if dim > 0 {
        ((1.0 + (dim as f64 - 1.0) * r).sqrt() - a) / dim as f64
    } else {
        0.0
    };
    let mut out = Matrix::zeros(count, dim);
    let mut z = vec![0.0; dim];
    for i in 0..count {
        z.iter_mut().for_each(|v| *v = rs.standard_normal());
        let shift = b * z.iter().sum::<f64>();
        for (x, zj) in out.row_mut(i).iter_mut().zip(&z) {
            *x = a * zj + shift;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cov(x: &Matrix) -> Matrix {
        let means = x.column_means();
        let n = x.rows() as f64;
        Matrix::from_fn(x.cols(), x.cols(), |a, b| {
            (0..x.rows())
                .map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]))
                .sum::<f64>()
                / n
        })
    }

    #[test]
    fn zero_factor_returns_mean() {
        let mut rs = RandomStream::new(1, 0);
        let m = sample_mvn(&[1.0, -2.0], &Matrix::zeros(2, 2), &mut rs, 5).unwrap();
        for i in 0..5 {
            assert_eq!(m.row(i), &[1.0, -2.0]);
        }
    }

    #[test]
    fn identity_factor_covariance() {
        let mut rs = RandomStream::new(2, 0);
        let x = sample_mvn(&[0.0; 3], &Matrix::identity(3), &mut rs, 100_000).unwrap();
        let defect = sample_cov(&x).sub(&Matrix::identity(3)).unwrap().max_abs();
        assert!(defect < 0.05, "{defect}");
    }

    #[test]
    fn replay_is_bit_identical() {
        let a = sample_ar1(0.4, 6, &mut RandomStream::new(9, 3), 10).unwrap();
        let b = sample_ar1(0.4, 6, &mut RandomStream::new(9, 3), 10).unwrap();
        assert_eq!(a, b);
        let c = sample_ar1(0.4, 6, &mut RandomStream::new(9, 4), 10).unwrap();
        assert_ne!(a, c);
        let root = RandomStream::new(9, 3);
        assert_ne!(
            root.substream(0).clone().next_u64(),
            root.substream(1).clone().next_u64()
        );
    }

    #[test]
    fn ar1_lag_two_correlation() {
        let mut rs = RandomStream::new(5, 0);
        let x = sample_ar1(0.7, 3, &mut rs, 100_000).unwrap();
        let c = sample_cov(&x);
        let corr = c[(0, 2)] / (c[(0, 0)] * c[(2, 2)]).sqrt();
        assert!((corr - 0.49).abs() < 0.02, "{corr}");
    }

    #[test]
    fn ar1_rejects_unit_root() {
        let mut rs = RandomStream::new(5, 0);
        assert!(sample_ar1(1.0, 3, &mut rs, 1).is_err());
        assert!(sample_ar1(-1.2, 3, &mut rs, 1).is_err());
    }

    #[test]
    fn ar1_degenerate_cases() {
        let mut rs = RandomStream::new(6, 0);
        let x = sample_ar1(0.0, 4, &mut rs, 50_000).unwrap();
        let c = sample_cov(&x);
        assert!(c.sub(&Matrix::identity(4)).unwrap().max_abs() < 0.05);
        let one = sample_ar1(0.9, 1, &mut RandomStream::new(6, 1), 50_000).unwrap();
        assert!((sample_cov(&one)[(0, 0)] - 1.0).abs() < 0.05);
    }

    #[test]
    fn compound_covariance() {
        let mut rs = RandomStream::new(7, 0);
        let x = sample_compound(0.5, 4, &mut rs, 100_000).unwrap();
        let target = Matrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.5 });
        let defect = sample_cov(&x).sub(&target).unwrap().max_abs();
        assert!(defect < 0.03, "{defect}");
    }
}
