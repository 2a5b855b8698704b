use super::matrix::Matrix;
use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Lower-triangular `L` with `L Lᵀ = C`.
///
/// A failed factorization is retried with a diagonal ridge of
/// `1e-10 * trace(C) / dim`, escalated tenfold up to `1e-6 * trace(C) / dim`.
pub fn cholesky_factor(c: &Matrix) -> Result<Matrix> {
    let (n, cols) = c.shape();
    if n != cols {
        return Err(Error::DimensionMismatch {
            context: "cholesky",
            expected: (n, n),
            got: (n, cols),
        });
    }
    let scale = c.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!(
                    "cholesky input not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mean_diag = (0..n).map(|i| c[(i, i)]).sum::<f64>() / n.max(1) as f64;

    let mut last_failure = match factor(c, 0.0) {
        Ok(l) => return Ok(l),
        Err(minor) => minor,
    };
    if mean_diag > 0.0 {
        let mut rel = JITTER_START;
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            match factor(c, rel * mean_diag) {
                Ok(l) => return Ok(l),
                Err(minor) => last_failure = minor,
            }
            rel *= 10.0;
        }
    }
    Err(Error::NotPositiveSemiDefinite {
        minor: last_failure,
    })
}

/// Plain factorization of `C + ridge·I`; on failure returns the 1-based order
/// of the leading minor whose pivot was not positive.
fn factor(c: &Matrix, ridge: f64) -> std::result::Result<Matrix, usize> {
    let n = c.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)] + ridge;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < 0.0 || !d.is_finite() {
            return Err(j + 1);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = if djj > 0.0 {
                s / djj
            } else if s.abs() <= 1e-14 * c.max_abs().max(1.0) {
                0.0
            } else {
                return Err(j + 1);
            };
        }
    }
    Ok(l)
}

/// Cholesky factor of a symmetric positive definite matrix stored row-major,
/// built without any added ridge.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    l: Vec<f64>,
}

impl SpdFactor {
    /// `None` when a pivot falls below `1e-12 · max_i C_ii`.
    pub fn new(c: &[f64], n: usize) -> Option<Self> {
        assert_eq!(c.len(), n * n);
        let max_diag = (0..n).map(|i| c[i * n + i]).fold(0.0f64, f64::max);
        if !(max_diag > 0.0 && max_diag.is_finite()) {
            return None;
        }
        let floor = 1e-12 * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let (head, tail) = l.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            for k in 0..j {
                let row_k = &head[k * n..k * n + k + 1];
                let s = c[j * n + k] - super::dot(&row_j[..k], &row_k[..k]);
                row_j[k] = s / row_k[k];
            }
            let d = c[j * n + j] - super::dot(&row_j[..j], &row_j[..j]);
            if !(d > floor) {
                return None;
            }
            row_j[j] = d.sqrt();
        }
        Some(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `x` with `C x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, l) = (self.n, &self.l);
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let s = super::dot(&l[i * n..i * n + i], &y[..i]);
            y[i] = (y[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }
}

/// Solves `C x = b` for symmetric positive definite `C` (row-major `n×n`).
pub fn spd_solve(c: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    SpdFactor::new(c, n).map(|f| f.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(c: &Matrix) -> f64 {
        let l = cholesky_factor(c).unwrap();
        l.matmul(&l.transpose()).unwrap().sub(c).unwrap().max_abs()
    }

    #[test]
    fn identity_and_hand_factor() {
        assert_eq!(
            cholesky_factor(&Matrix::identity(3)).unwrap(),
            Matrix::identity(3)
        );
        let c = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 2.0]]);
        let l = cholesky_factor(&c).unwrap();
        assert_eq!(l, Matrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]));
    }

    #[test]
    fn compound_symmetric() {
        let c = Matrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.5 });
        assert!(round_trip(&c) <= 1e-12);
    }

    #[test]
    fn rank_deficient_needs_no_error() {
        // All-ones matrix is PSD with rank one.
        let c = Matrix::from_fn(4, 4, |_, _| 1.0);
        assert!(round_trip(&c) <= 1e-5);
    }

    #[test]
    fn indefinite_names_minor() {
        let c = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        match cholesky_factor(&c) {
            Err(Error::NotPositiveSemiDefinite { minor }) => assert_eq!(minor, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spd_solve_small_system() {
        let c = [4.0, 2.0, 2.0, 3.0];
        let x = spd_solve(&c, 2, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
        assert!(spd_solve(&[1.0, 1.0, 1.0, 1.0], 2, &[1.0, 0.0]).is_none());
        assert!(spd_solve(&[], 0, &[]).is_none());
    }

    #[test]
    fn asymmetric_rejected() {
        let c = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]);
        assert!(cholesky_factor(&c).is_err());
    }
}
