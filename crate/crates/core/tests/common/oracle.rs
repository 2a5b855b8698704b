//! Brute-force maximization of the penalized ratio over the unit S-sphere
//! for two or three predictors.

use nalgebra::{DMatrix, DVector};

pub struct Ratio {
    /// `S^{-1/2}`-type map `u ↦ α` with `αᵀSα = uᵀu`.
    map: DMatrix<f64>,
    b_hat: DMatrix<f64>,
    tau: f64,
    lambda: f64,
}

impl Ratio {
    pub fn new(b_hat: DMatrix<f64>, s: DMatrix<f64>, tau: f64, lambda: f64) -> Self {
        let l = s.cholesky().expect("S must be positive definite").l();
        let map = l.transpose().try_inverse().expect("invertible factor");
        Ratio {
            map,
            b_hat,
            tau,
            lambda,
        }
    }

    /// `f` at `α = map·u` for unit `u`; the S-norm of `α` is one.
    pub fn at(&self, u: &[f64]) -> f64 {
        let alpha = &self.map * DVector::from_column_slice(u);
        let l1: f64 = alpha.iter().map(|v| v.abs()).sum();
        let l2 = alpha.dot(&alpha);
        let quad = alpha.dot(&(&self.b_hat * &alpha));
        quad / (1.0 + self.tau * ((1.0 - self.lambda) * l2 + self.lambda * l1 * l1))
    }

    fn sphere(theta: f64, phi: f64) -> [f64; 3] {
        [
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ]
    }

    /// Maximum over an angular grid with spacing `step`. In three dimensions
    /// a coarse pass picks candidate regions that are then scanned at `step`.
    pub fn grid_max(&self, step: f64) -> f64 {
        use std::f64::consts::PI;
        match self.map.nrows() {
            2 => {
                let count = (PI / step).ceil() as usize;
                (0..=count)
                    .map(|i| {
                        let t = i as f64 * step;
                        self.at(&[t.cos(), t.sin()])
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            3 => {
                let coarse = 1e-2;
                let nc = (PI / coarse).ceil() as usize;
                let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity((nc + 1) * nc);
                for i in 0..=nc {
                    for j in 0..nc {
                        let (t, ph) = (i as f64 * coarse, j as f64 * coarse);
                        cells.push((self.at(&Self::sphere(t, ph)), t, ph));
                    }
                }
                cells.sort_by(|a, b| b.0.total_cmp(&a.0));
                let half = 1.5 * coarse;
                let nf = (2.0 * half / step).ceil() as usize;
                let mut best = cells[0].0;
                for &(_, t0, p0) in cells.iter().take(8) {
                    for i in 0..=nf {
                        for j in 0..=nf {
                            let t = t0 - half + i as f64 * step;
                            let ph = p0 - half + j as f64 * step;
                            best = best.max(self.at(&Self::sphere(t, ph)));
                        }
                    }
                }
                best
            }
            p => panic!("brute force supports two or three predictors, got {p}"),
        }
    }
}
