#![allow(dead_code)]

pub mod oracle;

use nalgebra::DMatrix;
use sier::extractor::{cross_moment, fit_components, CrossMoment};
use sier::model::standardize_fit_with;
use sier::{
    Dataset, FittedModel, Matrix, PenaltyPair, RandomStream, Scaling, SignalDecomposition,
    SolverConfig,
};

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Centered standard normal design.
pub fn centered_design(rs: &mut RandomStream, n: usize, p: usize) -> Matrix {
    let x = rs.standard_normal_matrix(n, p);
    let means = x.column_means();
    Matrix::from_fn(n, p, |i, j| x[(i, j)] - means[j])
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `(‖TᵀT/n − I‖_max, max_k |α_kᵀSα_k − 1|)` of a fit.
pub fn fit_defects(cm: &CrossMoment, dec: &SignalDecomposition) -> (f64, f64) {
    let k = dec.k();
    let t = dec.scores.as_ref().expect("training scores");
    let n = t.rows() as f64;
    let mut ortho = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            let g: f64 = (0..t.rows()).map(|i| t[(i, a)] * t[(i, b)]).sum::<f64>() / n;
            let target = if a == b { 1.0 } else { 0.0 };
            ortho = ortho.max((g - target).abs());
        }
    }
    let norm = (0..k)
        .map(|c| {
            let alpha = dec.a.column(c);
            (cm.s_inner(&alpha, &alpha) - 1.0).abs()
        })
        .fold(0.0f64, f64::max);
    (ortho, norm)
}

pub fn assert_fit_invariants(cm: &CrossMoment, dec: &SignalDecomposition) {
    let (ortho, norm) = fit_defects(cm, dec);
    assert!(ortho <= 1e-6, "score Gram defect {ortho:e}");
    assert!(norm <= 1e-8, "S-norm defect {norm:e}");
    assert!(dec.mu.iter().all(|m| *m >= 0.0));
}

/// Standardizes `data` and extracts up to `k` components at `(tau, lambda)`,
/// with `k_opt` set to the number extracted.
pub fn fit_model(
    data: &Dataset,
    tau: f64,
    lambda: f64,
    k: usize,
    scaling: Scaling,
) -> (FittedModel, CrossMoment) {
    let (std, frame) = standardize_fit_with(data, scaling).unwrap();
    let cm = cross_moment(&frame.x, &frame.y).unwrap();
    let pair = PenaltyPair::new(tau, lambda).unwrap();
    let dec = fit_components(&cm, &pair, k, &SolverConfig::default()).unwrap();
    let model = FittedModel {
        standardizer: std,
        k_opt: dec.k(),
        decomposition: dec,
        tau,
        lambda,
    };
    (model, cm)
}

/// `Y = XB + σε` with standard normal `X` and `ε`.
pub fn linear_data(rs: &mut RandomStream, n: usize, b: &Matrix, sigma: f64) -> Dataset {
    let x = rs.standard_normal_matrix(n, b.rows());
    let noise = rs.standard_normal_matrix(n, b.cols()).scale(sigma);
    let y = x.matmul(b).unwrap().add(&noise).unwrap();
    Dataset::new(x, y).unwrap()
}
