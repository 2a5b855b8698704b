mod common;

use common::{max_abs_diff, to_na};
use proptest::prelude::*;
use sier::numerics::{cholesky_factor, sample_ar1, sample_compound, spd_solve, thin_svd};
use sier::{Matrix, RandomStream};

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |data| Matrix::new(r, c, data).unwrap())
    })
}

fn gram_defect(q: &Matrix) -> f64 {
    let g = q.t_matmul(q).unwrap();
    max_abs_diff(&g, &Matrix::identity(g.rows()))
}

proptest! {
    #[test]
    fn svd_matches_reference(a in matrix_strategy(6)) {
        let ours = thin_svd(&a).unwrap();
        let reference = to_na(&a).svd(false, false);
        let mut theirs: Vec<f64> = reference.singular_values.iter().copied().collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        let scale = theirs[0].max(1.0);
        prop_assert_eq!(ours.singular_values.len(), theirs.len());
        for (s, t) in ours.singular_values.iter().zip(&theirs) {
            prop_assert!((s - t).abs() <= 1e-8 * scale, "{} vs {}", s, t);
        }
        prop_assert!(ours.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(max_abs_diff(&ours.reconstruct(), &a) <= 1e-10 * scale);
        prop_assert!(gram_defect(&ours.u) <= 1e-10);
        prop_assert!(gram_defect(&ours.v) <= 1e-10);
    }

    #[test]
    fn cholesky_round_trip(b in matrix_strategy(6)) {
        // BᵀB + I is symmetric positive definite.
        let c = b.t_matmul(&b).unwrap().add(&Matrix::identity(b.cols())).unwrap();
        let l = cholesky_factor(&c).unwrap();
        for i in 0..l.rows() {
            for j in (i + 1)..l.cols() {
                prop_assert_eq!(l[(i, j)], 0.0);
            }
        }
        let back = l.matmul(&l.transpose()).unwrap();
        prop_assert!(max_abs_diff(&back, &c) <= 1e-10 * c.max_abs());
    }

    #[test]
    fn spd_solve_matches_reference(b in matrix_strategy(6), seed in any::<u64>()) {
        let c = b.t_matmul(&b).unwrap().add(&Matrix::identity(b.cols())).unwrap();
        let n = c.rows();
        let rhs = RandomStream::new(seed, 0).standard_normal_matrix(n, 1).into_vec();
        let x = spd_solve(c.as_slice(), n, &rhs).unwrap();
        let reference = to_na(&c)
            .lu()
            .solve(&nalgebra::DVector::from_vec(rhs))
            .unwrap();
        for (a, r) in x.iter().zip(reference.iter()) {
            prop_assert!((a - r).abs() <= 1e-9 * r.abs().max(1.0));
        }
    }
}

fn sample_covariance(x: &Matrix) -> Matrix {
    let n = x.rows() as f64;
    let c = x.t_matmul(x).unwrap();
    c.scale(1.0 / n)
}

#[test]
fn ar1_sampler_covariance() {
    let x = sample_ar1(0.6, 5, &mut RandomStream::new(3, 0), 200_000).unwrap();
    let cov = sample_covariance(&x);
    for j in 0..5 {
        for k in 0..5 {
            let target = 0.6f64.powi((j as i32 - k as i32).abs());
            assert!(
                (cov[(j, k)] - target).abs() < 0.02,
                "({j},{k}) {}",
                cov[(j, k)]
            );
        }
    }
}

#[test]
fn compound_sampler_covariance() {
    let x = sample_compound(0.3, 6, &mut RandomStream::new(4, 0), 200_000).unwrap();
    let cov = sample_covariance(&x);
    for j in 0..6 {
        for k in 0..6 {
            let target = if j == k { 1.0 } else { 0.3 };
            assert!(
                (cov[(j, k)] - target).abs() < 0.02,
                "({j},{k}) {}",
                cov[(j, k)]
            );
        }
    }
}

#[test]
fn streams_replay_and_separate() {
    let a = RandomStream::new(9, 0).standard_normal_matrix(3, 3);
    let b = RandomStream::new(9, 0).standard_normal_matrix(3, 3);
    let c = RandomStream::new(9, 1).standard_normal_matrix(3, 3);
    let d = RandomStream::new(9, 0)
        .substream(0)
        .standard_normal_matrix(3, 3);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, d);
}
