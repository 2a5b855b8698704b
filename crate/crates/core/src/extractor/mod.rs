//! Component extraction: cross moments, the population decomposition, the
//! penalized sequential solver, least-squares responses, and assembly of the
//! coefficient matrix.

mod population;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, norm1, Matrix};

pub use population::{population_decomposition, RANK_CUTOFF};
pub use solver::{solve_component, ComponentOutcome, ComponentSolution};

/// Largest predictor count for which `B̂ = M Mᵀ` and `S` are materialized.
pub const DENSE_LIMIT: usize = 200;

/// Cross moment `M = (1/n) Xᵀ(Y − 1ȳᵀ)` together with the design, which
/// realizes `S v = Zᵀ(Z v)` for `Z = X/√n` without forming `S`.
#[derive(Debug, Clone)]
pub struct CrossMoment {
    n: usize,
    /// `Zᵀ`, p×n: row `j` is predictor column `j` divided by `√n`.
    zt: Matrix,
    /// `S_jj`.
    s_diag: Vec<f64>,
    /// Centered responses.
    yc: Matrix,
    m: Matrix,
}

/// Builds the cross moment for model-frame predictors `x` and responses `y`
/// (centered internally).
pub fn cross_moment(x: &Matrix, y: &Matrix) -> Result<CrossMoment> {
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            context: "cross moment rows",
            expected: (x.rows(), y.cols()),
            got: y.shape(),
        });
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::InvalidParameter("cross moment of empty data".into()));
    }
    let means = y.column_means();
    let yc = Matrix::from_fn(n, y.cols(), |i, j| y[(i, j)] - means[j]);
    let m = x.t_matmul(&yc)?.scale(1.0 / n as f64);
    let root_n = (n as f64).sqrt();
    let zt = x.transpose().scale(1.0 / root_n);
    let s_diag = (0..zt.rows()).map(|j| dot(zt.row(j), zt.row(j))).collect();
    Ok(CrossMoment {
        n,
        zt,
        s_diag,
        yc,
        m,
    })
}

impl CrossMoment {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.m.rows()
    }

    pub fn q(&self) -> usize {
        self.m.cols()
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn centered_responses(&self) -> &Matrix {
        &self.yc
    }

    pub(crate) fn zt(&self) -> &Matrix {
        &self.zt
    }

    pub(crate) fn s_diag(&self) -> &[f64] {
        &self.s_diag
    }

    /// `Z α`.
    pub fn z_apply(&self, alpha: &[f64]) -> Vec<f64> {
        self.zt.t_mul_vec(alpha)
    }

    /// `S α = Zᵀ(Z α)`.
    pub fn s_apply(&self, alpha: &[f64]) -> Vec<f64> {
        self.zt.mul_vec(&self.z_apply(alpha))
    }

    /// `αᵀ S β`.
    pub fn s_inner(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        dot(&self.z_apply(alpha), &self.z_apply(beta))
    }

    /// Scores `t = X α`.
    pub fn scores(&self, alpha: &[f64]) -> Vec<f64> {
        let root_n = (self.n as f64).sqrt();
        self.z_apply(alpha)
            .into_iter()
            .map(|v| v * root_n)
            .collect()
    }

    /// `αᵀ B̂ α = ‖Mᵀα‖²`.
    pub fn b_quadratic(&self, alpha: &[f64]) -> f64 {
        let h = self.m.t_mul_vec(alpha);
        dot(&h, &h)
    }

    /// `B̂ = M Mᵀ`, only for `p ≤ DENSE_LIMIT`.
    pub fn b_hat(&self) -> Option<Matrix> {
        (self.p() <= DENSE_LIMIT).then(|| self.m.matmul(&self.m.transpose()).expect("shapes"))
    }

    /// `S = ZᵀZ`, only for `p ≤ DENSE_LIMIT`.
    pub fn s_matrix(&self) -> Option<Matrix> {
        (self.p() <= DENSE_LIMIT).then(|| self.zt.matmul(&self.zt.transpose()).expect("shapes"))
    }
}

/// Tuning pair `(τ, λ)` of the penalty `τ‖α‖²_λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPair {
    pub tau: f64,
    pub lambda: f64,
}

impl PenaltyPair {
    pub fn new(tau: f64, lambda: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be >= 0, got {tau}"
            )));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0, 1), got {lambda}"
            )));
        }
        Ok(Self { tau, lambda })
    }

    /// `‖α‖²_λ = (1−λ)‖α‖₂² + λ‖α‖₁²`.
    pub fn norm_sq(&self, alpha: &[f64]) -> f64 {
        let l1 = norm1(alpha);
        (1.0 - self.lambda) * dot(alpha, alpha) + self.lambda * l1 * l1
    }
}

/// `f(α) = αᵀB̂α / (αᵀSα + τ‖α‖²_λ)`; invariant under `α ↦ cα`, `c ≠ 0`.
pub fn ratio_objective(cm: &CrossMoment, penalty: &PenaltyPair, alpha: &[f64]) -> f64 {
    let denom = cm.s_inner(alpha, alpha) + penalty.tau * penalty.norm_sq(alpha);
    if denom <= 0.0 {
        return 0.0;
    }
    cm.b_quadratic(alpha) / denom
}

/// Knobs of the component solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Relative change of the ratio objective that ends the outer loop.
    pub tol: f64,
    /// Perturbed restarts in addition to the primary start.
    pub restarts: usize,
    /// Initial weight of the orthogonality penalty, relative to `1 + τ`.
    pub ortho_penalty_start: f64,
    /// Largest tolerated `|α̂_lᵀ S α|` for unit-S-norm loadings.
    pub ortho_tol: f64,
    /// Seed for restart perturbations.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            tol: 1e-8,
            restarts: 3,
            ortho_penalty_start: 1.0,
            ortho_tol: 1e-6,
            seed: 0x5eed,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0
            || !(self.tol > 0.0)
            || !(self.ortho_penalty_start > 0.0)
            || !(self.ortho_tol > 0.0)
        {
            return Err(Error::InvalidParameter(
                "solver iteration counts and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Loadings `A` (p×K), responses `W` (q×K), signal magnitudes `μ` and scores `T` (n×K).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDecomposition {
    pub a: Matrix,
    pub w: Matrix,
    pub mu: Vec<f64>,
    /// Training scores; absent for decompositions loaded from disk.
    pub scores: Option<Matrix>,
    /// Per-component convergence flags of the solver (all true for exact decompositions).
    pub converged: Vec<bool>,
}

impl SignalDecomposition {
    pub fn empty(p: usize, q: usize, n: usize) -> Self {
        Self {
            a: Matrix::zeros(p, 0),
            w: Matrix::zeros(q, 0),
            mu: Vec::new(),
            scores: Some(Matrix::zeros(n, 0)),
            converged: Vec::new(),
        }
    }

    /// Number of components `K`.
    pub fn k(&self) -> usize {
        self.a.cols()
    }
}

/// `Ŵᵀ = (1/n) Tᵀ(Y − 1ȳᵀ)`, the least-squares fit of centered `Y` on
/// scores with `TᵀT = n I`.
pub fn estimate_w(t: &Matrix, y: &Matrix) -> Result<Matrix> {
    let n = t.rows();
    if y.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "score/response rows",
            expected: (n, y.cols()),
            got: y.shape(),
        });
    }
    let gram = t.t_matmul(t)?.scale(1.0 / n as f64);
    let defect = gram.sub(&Matrix::identity(t.cols()))?.max_abs();
    if defect > 1e-6 {
        return Err(Error::Consistency(format!(
            "scores are not orthonormal: max |TᵀT/n − I| = {defect:.3e}"
        )));
    }
    let means = y.column_means();
    let yc = Matrix::from_fn(n, y.cols(), |i, j| y[(i, j)] - means[j]);
    Ok(yc.t_matmul(t)?.scale(1.0 / n as f64))
}

/// `Σ_{j≤k} α̂_j ŵ_jᵀ`.
pub fn coefficient_matrix(dec: &SignalDecomposition, k: usize) -> Result<Matrix> {
    if k > dec.k() {
        return Err(Error::ComponentOutOfRange {
            k,
            available: dec.k(),
        });
    }
    let (p, q) = (dec.a.rows(), dec.w.rows());
    let mut b = Matrix::zeros(p, q);
    for c in 0..k {
        let w = dec.w.column(c);
        for j in 0..p {
            let a = dec.a[(j, c)];
            if a != 0.0 {
                axpy(a, &w, b.row_mut(j));
            }
        }
    }
    Ok(b)
}

/// `μ_k / (μ_1 + … + μ_k)` for 1-based `k`; zero when the partial sum vanishes.
pub fn signal_fraction(mu: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= mu.len(), "component index out of range");
    let total: f64 = mu[..k].iter().sum();
    if total <= 0.0 {
        0.0
    } else {
        mu[k - 1] / total
    }
}

/// Extracts up to `k_max` components sequentially; see [`fit_components_until`].
pub fn fit_components(
    cm: &CrossMoment,
    penalty: &PenaltyPair,
    k_max: usize,
    cfg: &SolverConfig,
) -> Result<SignalDecomposition> {
    fit_components_until(cm, penalty, k_max, cfg, |_| false)
}

/// Extracts components one at a time, each S-orthogonal to its predecessors,
/// until `k_max` are found, the signal is exhausted, or `stop(μ̂₁..μ̂_k)`
/// returns true (the k-th component is kept).
pub fn fit_components_until(
    cm: &CrossMoment,
    penalty: &PenaltyPair,
    k_max: usize,
    cfg: &SolverConfig,
    mut stop: impl FnMut(&[f64]) -> bool,
) -> Result<SignalDecomposition> {
    cfg.validate()?;
    let (n, p) = (cm.n(), cm.p());
    let mut alphas: Vec<Vec<f64>> = Vec::new();
    let mut scores: Vec<Vec<f64>> = Vec::new();
    let mut mu = Vec::new();
    let mut converged = Vec::new();
    while alphas.len() < k_max {
        let sol = match solve_component(cm, penalty, &alphas, cfg)? {
            ComponentOutcome::Exhausted => break,
            ComponentOutcome::Solved(sol) => sol,
        };
        let mut alpha = sol.alpha;
        let mut t = cm.scores(&alpha);
        if score_drift(&t, &scores, n) > 1e-8 {
            alpha = solver::s_gram_schmidt(cm, alpha, &alphas);
            t = cm.scores(&alpha);
        }
        alphas.push(alpha);
        scores.push(t);
        mu.push(sol.mu_hat);
        converged.push(sol.converged);
        if stop(&mu) {
            break;
        }
    }
    let k = alphas.len();
    if k == 0 {
        return Ok(SignalDecomposition::empty(p, cm.q(), n));
    }
    let a = Matrix::from_columns(p, &alphas);
    let t = Matrix::from_columns(n, &scores);
    let w = estimate_w(&t, cm.centered_responses())?;
    Ok(SignalDecomposition {
        a,
        w,
        mu,
        scores: Some(t),
        converged,
    })
}

fn score_drift(t: &[f64], prev: &[Vec<f64>], n: usize) -> f64 {
    let nf = n as f64;
    let mut drift = (dot(t, t) / nf - 1.0).abs();
    for s in prev {
        drift = drift.max((dot(t, s) / nf).abs());
    }
    drift
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    #[test]
    fn hand_cross_moment() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]);
        let cm = cross_moment(&x, &x).unwrap();
        assert_eq!(cm.m()[(0, 0)], 1.0);
        assert_eq!(cm.b_hat().unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn constant_responses_annihilated() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 2.0], vec![0.0, -2.0]]);
        let y = Matrix::from_fn(3, 2, |_, j| j as f64 + 4.0);
        let cm = cross_moment(&x, &y).unwrap();
        assert_eq!(cm.m().max_abs(), 0.0);
    }

    #[test]
    fn b_hat_matches_definition() {
        let mut rs = RandomStream::new(21, 0);
        let x = rs.standard_normal_matrix(6, 4);
        let y = rs.standard_normal_matrix(6, 3);
        let cm = cross_moment(&x, &y).unwrap();
        // Brute force (1/n²) Xᵀ Yc Ycᵀ X with explicit loops.
        let n = 6.0;
        let mean: Vec<f64> = (0..3)
            .map(|j| (0..6).map(|i| y[(i, j)]).sum::<f64>() / n)
            .collect();
        let mut direct = Matrix::zeros(4, 4);
        for a in 0..4 {
            for b in 0..4 {
                let mut s = 0.0;
                for i in 0..6 {
                    for k in 0..6 {
                        let yy: f64 = (0..3)
                            .map(|j| (y[(i, j)] - mean[j]) * (y[(k, j)] - mean[j]))
                            .sum();
                        s += x[(i, a)] * yy * x[(k, b)];
                    }
                }
                direct[(a, b)] = s / (n * n);
            }
        }
        let diff = cm.b_hat().unwrap().sub(&direct).unwrap().max_abs();
        assert!(diff <= 1e-12, "{diff}");
    }

    #[test]
    fn penalty_domain() {
        assert!(PenaltyPair::new(-1.0, 0.1).is_err());
        assert!(PenaltyPair::new(1.0, 1.0).is_err());
        let p = PenaltyPair::new(2.0, 0.5).unwrap();
        assert!((p.norm_sq(&[1.0, -1.0]) - (0.5 * 2.0 + 0.5 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn estimate_w_cases() {
        // Two orthonormal score columns with ‖t‖²/n = 1.
        let t = Matrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ]);
        let y_const = Matrix::from_fn(4, 3, |_, j| j as f64);
        assert_eq!(estimate_w(&t, &y_const).unwrap().max_abs(), 0.0);

        let v = [0.6, 0.8];
        let y = Matrix::from_fn(4, 2, |i, j| t[(i, 0)] * v[j]);
        let w = estimate_w(&t, &y).unwrap();
        assert!((w[(0, 0)] - 0.6).abs() < 1e-15 && (w[(1, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(w[(0, 1)], 0.0);
        assert_eq!(w[(1, 1)], 0.0);

        let bad = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![0.0]]);
        assert!(matches!(estimate_w(&bad, &y), Err(Error::Consistency(_))));
    }

    #[test]
    fn coefficient_matrix_prefixes() {
        let dec = SignalDecomposition {
            a: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]),
            w: Matrix::from_rows(&[vec![3.0, 1.0]]),
            mu: vec![1.0, 0.5],
            scores: None,
            converged: vec![true, true],
        };
        assert_eq!(coefficient_matrix(&dec, 0).unwrap(), Matrix::zeros(2, 1));
        assert_eq!(
            coefficient_matrix(&dec, 1).unwrap(),
            Matrix::from_rows(&[vec![3.0], vec![0.0]])
        );
        assert_eq!(
            coefficient_matrix(&dec, 2).unwrap(),
            Matrix::from_rows(&[vec![3.0], vec![2.0]])
        );
        assert!(matches!(
            coefficient_matrix(&dec, 3),
            Err(Error::ComponentOutOfRange { k: 3, available: 2 })
        ));
    }

    #[test]
    fn signal_fraction_cases() {
        assert_eq!(signal_fraction(&[1.0, 0.0], 2), 0.0);
        assert_eq!(signal_fraction(&[1.0, 1.0], 2), 0.5);
        assert!((signal_fraction(&[1.0, 0.01], 2) - 0.01 / 1.01).abs() < 1e-15);
        assert_eq!(signal_fraction(&[0.0, 0.0], 2), 0.0);
    }
}
