//! Component-count cap and cross-validated choice of `(τ, λ)` and `k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{
    cross_moment, fit_components, fit_components_until, signal_fraction, PenaltyPair,
    SignalDecomposition, SolverConfig,
};
use crate::model::{standardize_apply, standardize_fit_with, Dataset, FittedModel, Scaling};
use crate::numerics::{Matrix, RandomStream};

/// The twelve `(τ, λ)` pairs searched by default, with `λ` growing alongside `τ`.
pub const DEFAULT_PAIRS: [(f64, f64); 12] = [
    (0.05, 0.05),
    (0.1, 0.05),
    (0.1, 0.1),
    (0.5, 0.1),
    (0.5, 0.2),
    (1.0, 0.2),
    (1.0, 0.3),
    (5.0, 0.3),
    (5.0, 0.4),
    (10.0, 0.4),
    (50.0, 0.5),
    (100.0, 0.6),
];

pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_FOLDS: usize = 5;

/// Reference Gram matrix for the grid's `τ` values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyUnits {
    /// `τ` is used as given against `S = XᵀX/n`.
    #[default]
    Moment,
    /// `τ` is relative to `XᵀX`: a fit on `n` rows uses `τ/n` against `S`.
    Gram,
}

impl PenaltyUnits {
    /// The pair handed to the solver for a fit on `n` rows.
    pub fn effective(self, pair: PenaltyPair, n: usize) -> PenaltyPair {
        match self {
            PenaltyUnits::Moment => pair,
            PenaltyUnits::Gram => PenaltyPair {
                tau: pair.tau / n as f64,
                lambda: pair.lambda,
            },
        }
    }
}

impl std::fmt::Display for PenaltyUnits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyUnits::Moment => "moment",
            PenaltyUnits::Gram => "gram",
        })
    }
}

impl std::str::FromStr for PenaltyUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moment" => Ok(PenaltyUnits::Moment),
            "gram" => Ok(PenaltyUnits::Gram),
            other => Err(Error::InvalidParameter(format!(
                "unknown penalty units '{other}' (expected moment or gram)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub pairs: Vec<PenaltyPair>,
    /// Signal-fraction cutoff for the component cap.
    pub threshold: f64,
    pub folds: usize,
    /// Column scaling applied to every fit, including each fold's training rows.
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default)]
    pub units: PenaltyUnits,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self {
            pairs: DEFAULT_PAIRS
                .iter()
                .map(|&(tau, lambda)| PenaltyPair { tau, lambda })
                .collect(),
            threshold: DEFAULT_THRESHOLD,
            folds: DEFAULT_FOLDS,
            scaling: Scaling::default(),
            units: PenaltyUnits::default(),
        }
    }
}

impl TuningGrid {
    /// Default pairs with center-only predictors and `τ` relative to `XᵀX`:
    /// the setting under which the simulation designs are scored. Their
    /// low-variance nuisance predictors would be inflated by unit scaling.
    pub fn replication() -> Self {
        Self {
            scaling: Scaling::CenterOnly,
            units: PenaltyUnits::Gram,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::InvalidParameter("tuning grid has no pairs".into()));
        }
        for p in &self.pairs {
            PenaltyPair::new(p.tau, p.lambda)?;
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }
}

/// `K̂ = min(min(n, p, q), min{k > 1 : μ̂_k / Σ_{i≤k} μ̂_i ≤ threshold})`,
/// with the second term absent when the ratio never drops to the threshold.
pub fn max_components(mu: &[f64], n: usize, p: usize, q: usize, threshold: f64) -> usize {
    let cap = n.min(p).min(q);
    (2..=mu.len().min(cap))
        .find(|&k| signal_fraction(mu, k) <= threshold)
        .unwrap_or(cap)
}

/// Stop predicate for lazy extraction under the [`max_components`] rule.
pub fn component_cap_rule(
    n: usize,
    p: usize,
    q: usize,
    threshold: f64,
) -> impl FnMut(&[f64]) -> bool {
    let cap = n.min(p).min(q);
    move |mu: &[f64]| {
        let k = mu.len();
        k >= cap || (k > 1 && signal_fraction(mu, k) <= threshold)
    }
}

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub pairs: Vec<PenaltyPair>,
    /// Component cap `K̂_i` per pair, from the full data.
    pub k_caps: Vec<usize>,
    /// `ē_ij` for `j = 1..=K̂_i` (index `j − 1`).
    pub mean_errors: Vec<Vec<f64>>,
    /// `e_ij^(l)`: `[pair][j − 1][fold]`.
    pub fold_errors: Vec<Vec<Vec<f64>>>,
    pub chosen_pair: usize,
    /// `K̂_opt`, 1-based.
    pub chosen_k: usize,
    /// Fold index of every observation.
    pub fold_of: Vec<usize>,
}

impl CvReport {
    pub fn chosen_error(&self) -> f64 {
        self.mean_errors[self.chosen_pair][self.chosen_k - 1]
    }

    /// Minimizer of `ē_ij`; exact ties go to the smallest `j`, then the smallest `i`.
    pub fn argmin(mean_errors: &[Vec<f64>]) -> Option<(usize, usize)> {
        let max_k = mean_errors.iter().map(Vec::len).max().unwrap_or(0);
        let mut best: Option<(usize, usize, f64)> = None;
        for j in 0..max_k {
            for (i, row) in mean_errors.iter().enumerate() {
                if let Some(&e) = row.get(j) {
                    if best.is_none_or(|(_, _, b)| e < b) {
                        best = Some((i, j + 1, e));
                    }
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }
}

/// Seeded shuffle split into contiguous blocks; returns the fold of each index.
pub fn fold_assignment(n: usize, folds: usize, rs: &RandomStream) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    rs.clone().shuffle(&mut perm);
    let mut fold_of = vec![0; n];
    for l in 0..folds {
        let (start, end) = (l * n / folds, (l + 1) * n / folds);
        for &i in &perm[start..end] {
            fold_of[i] = l;
        }
    }
    fold_of
}

fn job_config(cfg: &SolverConfig, rs: &RandomStream) -> SolverConfig {
    SolverConfig {
        seed: rs.clone().next_u64(),
        ..cfg.clone()
    }
}

/// Squared validation errors `‖Y_val − Ŷ_j‖²_F / n_val` for `j = 1..=k_cap`,
/// built from one set of extracted components.
fn prefix_errors(
    dec: &SignalDecomposition,
    z_val: &Matrix,
    y_val: &Matrix,
    y_mean: &[f64],
    k_cap: usize,
) -> Vec<f64> {
    let (n_val, q) = y_val.shape();
    let mut resid = Matrix::from_fn(n_val, q, |i, j| y_val[(i, j)] - y_mean[j]);
    let mut errors = Vec::with_capacity(k_cap);
    let mut last = resid.frobenius_sq() / n_val as f64;
    for j in 0..k_cap {
        if j < dec.k() {
            let t = z_val.mul_vec(&dec.a.column(j));
            let w = dec.w.column(j);
            for (i, ti) in t.iter().enumerate() {
                for (r, wk) in resid.row_mut(i).iter_mut().zip(&w) {
                    *r -= ti * wk;
                }
            }
            last = resid.frobenius_sq() / n_val as f64;
        }
        errors.push(last);
    }
    errors
}

/// Chooses `(τ, λ)` and the component count by K-fold cross-validation and
/// returns the full-data model for the choice.
///
/// Caps `K̂_i` come from full-data fits. Each fold standardizes on its
/// training rows only, extracts `K̂_i` components, and scores every prefix
/// `j ≤ K̂_i` on the held-out rows. The returned model records `τ` as listed
/// in the grid, whatever its units.
pub fn cross_validate(
    data: &Dataset,
    grid: &TuningGrid,
    cfg: &SolverConfig,
    rs: &RandomStream,
) -> Result<(FittedModel, CvReport)> {
    grid.validate()?;
    cfg.validate()?;
    let n = data.n();
    let folds = grid.folds;
    if n < folds || n - n.div_ceil(folds) < 2 {
        return Err(Error::InvalidParameter(format!(
            "{n} observations cannot form {folds} folds with at least 2 training rows"
        )));
    }

    let (std, frame) = standardize_fit_with(data, grid.scaling)?;
    let cm = cross_moment(&frame.x, &frame.y)?;
    let (p, q) = (cm.p(), cm.q());
    let full_streams = rs.substream(1);
    let full_fits: Vec<SignalDecomposition> = grid
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let job_cfg = job_config(cfg, &full_streams.substream(i as u64));
            fit_components_until(
                &cm,
                &grid.units.effective(*pair, n),
                n.min(p).min(q),
                &job_cfg,
                component_cap_rule(n, p, q, grid.threshold),
            )
        })
        .collect::<Result<_>>()?;
    let k_caps: Vec<usize> = full_fits.iter().map(SignalDecomposition::k).collect();
    if k_caps.iter().all(|&k| k == 0) {
        return Err(Error::DegenerateFit(
            "no penalty pair extracted a single component from the full data".into(),
        ));
    }

    let fold_of = fold_assignment(n, folds, &rs.substream(0));
    let fold_streams = rs.substream(2);
    let jobs: Vec<(usize, usize)> = (0..grid.pairs.len())
        .filter(|&i| k_caps[i] > 0)
        .flat_map(|i| (0..folds).map(move |l| (i, l)))
        .collect();
    let job_errors: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, l)| {
            let train: Vec<usize> = (0..n).filter(|&r| fold_of[r] != l).collect();
            let val: Vec<usize> = (0..n).filter(|&r| fold_of[r] == l).collect();
            let (std_l, frame_l) = standardize_fit_with(&data.subset(&train), grid.scaling)?;
            let cm_l = cross_moment(&frame_l.x, &frame_l.y)?;
            let job_cfg = job_config(cfg, &fold_streams.substream((i * folds + l) as u64));
            let pair = grid.units.effective(grid.pairs[i], train.len());
            let dec = fit_components(&cm_l, &pair, k_caps[i], &job_cfg)?;
            let z_val = standardize_apply(&std_l, &data.x.select_rows(&val))?;
            let y_val = data.y.select_rows(&val);
            Ok(prefix_errors(
                &dec,
                &z_val,
                &y_val,
                &std_l.y_mean,
                k_caps[i],
            ))
        })
        .collect::<Result<_>>()?;

    let mut fold_errors: Vec<Vec<Vec<f64>>> =
        k_caps.iter().map(|&k| vec![vec![0.0; folds]; k]).collect();
    for (&(i, l), errs) in jobs.iter().zip(&job_errors) {
        for (j, e) in errs.iter().enumerate() {
            fold_errors[i][j][l] = *e;
        }
    }
    let mean_errors: Vec<Vec<f64>> = fold_errors
        .iter()
        .map(|per_k| {
            per_k
                .iter()
                .map(|fe| fe.iter().sum::<f64>() / folds as f64)
                .collect()
        })
        .collect();
    let (chosen_pair, chosen_k) = CvReport::argmin(&mean_errors)
        .ok_or_else(|| Error::DegenerateFit("empty validation grid".into()))?;

    let pair = grid.pairs[chosen_pair];
    let decomposition = full_fits
        .into_iter()
        .nth(chosen_pair)
        .expect("pair index in range");
    let model = FittedModel {
        standardizer: std,
        decomposition,
        tau: pair.tau,
        lambda: pair.lambda,
        k_opt: chosen_k,
    };
    let report = CvReport {
        pairs: grid.pairs.clone(),
        k_caps,
        mean_errors,
        fold_errors,
        chosen_pair,
        chosen_k,
        fold_of,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_the_standard_sequence() {
        let g = TuningGrid::default();
        assert_eq!(g.pairs.len(), 12);
        assert_eq!(
            g.pairs[0],
            PenaltyPair {
                tau: 0.05,
                lambda: 0.05
            }
        );
        assert_eq!(
            g.pairs[11],
            PenaltyPair {
                tau: 100.0,
                lambda: 0.6
            }
        );
        assert!(g
            .pairs
            .windows(2)
            .all(|w| w[0].tau <= w[1].tau && w[0].lambda <= w[1].lambda));
        assert_eq!(g.folds, 5);
        assert_eq!(g.threshold, 0.05);
    }

    #[test]
    fn gram_units_divide_by_rows() {
        let pair = PenaltyPair {
            tau: 9.0,
            lambda: 0.3,
        };
        assert_eq!(PenaltyUnits::Moment.effective(pair, 90), pair);
        assert_eq!(
            PenaltyUnits::Gram.effective(pair, 90),
            PenaltyPair {
                tau: 0.1,
                lambda: 0.3
            }
        );
        assert_eq!("gram".parse::<PenaltyUnits>().unwrap(), PenaltyUnits::Gram);
    }

    #[test]
    fn cap_rule_examples() {
        assert_eq!(max_components(&[1.0, 0.01], 10, 10, 10, 0.05), 2);
        assert_eq!(max_components(&[1.0; 60], 50, 50, 50, 0.05), 20);
        let slow = [1.0, 0.9, 0.8, 0.7, 0.6];
        assert_eq!(max_components(&slow, 3, 100, 100, 0.05), 3);
    }

    #[test]
    fn cap_rule_matches_lazy_predicate() {
        let mu = [1.0, 0.5, 0.2, 0.05, 0.01, 0.001];
        let mut stop = component_cap_rule(100, 100, 100, 0.05);
        let lazy = (1..=mu.len()).find(|&k| stop(&mu[..k])).unwrap();
        assert_eq!(lazy, max_components(&mu, 100, 100, 100, 0.05));
        let mut stop = component_cap_rule(100, 2, 100, 0.05);
        assert!(!stop(&mu[..1]));
        assert!(stop(&mu[..2]));
    }

    #[test]
    fn folds_partition() {
        let rs = RandomStream::new(4, 0);
        for n in [10usize, 11, 14, 90] {
            let f = fold_assignment(n, 5, &rs);
            let mut sizes = [0usize; 5];
            f.iter().for_each(|&l| sizes[l] += 1);
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            assert_eq!(f, fold_assignment(n, 5, &rs));
        }
    }

    #[test]
    fn argmin_prefers_parsimony_on_ties() {
        let grid = vec![vec![0.5, 0.2, 0.2], vec![0.4, 0.2]];
        assert_eq!(CvReport::argmin(&grid), Some((0, 2)));
        let grid = vec![vec![0.5, 0.3], vec![0.4, 0.1, 0.05]];
        assert_eq!(CvReport::argmin(&grid), Some((1, 3)));
        assert_eq!(CvReport::argmin(&[vec![], vec![]]), None);
    }
}
