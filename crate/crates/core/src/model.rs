//! Data containers, standardization to the model frame, and prediction.
//!
//! In the model frame every retained predictor column has zero mean and, by
//! default, `(1/n) Σᵢ x²ᵢⱼ = 1`; responses are centered (not rescaled).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{coefficient_matrix, SignalDecomposition};
use crate::numerics::Matrix;

/// Predictors `x` (n×p) and responses `y` (n×q).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows (predictors vs responses)",
                expected: (x.rows(), y.cols()),
                got: y.shape(),
            });
        }
        if x.rows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 observations, got {}",
                x.rows()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn q(&self) -> usize {
        self.y.cols()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
        }
    }
}

/// Column statistics mapping raw data to the model frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// Mean of every original predictor column.
    pub x_mean: Vec<f64>,
    /// Root-mean-square of every centered predictor column (1 under
    /// [`Scaling::CenterOnly`]); zero for dropped columns.
    pub x_scale: Vec<f64>,
    pub y_mean: Vec<f64>,
    /// Original indices of zero-variance columns, ascending.
    pub dropped: Vec<usize>,
}

impl Standardizer {
    /// Number of original predictor columns.
    pub fn p(&self) -> usize {
        self.x_mean.len()
    }

    pub fn q(&self) -> usize {
        self.y_mean.len()
    }

    /// Original indices of the columns kept in the model frame, ascending.
    pub fn retained(&self) -> Vec<usize> {
        let dropped: BTreeSet<usize> = self.dropped.iter().copied().collect();
        (0..self.p()).filter(|j| !dropped.contains(j)).collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.x_scale.len() != self.p() {
            return Err(Error::ModelFormat(
                "x_scale length differs from x_mean".into(),
            ));
        }
        let retained = self.retained();
        if retained.len() + self.dropped.len() != self.p() {
            return Err(Error::ModelFormat(
                "dropped indices out of range or repeated".into(),
            ));
        }
        if retained.iter().any(|&j| !(self.x_scale[j] > 0.0)) {
            return Err(Error::ModelFormat(
                "retained column with non-positive scale".into(),
            ));
        }
        Ok(())
    }
}

/// How predictor columns are brought into the model frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// Center and divide by the column root-mean-square, so `diag(S) = 1`.
    #[default]
    UnitVariance,
    /// Center only; `x_scale` is 1 for every retained column.
    CenterOnly,
}

impl std::fmt::Display for Scaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scaling::UnitVariance => "unit-variance",
            Scaling::CenterOnly => "center-only",
        })
    }
}

impl std::str::FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-variance" | "unit" => Ok(Scaling::UnitVariance),
            "center-only" | "center" => Ok(Scaling::CenterOnly),
            other => Err(Error::InvalidParameter(format!(
                "unknown scaling '{other}' (expected unit-variance or center-only)"
            ))),
        }
    }
}

/// Fits standardization statistics on `data` and returns the data in the model frame.
pub fn standardize_fit(data: &Dataset) -> Result<(Standardizer, Dataset)> {
    standardize_fit_with(data, Scaling::UnitVariance)
}

/// [`standardize_fit`] with an explicit column scaling.
pub fn standardize_fit_with(data: &Dataset, scaling: Scaling) -> Result<(Standardizer, Dataset)> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    let x_mean = data.x.column_means();
    let mut x_scale = vec![0.0; data.p()];
    let mut dropped = Vec::new();
    for (j, scale) in x_scale.iter_mut().enumerate() {
        let ss: f64 = (0..n)
            .map(|i| {
                let d = data.x[(i, j)] - x_mean[j];
                d * d
            })
            .sum();
        let rms = (ss / n as f64).sqrt();
        if rms <= 1e-12 * x_mean[j].abs().max(1.0) {
            dropped.push(j);
        } else {
            *scale = match scaling {
                Scaling::UnitVariance => rms,
                Scaling::CenterOnly => 1.0,
            };
        }
    }
    if dropped.len() == data.p() {
        return Err(Error::UnusableDesign(format!(
            "all {} predictor columns have zero variance",
            data.p()
        )));
    }
    let std = Standardizer {
        x_mean,
        x_scale,
        y_mean: data.y.column_means(),
        dropped,
    };
    let x = standardize_apply(&std, &data.x)?;
    let y = center_responses(&std, &data.y)?;
    Ok((std, Dataset { x, y }))
}

/// `(x − x_mean) / x_scale` on retained columns; dropped columns are removed.
/// Not idempotent: applying it to already-standardized data shifts it again.
pub fn standardize_apply(std: &Standardizer, x_new: &Matrix) -> Result<Matrix> {
    if x_new.cols() != std.p() {
        return Err(Error::DimensionMismatch {
            context: "predictor columns",
            expected: (x_new.rows(), std.p()),
            got: x_new.shape(),
        });
    }
    let retained = std.retained();
    Ok(Matrix::from_fn(x_new.rows(), retained.len(), |i, k| {
        let j = retained[k];
        (x_new[(i, j)] - std.x_mean[j]) / std.x_scale[j]
    }))
}

fn center_responses(std: &Standardizer, y: &Matrix) -> Result<Matrix> {
    if y.cols() != std.q() {
        return Err(Error::DimensionMismatch {
            context: "response columns",
            expected: (y.rows(), std.q()),
            got: y.shape(),
        });
    }
    Ok(Matrix::from_fn(y.rows(), y.cols(), |i, j| {
        y[(i, j)] - std.y_mean[j]
    }))
}

/// A fitted model: standardization, extracted components, and the tuning choice.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub standardizer: Standardizer,
    pub decomposition: SignalDecomposition,
    pub tau: f64,
    pub lambda: f64,
    /// Component count used by default for prediction and feature selection.
    pub k_opt: usize,
}

impl FittedModel {
    pub fn p(&self) -> usize {
        self.standardizer.p()
    }

    pub fn q(&self) -> usize {
        self.standardizer.q()
    }

    /// Coefficients of the first `k` components in the model frame.
    pub fn coefficients(&self, k: usize) -> Result<Matrix> {
        coefficient_matrix(&self.decomposition, k)
    }

    /// `Ŷ = 1 ȳᵀ + standardize(X_new) B̂_k`, with `k` defaulting to `k_opt`.
    pub fn predict(&self, x_new: &Matrix, k: Option<usize>) -> Result<Matrix> {
        let k = k.unwrap_or(self.k_opt);
        let b = self.coefficients(k)?;
        let z = standardize_apply(&self.standardizer, x_new)?;
        let mut y = z.matmul(&b)?;
        for i in 0..y.rows() {
            for (v, m) in y.row_mut(i).iter_mut().zip(&self.standardizer.y_mean) {
                *v += m;
            }
        }
        Ok(y)
    }

    /// Original predictor indices with a loading above `tol` in any of the
    /// first `k_opt` components.
    pub fn selected_features(&self, tol: f64) -> BTreeSet<usize> {
        let retained = self.standardizer.retained();
        let a = &self.decomposition.a;
        let k = self.k_opt.min(a.cols());
        (0..a.rows())
            .filter(|&j| (0..k).any(|c| a[(j, c)].abs() > tol))
            .map(|j| retained[j])
            .collect()
    }
}

/// Default loading threshold for feature selection.
pub const SELECTION_TOL: f64 = 1e-8;
