//! Sparse signal-extraction regression for multivariate responses.
//!
//! The coefficient matrix `B` of `Y = XB + ε` is decomposed as `B = A Wᵀ`
//! where the scores `t_k = X α_k` give the best rank-`k` approximations of the
//! signal `XB`. Loadings are estimated one at a time from a penalized
//! generalized eigenvalue problem with a squared-ℓ1 elastic penalty, responses
//! by least squares on the orthogonal scores, and the penalty pair and
//! component count by five-fold cross-validation.

pub mod error;
pub mod extractor;
pub mod io;
pub mod model;
pub mod numerics;
pub mod simulate;
pub mod tuning;

pub use error::{Error, Result};
pub use extractor::{PenaltyPair, SignalDecomposition, SolverConfig};
pub use model::{Dataset, FittedModel, Scaling, Standardizer};
pub use numerics::{Matrix, RandomStream};
pub use tuning::{CvReport, PenaltyUnits, TuningGrid};
