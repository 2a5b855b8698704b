use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("singular value decomposition of a {rows}x{cols} matrix did not converge")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("matrix is not positive semi-definite: leading minor of order {minor} failed after maximum jitter")]
    NotPositiveSemiDefinite { minor: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unusable design: {0}")]
    UnusableDesign(String),

    #[error("component count {k} out of range (available: {available})")]
    ComponentOutOfRange { k: usize, available: usize },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in numerical kernels rather than input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SvdNoConvergence { .. }
                | Error::NotPositiveSemiDefinite { .. }
                | Error::Consistency(_)
                | Error::DegenerateFit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
