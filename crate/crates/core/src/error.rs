use thiserror::Error;

/// Errors raised by the manifold kernels, the averaging solvers and the
/// experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is rank deficient (smallest pivot {smallest:.3e} <= tolerance {tol:.3e})")]
    RankDeficient { smallest: f64, tol: f64 },

    #[error("structured linear system is singular: {0}")]
    Unsolvable(&'static str),

    #[error("iteration did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("{0} decomposition did not converge")]
    Decomposition(&'static str),

    #[error("eigenvalue gap {gap:.3e} at index k is below tolerance {tol:.3e}; projection is not unique")]
    EigenGapDegenerate { gap: f64, tol: f64 },

    #[error("subspaces are at or beyond a right principal angle (cosine {cosine:.3e}); logarithm undefined")]
    CutLocus { cosine: f64 },

    #[error("lifting failed for sample {index}: {source}")]
    LiftingFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix is not on the manifold: {0}")]
    NotOnManifold(String),

    #[error("matrix is not tangent at the base point (residual {0:.3e})")]
    NotTangent(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn lifting(index: usize, source: Error) -> Self {
        Error::LiftingFailure {
            index,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
