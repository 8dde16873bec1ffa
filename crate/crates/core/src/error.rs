use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite log weight at (expert {expert}, n {n}, neighbour {neighbour})")]
    NonFiniteLogWeight { expert: usize, n: usize, neighbour: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("clustering produced an empty cluster")]
    ClusteringDegenerate,

    #[error("samples are degenerate: axis {axis} has zero variance")]
    DegenerateSamples { axis: usize },

    #[error("density grids do not match")]
    GridMismatch,

    #[error("context does not match generator: {0}")]
    ContextMismatch(String),

    #[error("iteration {iteration}: {source}")]
    Fit {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::NonFinite(_)
            | Error::NonFiniteLogWeight { .. } => true,
            Error::Fit { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
