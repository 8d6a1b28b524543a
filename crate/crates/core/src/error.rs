use thiserror::Error;

/// Errors raised by the estimators, oracles and I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice specification: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "lattice mismatch: (dim={left_dim}, zn={left_zn}) vs (dim={right_dim}, zn={right_zn})"
    )]
    SpecMismatch {
        left_dim: usize,
        left_zn: usize,
        right_dim: usize,
        right_zn: usize,
    },

    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {dim} = {value} lies outside [-pi, pi]; rescale the data first")]
    OutOfBox { dim: usize, value: f64 },

    #[error("accumulator holds no samples")]
    EmptyAccumulator,

    #[error("dimension {dim} is degenerate (all values equal {value})")]
    DegenerateDimension { dim: usize, value: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error(
        "covariance is singular after ridge regularization (condition estimate {condition:.3e})"
    )]
    SingularCovariance { condition: f64 },

    #[error("not supported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge (worst coefficient at z={frequency}, error estimate {error:.3e})")]
    QuadratureNonConvergence { frequency: i64, error: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the input data rather than by parameters.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::OutOfBox { .. }
                | Error::DimensionMismatch { .. }
                | Error::DegenerateDimension { .. }
                | Error::TooFewSamples { .. }
                | Error::Csv { .. }
                | Error::Io(_)
                | Error::EmptyAccumulator
                | Error::SingularCovariance { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
