use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max deviation {0:e})")]
    NonSymmetric(f64),
    #[error("eigensolver did not converge")]
    ConvergenceFailure,
    #[error("all modes discarded by canonical orthogonalization")]
    AllModesDiscarded,
    #[error("matrix is not positive definite (eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bundle format error in `{field}`: {reason}")]
    FormatError { field: String, reason: String },
    #[error("symmetry violation in `{tensor}` (max deviation {max_dev:e})")]
    SymmetryViolation { tensor: String, max_dev: f64 },
    #[error("active-space trace mismatch: expected {expected}, got {got}")]
    TraceMismatch { expected: f64, got: f64 },
    #[error("natural occupation {0} outside [0, 2]")]
    OccupancyOutOfRange(f64),
    #[error("invalid filling: {0}")]
    InvalidFilling(String),
    #[error("dimension too large: {0}")]
    DimensionTooLarge(String),
    #[error("one-particle density matrix is not diagonal (max off-diagonal {0:e})")]
    BasisNotNatural(f64),
    #[error("zero or negative excitation energy {0:e}")]
    ZeroDenominator(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Process exit code class: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io(_) => 4,
            Error::FormatError { .. }
            | Error::SymmetryViolation { .. }
            | Error::TraceMismatch { .. }
            | Error::InvalidFilling(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::ShapeMismatch(_)
            | Error::DimensionTooLarge(_) => 2,
            _ => 3,
        }
    }
}
