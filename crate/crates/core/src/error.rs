use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary (max |U^dag U - I| = {0:.3e})")]
    NotUnitary(f64),

    #[error("channel is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("channel is not completely positive (min Choi eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),

    #[error("forbidden pulse combination {combo}: {rule}")]
    ForbiddenCombo { combo: String, rule: String },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("missing edge ({0}, {1}) in edge map")]
    MissingEdge(u32, u32),

    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("constraint `{constraint}` violated: {detail}")]
    Invariant { constraint: String, detail: String },

    #[error("degenerate fit: oscillation amplitude {0:.4} below 0.05")]
    DegenerateFit(f64),

    #[error("effective coupling is zero; pulse duration undefined")]
    ZeroCoupling,

    #[error("duration must be {requirement}, got {value} ns")]
    InvalidDuration { requirement: &'static str, value: f64 },

    #[error("clause {0} cannot be mapped onto a connected three-qubit chain")]
    UnmappableClause(usize),

    #[error("landscapes have mismatched configurations: {0}")]
    MismatchedConfigs(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failed numerical checks, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotUnitary(_)
                | Error::NotTracePreserving(_)
                | Error::NotCompletelyPositive(_)
                | Error::Invariant { .. }
                | Error::DegenerateFit(_)
        )
    }
}
