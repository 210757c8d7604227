use thiserror::Error;

/// Errors raised by the torus graph library.
///
/// Variants fall into three families that the command-line front end maps
/// onto exit codes: domain errors (bad inputs), numerical errors (singular
/// systems, non-convergence) and parse/schema errors.
#[derive(Debug, Error)]
pub enum TorusError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("mean direction of node {node} is unidentified (zero concentration)")]
    UnidentifiedMean { node: usize },

    #[error(
        "moment matrix is singular or ill-conditioned (condition estimate {condition:.3e}); \
         N = {n} samples for {n_params} active parameters (2d^2 = {full_params})"
    )]
    SingularMoments {
        condition: f64,
        n: usize,
        n_params: usize,
        full_params: usize,
    },

    #[error("degenerate test: covariance block for edge set is singular")]
    DegenerateTest,

    #[error("solver did not converge after {iterations} iterations (final residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("operation requires a phase-difference family fit, got {0}")]
    FamilyScope(String),

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<TorusError>,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TorusError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        TorusError::Domain(msg.into())
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            TorusError::SingularMoments { .. }
            | TorusError::DegenerateTest
            | TorusError::NoConvergence { .. } => true,
            TorusError::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// True for malformed JSON documents or schema mismatches.
    pub fn is_schema(&self) -> bool {
        match self {
            TorusError::Schema(_) => true,
            TorusError::Replicate { source, .. } => source.is_schema(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for TorusError {
    fn from(e: serde_json::Error) -> Self {
        TorusError::Schema(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TorusError>;
