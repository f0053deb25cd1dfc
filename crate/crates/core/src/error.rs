use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty vertex list")]
    EmptyInput,
    #[error("dimension {0} is too small; at least 3 is required")]
    DimensionTooSmall(usize),
    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::MAX_DIM)]
    DimensionTooLarge(usize),
    #[error("vector has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero vector where a nonzero one is required")]
    ZeroVector,
    #[error("vertex set is not centrally symmetric: {0}")]
    NotSymmetric(String),
    #[error("vertex set does not span the ambient space (rank {rank} < {dim})")]
    NotSpanning { rank: usize, dim: usize },
    #[error("input point {0} is not an extreme point of the hull")]
    NotExtreme(String),
    #[error("degenerate facet: {0}")]
    DegenerateFacet(String),
    #[error("integer overflow while primitivizing {0}")]
    Overflow(String),
    #[error("curve placement failed: best separation {best:.6} is below the minimum {required:.6}")]
    PlacementFailed { best: f64, required: f64 },
    #[error("class {0:?} is not primitive")]
    NotPrimitive(Vec<i64>),
    #[error("sampling grid step {step:.6} exceeds eps/4 = {limit:.6}")]
    SamplingTooCoarse { step: f64, limit: f64 },
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("node count {nodes} exceeds the budget of {budget}; use a smaller stencil radius or resolution")]
    OutOfMemoryBudget { nodes: usize, budget: usize },
    #[error("point lies outside the solver box")]
    TargetOutsideBox,
    #[error("vector {0:?} is not a nonnegative integer combination of the primitive classes of a single facet")]
    NotInIntegerCone(Vec<i64>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at {field}: {message}")]
    Parse { field: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
