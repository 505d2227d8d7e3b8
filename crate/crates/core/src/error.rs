use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("depth exceeded: level {level} is beyond the maximum depth {max_depth}")]
    DepthExceeded { level: u32, max_depth: u32 },

    #[error("the root cube has no parent")]
    NoParent,

    #[error("cube {top} is not an ancestor of {cell}")]
    NotAncestor { cell: String, top: String },

    #[error("resolution error: cube at level {level} is finer than the measure depth {depth}")]
    Resolution { level: u32, depth: u32 },

    #[error("division by zero: cube {0} has zero mass")]
    ZeroMass(String),

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("empty set: the set has zero measure")]
    EmptySet,

    #[error("set too large: the root already qualifies (root average {root_average} > threshold {threshold})")]
    SetTooLarge { root_average: f64, threshold: f64 },

    #[error("ellipticity probe failed at ({x}, {t}): {detail}")]
    Ellipticity { x: f64, t: f64, detail: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("numerical failure after {iterations} iterations (relative residual {residual:e})")]
    NumericalFailure {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("certificate violation: {0}")]
    CertificateViolation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for numerical failures, 3 for violated
    /// certificates, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } => 2,
            Error::CertificateViolation(_) => 3,
            _ => 1,
        }
    }
}
