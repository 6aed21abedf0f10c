use thiserror::Error;

/// Errors raised by the calculus, geometry and flow layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point outside the cone {cone}: minimum slack {slack:e}")]
    ConeViolation { cone: String, slack: f64 },

    #[error("argument {value:e} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("unsupported dimension {0} (1 <= n <= 8)")]
    UnsupportedDimension(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("coincident points")]
    CoincidentPoints,

    #[error("curve is not embedded: segments {0} and {1} intersect")]
    SelfIntersection(usize, usize),

    #[error("convexity lost at node ({0}, {1}): principal radius {2:e}")]
    ConvexityLoss(usize, usize, f64),

    #[error("time step {dt:e} exceeds stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("insufficient history: need {need} states, got {got}")]
    InsufficientHistory { need: usize, got: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
