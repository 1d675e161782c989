use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value exceeds representable range: {0}")]
    RangeExceeded(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid partition radius: mu(logR) = {mu} does not exceed logR = {log_r}")]
    InvalidR { log_r: String, mu: String },
    #[error("modulus lies beyond the stored partition (last comparable index {last})")]
    IndexBeyondDepth { last: usize },
    #[error("relabel differences span more than two values: {0:?}")]
    RelabelViolation(Vec<i64>),
    #[error("hypotheses failed: {}", .0.join(", "))]
    HypothesisFailed(Vec<String>),
    #[error("indeterminate: {0}")]
    Indeterminate(String),
    #[error("no preimage found in region after {seeds} seeds")]
    NoPreimageFound { seeds: usize },
    #[error("realization failed at depth {depth_reached}")]
    RealizationFailed { depth_reached: usize },
    #[error("zero on boundary circle could not be avoided")]
    BoundaryZero,
    #[error("winding sum {0} is not close to an integer")]
    NonIntegerResidual(f64),
    #[error("neither candidate annulus is covered")]
    NeitherCovered,
    #[error("ceiling violated: {0}")]
    CeilingViolated(String),
    #[error("no feasible partition radius: {0}")]
    NoFeasibleR(String),
    #[error("chain too short: {0}")]
    TooShort(String),
    #[error("degenerate inner annulus at index {0}")]
    DegenerateInnerAnnulus(usize),
    #[error("rate violates a(n+1) <= M(a(n)) at n = {0}")]
    RateViolation(usize),
    #[error("only {found} branch points within horizon (slowness check {slowness_ok})")]
    InsufficientBranching { found: usize, slowness_ok: bool },
    #[error("unrealizable: {0}")]
    Unrealizable(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("missing covering certificate for transition {from} -> {to}")]
    MissingCertificate { from: usize, to: usize },
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
