use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("scale factors must be positive (index {index})")]
    NonPositiveScale { index: usize },

    #[error("polynomial parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid signed permutation: {0}")]
    InvalidPermutation(String),

    #[error("group closure exceeded {cap} elements")]
    GroupTooLarge { cap: usize },

    #[error("unsupported symmetry group: {0}")]
    UnsupportedGroup(String),

    #[error("constraint `{constraint}`: monomial {monomial} is not expressible by the Gram basis")]
    Inexpressible {
        constraint: String,
        monomial: String,
    },

    #[error("constraint `{constraint}` has odd degree {degree}; it cannot be a sum of squares")]
    OddDegree { constraint: String, degree: u32 },

    #[error("inconsistent linear equality constraints on decision variables")]
    InconsistentEqualities,

    #[error("top-degree restriction unavailable: {0}")]
    NoAnsatz(String),

    #[error("invalid SDP problem: {0}")]
    InvalidProblem(String),

    #[error("invalid bound problem: {0}")]
    InvalidBoundProblem(String),

    #[error("no certificate found: {0}")]
    NoCertificate(String),

    #[error("empty retained trajectory (discard fraction {discard})")]
    EmptyTrajectory { discard: f64 },

    #[error("not an equilibrium: residual {residual:e}")]
    NotEquilibrium { residual: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
