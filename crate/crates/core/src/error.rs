use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient custom moments: need {needed}, got {got}")]
    InsufficientCustomMoments { needed: usize, got: usize },

    #[error("invalid moment model: {0}")]
    InvalidModel(String),

    #[error("series order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("order exceeds truncation: k = {k}, series order = {order}")]
    OrderExceedsTruncation { k: usize, order: usize },

    #[error("no closed form for 2k = {0}; closed forms exist for 2k in {{2, 4, 6, 8}}")]
    NoClosedForm(usize),

    #[error("enumeration of {count} compositions exceeds the cap of {cap}")]
    CompositionCap { count: u128, cap: u128 },

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: String },

    #[error("probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("variable count overflow: {0}")]
    CountOverflow(String),

    #[error("filter has real characteristic roots (b1^2 >= 4*b2 or b2 <= 0): b1 = {b1}, b2 = {b2}")]
    RealRoots { b1: f64, b2: f64 },

    #[error("filter not BIBO stable; worst case unbounded (b2 = {0})")]
    NotBiboStable(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("resource cap exceeded: estimated {estimated} operations, cap {cap}")]
    CapExceeded { estimated: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    /// The request falls outside the hypotheses the bounds rely on.
    #[error("refused: {0}")]
    Refused(String),
}

impl Error {
    /// Process exit code for the CLI: 2 invalid input, 3 refused or over a
    /// resource cap, 4 computation failure. (0 and 1 are success and a failed verdict.)
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Refused(_) | Error::CapExceeded { .. } | Error::CompositionCap { .. } => 3,
            Error::NonFinite(_)
            | Error::NoConvergence(_)
            | Error::NotBiboStable(_)
            | Error::OrderMismatch { .. }
            | Error::Serialization(_) => 4,
            _ => 2,
        }
    }
}
