use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid linear program: {0}")]
    InvalidProgram(String),

    #[error("LP solver could not certify a result: {0}")]
    NumericalFailure(String),

    #[error("operation requires a nonempty set")]
    EmptySet,

    #[error("interval division by an interval containing zero: [{lo}, {hi}]")]
    DivisionByZeroInterval { lo: f64, hi: f64 },

    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("unknown variable `{name}` at position {pos} (state dimension {dim})")]
    UnknownVariable { name: String, pos: usize, dim: usize },

    #[error("network schema error: {0}")]
    Schema(String),

    #[error("layer {layer} expects input of size {expected}, previous layer produces {found}")]
    DimensionChain {
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("neuron index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("input-generator prefix violated: {0}")]
    PrefixViolation(String),

    #[error("linearization point lies outside the interval hull")]
    GammaOutsideHull,

    #[error("reach set has {count} members, exceeding the cap of {cap}; use the over-approximation method")]
    MemberExplosion { count: usize, cap: usize },

    #[error("verification method mismatch: {0}")]
    MethodMismatch(String),

    #[error("{0}")]
    Invalid(String),
}
