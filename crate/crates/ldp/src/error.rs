use thiserror::Error;

/// Errors raised by the library.
///
/// Numerical outcomes such as an infinite rate are values, not errors; this
/// type covers malformed input and violated preconditions only.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown state label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate entry: {0}")]
    Duplicate(String),
    #[error("row not stochastic: state `{label}` sums to {sum}")]
    NotStochastic { label: String, sum: f64 },
    #[error("initial distribution not normalized: sums to {0}")]
    BetaNotNormalized(f64),
    #[error("invalid probability {value} for {what}")]
    InvalidProbability { what: String, value: f64 },
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("invalid arity {got}: {why}")]
    InvalidArity { got: usize, why: &'static str },
    #[error("measure is not balanced")]
    NotBalanced,
    #[error("measure is not admissible ({:?})", .0.witness)]
    Inadmissible(Box<crate::measure::AdmissibilityVerdict>),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("state budget exceeded: {states} reachable states (budget {budget})")]
    BudgetExceeded { states: usize, budget: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
