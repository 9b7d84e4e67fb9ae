use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ground space: {0}")]
    InvalidSpace(String),

    #[error("state budget exceeded: {states} states requested, budget is {budget}")]
    BudgetExceeded { states: u128, budget: u64 },

    #[error("negative time t={0}")]
    NegativeTime(f64),

    #[error("invalid parameter {name}={value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite value {value} at configuration {counts:?}")]
    NonFinite { counts: Vec<u32>, value: f64 },

    #[error("negative value {value} at configuration {counts:?}")]
    NegativeValue { counts: Vec<u32>, value: f64 },

    #[error("0*log(0) convention refused at {counts:?}: F=0 with non-zero difference {diff}")]
    ConventionRefused { counts: Vec<u32>, diff: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("operation requires {0} mode")]
    WrongMode(&'static str),

    #[error("functional is not bounded (no bounded_by declaration)")]
    Unbounded,

    #[error("{0}")]
    Parse(#[from] crate::dsl::ParseError),
}

pub type Result<T> = std::result::Result<T, Error>;
