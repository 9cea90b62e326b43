use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability mass function has no entries")]
    EmptyPmf,

    #[error("negative probability {prob} at value {value}")]
    NegativeProbability { value: i64, prob: f64 },

    #[error("total mass {total} deviates from one")]
    MassNotOne { total: f64 },

    #[error("tail mass {tail_mass} exceeds tolerance {tolerance}")]
    TailTooLarge { tail_mass: f64, tolerance: f64 },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("claim distribution has negative support value {min}")]
    NegativeClaim { min: i64 },

    #[error("increments are not upwards skip-free (maximum support value {max} > 1)")]
    NotSkipFree { max: i64 },

    #[error(
        "net profit condition violated: mean claims {claims_mean} not below drift {drift_mean}"
    )]
    NetProfitViolation { claims_mean: f64, drift_mean: f64 },

    #[error("model needs at least one portfolio")]
    NoPortfolios,

    #[error("portfolio index {index} out of range 1..={count}")]
    PortfolioIndex { index: usize, count: usize },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("bad sequence: {0}")]
    BadSequence(String),

    #[error("query does not apply to this model: {0}")]
    QueryMismatch(String),

    #[error("enumeration budget exceeded: visited more than {budget} leaves (unpruned bound {required})")]
    BudgetExceeded { budget: u64, required: u128 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
