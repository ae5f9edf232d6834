use thiserror::Error;

use crate::diffpoly::Generator;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("time index {index} exceeds the active horizon T = {horizon}")]
    HorizonExceeded { index: u32, horizon: u32 },
    #[error("truncation budget exhausted: {0}")]
    TruncationBudget(String),
    #[error("generator {0} lies outside the derivation's known domain")]
    OutOfDomain(Generator),
    #[error("operator is not of the form 1 + lower order terms")]
    NotInvertible,
    #[error("inconsistent constraint system: {0}")]
    Inconsistent(String),
    #[error("unknown check {0:?}")]
    UnknownCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
