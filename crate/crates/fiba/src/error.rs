use thiserror::Error;

use crate::Timestamp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FibaError {
    #[error("minimum arity must be at least 2, got {0}")]
    MinArity(usize),
    #[error("bulk timestamps must strictly increase, got {next} after {prev}")]
    NotIncreasing { prev: Timestamp, next: Timestamp },
    #[error("arity {arity} fits in one node (max {max}), no split needed")]
    NoOverflow { arity: usize, max: usize },
}
