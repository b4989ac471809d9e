use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index ({i}, {j}) out of range for n = {n}")]
    Index { i: usize, j: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("size {0} is infeasible")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("empty sieve: {0}")]
    EmptySieve(String),
    #[error("non-finite result: {0}")]
    NonFinite(String),
    #[error("matrix is singular")]
    Singular,
}

pub type Result<T> = std::result::Result<T, GridError>;
