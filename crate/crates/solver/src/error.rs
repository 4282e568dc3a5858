use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("quadratic term is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotConvex(f64),
    #[error("objective is unbounded below on the feasible set")]
    Unbounded,
    #[error("iteration limit reached after {0} iterations")]
    IterationLimit(usize),
    #[error("bidder {0} has no empty-bundle candidate")]
    MissingEmptyCandidate(usize),
    #[error("problem too large: {0}")]
    TooLarge(String),
}
