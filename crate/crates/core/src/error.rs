use imlca_solver::SolverError;
use thiserror::Error;

use crate::model::Bundle;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("bundle {bundle} is not reported by bidder {bidder}")]
    UnsupportedBundle { bidder: usize, bundle: Bundle },
    #[error("bidder {bidder} already reported bundle {bundle}")]
    DuplicateReport { bidder: usize, bundle: Bundle },
    #[error("invalid interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("refinement of bundle {bundle} widens [{old_lower}, {old_upper}] to [{new_lower}, {new_upper}]")]
    Widening {
        bundle: Bundle,
        old_lower: f64,
        old_upper: f64,
        new_lower: f64,
        new_upper: f64,
    },
    #[error("invalid price {0}")]
    InvalidPrice(f64),
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),
    #[error("item count mismatch: expected {expected}, got {got}")]
    ItemCount { expected: usize, got: usize },
    #[error("bundle mask {mask:#x} does not fit in {num_items} items")]
    BundleOutOfRange { mask: u64, num_items: usize },
    #[error("allocation is infeasible")]
    InfeasibleAllocation,
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("bidder {0} is frozen")]
    Frozen(usize),
    #[error("bidder {0} has reported every bundle")]
    ExhaustedBundleSpace(usize),
    #[error("bundle space of {available} non-empty bundles is smaller than {requested} initial queries")]
    BundleSpaceTooSmall { available: u64, requested: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, CoreError>;
