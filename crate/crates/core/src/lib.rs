//! Iterative ML-powered combinatorial auction with interval bids.
//!
//! Bidders report lower and upper bounds on bundle values. Each round the
//! mechanism fits a kernel model per bidder, asks for the bundles the learned
//! values suggest, and quotes linear item prices that bidders use to tighten
//! their bounds under two activity rules. The final allocation and payments
//! are computed from lower bounds.

pub mod activity;
pub mod allocation;
pub mod bidder;
mod error;
pub mod mechanism;
pub mod ml;
pub mod model;
pub mod pricing;

pub use activity::{convergence_bound, diar_errors, diar_satisfied, mrpar_satisfied, DiarError};
pub use allocation::{perturbed_view, provisional_allocation, wdp_reports, Economy};
pub use bidder::{answer_interval_query, Bidder, BoundedBell, SimBidder, StubbornBidder};
pub use error::{CoreError, Result};
pub use mechanism::{
    determine_outcome, run_auction, AlphaPolicy, AuctionTrace, EpsilonPolicy, MechanismConfig, Phase, RoundRecord,
    Variant,
};
pub use ml::{fit_interval_model, generate_round_queries, learned_allocation, next_query, KernelModel, KernelParams, QueryPlan};
pub use model::{
    efficiency, is_feasible, relative_revenue, reporting_uncertainty, total_true_value, total_value, Allocation,
    Bundle, IntervalReport, LinearPrices, Outcome, ReportSet, TableValuation, Valuation, ValuationView, TOL,
};
pub use pricing::{
    approx_clearing_prices, effort_reduction_prices, is_clearing, is_clearing_true, unique_prices, PriceSolution,
};
