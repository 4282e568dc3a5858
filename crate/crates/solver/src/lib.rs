//! Small dense solvers used by the auction engine.
//!
//! Everything here is exact at desk scale and deterministic: pivot, branching
//! and tie-breaking rules are fixed so repeated solves of the same problem
//! return bit-identical answers.
//!
//! * [`solve_lp`]: two-phase dense simplex.
//! * [`solve_milp`]: depth-first branch-and-bound over integer variables with
//!   LP relaxations; child nodes re-optimize the parent tableau by dual simplex.
//! * [`solve_qp`]: primal active-set method for convex (possibly
//!   semidefinite) quadratic programs.
//! * [`solve_wdp`]: winner determination over per-bidder candidate bundles.
//! * [`max_welfare_assignment`]: exact allocation of all items when every
//!   bundle has a value, by dynamic programming over item subsets.

mod error;
pub mod lp;
pub mod milp;
pub mod qp;
pub mod subset_dp;
pub mod wdp;

pub use error::SolverError;
pub use lp::{solve_lp, Comparison, LinearConstraint, LpOutcome, LpProblem, LpSolution, Sense};
pub use milp::{solve_milp, solve_milp_with, MilpOptions, MilpOutcome, MilpSolution};
pub use qp::{solve_qp, solve_qp_from, QpOutcome, QpProblem, QpSolution};
pub use subset_dp::{indicator_order_key, max_welfare_assignment};
pub use wdp::{solve_wdp, solve_wdp_with, WdpCandidate, WdpOptions, WdpProblem, WdpSolution};

pub type Result<T> = std::result::Result<T, SolverError>;
