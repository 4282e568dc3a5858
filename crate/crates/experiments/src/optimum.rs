use imlca_core::{Allocation, Bundle, TableValuation};
use imlca_solver::max_welfare_assignment;

use crate::error::{ExperimentError, Result};

pub const MAX_OPTIMUM_ITEMS: usize = 12;
pub const MAX_OPTIMUM_BIDDERS: usize = 8;

/// Welfare-maximizing allocation over all bundles at true values.
pub fn brute_force_optimum(values: &[TableValuation]) -> Result<(Allocation, f64)> {
    let m = values.first().map_or(0, |v| imlca_core::Valuation::num_items(v));
    if m > MAX_OPTIMUM_ITEMS || values.len() > MAX_OPTIMUM_BIDDERS {
        return Err(ExperimentError::TooLarge(format!(
            "{} bidders, {m} items (limit {MAX_OPTIMUM_BIDDERS} bidders, {MAX_OPTIMUM_ITEMS} items)",
            values.len()
        )));
    }
    let tables: Vec<Vec<f64>> = values.iter().map(|v| v.values().to_vec()).collect();
    let (masks, value) = max_welfare_assignment(m, &tables)
        .map_err(imlca_core::CoreError::from)?
        .expect("the empty assignment is always allowed");
    let bundles = masks
        .into_iter()
        .map(|mask| Bundle::from_mask(mask, m))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((Allocation::new(bundles), value))
}
