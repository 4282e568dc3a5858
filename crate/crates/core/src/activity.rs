//! Activity rules and the convergence bound.

use serde::{Deserialize, Serialize};

use crate::allocation::{wdp_reports, Economy};
use crate::error::{CoreError, Result};
use crate::model::{total_value, Allocation, Bundle, LinearPrices, ReportSet, ValuationView, TOL};

/// Margin a utility comparison must clear to count as strict.
pub const STRICT_MARGIN: f64 = 1e-7;

fn lower_utility(r: &ReportSet, x: &Bundle, prices: &LinearPrices) -> Result<f64> {
    Ok(r.lower(x)? - prices.price(x))
}

fn upper_utility(r: &ReportSet, x: &Bundle, prices: &LinearPrices) -> Result<f64> {
    Ok(r.upper(x)? - prices.price(x))
}

/// Whether some reported bundle's lower-bound utility beats the upper-bound
/// utility of every other report, strictly against `allocated` unless it is
/// `allocated` itself. Returns the first witness found, trying `allocated`
/// first and then reports in order.
pub fn mrpar_satisfied(reports: &ReportSet, prices: &LinearPrices, allocated: &Bundle) -> Result<(bool, Option<Bundle>)> {
    if !reports.contains(allocated) {
        return Err(CoreError::UnsupportedBundle {
            bidder: reports.bidder(),
            bundle: *allocated,
        });
    }
    let uppers: Vec<(Bundle, f64)> = reports
        .iter()
        .map(|r| (r.bundle, r.upper - prices.price(&r.bundle)))
        .collect();
    let ua = upper_utility(reports, allocated, prices)?;
    let candidates = std::iter::once(*allocated).chain(reports.bundles().filter(|b| b != allocated));
    for w in candidates {
        let lw = lower_utility(reports, &w, prices)?;
        let dominates = uppers.iter().all(|(x, u)| *x == w || lw >= u - TOL);
        let strict = w == *allocated || lw > ua + STRICT_MARGIN;
        if dominates && strict {
            return Ok((true, Some(w)));
        }
    }
    Ok((false, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiarError {
    /// Position of the report in its report set.
    pub index: usize,
    pub error: f64,
}

/// Pricing error of every report under the view perturbed towards
/// `allocated`, largest first. Equal errors keep report order.
pub fn diar_errors(reports: &ReportSet, prices: &LinearPrices, allocated: &Bundle) -> Result<Vec<DiarError>> {
    let base = lower_utility(reports, allocated, prices)?;
    let mut errors: Vec<DiarError> = reports
        .iter()
        .enumerate()
        .map(|(index, r)| DiarError {
            index,
            error: if r.bundle == *allocated {
                0.0
            } else {
                r.upper - prices.price(&r.bundle) - base
            },
        })
        .collect();
    errors.sort_by(|a, b| b.error.total_cmp(&a.error));
    Ok(errors)
}

/// [`diar_errors`] with the perturbed view given explicitly.
pub fn diar_errors_with(
    reports: &ReportSet,
    prices: &LinearPrices,
    allocated: &Bundle,
    view: &ValuationView,
) -> Result<Vec<DiarError>> {
    let base = view.value(reports, allocated)? - prices.price(allocated);
    let mut errors = reports
        .iter()
        .enumerate()
        .map(|(index, r)| {
            Ok(DiarError {
                index,
                error: view.value(reports, &r.bundle)? - prices.price(&r.bundle) - base,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    errors.sort_by(|a, b| b.error.total_cmp(&a.error));
    Ok(errors)
}

/// A report's error cannot be reduced once both intervals entering it are
/// exact. The allocated bundle's own error is identically zero.
pub fn is_irreducible(reports: &ReportSet, bundle: &Bundle, allocated: &Bundle) -> Result<bool> {
    let exact = |b: &Bundle| -> Result<bool> {
        let r = reports.get(b).ok_or(CoreError::UnsupportedBundle {
            bidder: reports.bidder(),
            bundle: *b,
        })?;
        Ok(r.width() <= TOL)
    };
    Ok(bundle == allocated || (exact(allocated)? && exact(bundle)?))
}

/// Errors are ranked on `before`. Satisfied if some report's error fell by
/// at least `epsilon` and every report ranked above it is irreducible in
/// `after`, or if every report is irreducible in `after`.
pub fn diar_satisfied(
    before: &ReportSet,
    after: &ReportSet,
    prices: &LinearPrices,
    allocated: &Bundle,
    epsilon: f64,
) -> Result<bool> {
    before.check_tightening(after)?;
    let ranked = diar_errors(before, prices, allocated)?;
    let after_base = lower_utility(after, allocated, prices)?;
    for e in &ranked {
        let r = before.at(e.index);
        let now = if r.bundle == *allocated {
            0.0
        } else {
            after.upper(&r.bundle)? - prices.price(&r.bundle) - after_base
        };
        if e.error - now >= epsilon - TOL {
            return Ok(true);
        }
        if !is_irreducible(after, &r.bundle, allocated)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `v̲(a̲) / ṽ(ã)`, where `a̲` maximizes lower-bound welfare over reports and
/// `ã` maximizes welfare under the view perturbed towards `a̲`.
pub fn convergence_bound(profile: &[ReportSet]) -> Result<f64> {
    let (lower_alloc, lower_value) = wdp_reports(&ValuationView::Lower, profile, Economy::Main)?;
    let tilde = ValuationView::Perturbed(lower_alloc.clone());
    let (_, tilde_value) = wdp_reports(&tilde, profile, Economy::Main)?;
    if tilde_value <= 0.0 {
        return Err(CoreError::Degenerate("perturbed welfare is zero".into()));
    }
    debug_assert!(tilde_value + TOL >= total_value(&tilde, profile, &lower_alloc)?);
    Ok(lower_value / tilde_value)
}

/// The allocation maximizing lower-bound welfare, as used by
/// [`convergence_bound`].
pub fn lower_allocation(profile: &[ReportSet]) -> Result<Allocation> {
    Ok(wdp_reports(&ValuationView::Lower, profile, Economy::Main)?.0)
}
