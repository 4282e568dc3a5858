//! Winner determination over reported bundles.

use imlca_solver::{solve_wdp_with, WdpCandidate, WdpOptions, WdpProblem};

use crate::error::{CoreError, Result};
use crate::model::{Allocation, Bundle, ReportSet, ValuationView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Economy {
    Main,
    /// All bidders except the given one.
    Marginal(usize),
}

impl Economy {
    pub fn members(&self, num_bidders: usize) -> Vec<usize> {
        match *self {
            Economy::Main => (0..num_bidders).collect(),
            Economy::Marginal(excluded) => (0..num_bidders).filter(|&i| i != excluded).collect(),
        }
    }

    pub fn includes(&self, bidder: usize) -> bool {
        !matches!(*self, Economy::Marginal(excluded) if excluded == bidder)
    }

    pub fn validate(&self, num_bidders: usize) -> Result<()> {
        match *self {
            Economy::Marginal(i) if i >= num_bidders => Err(CoreError::Config(format!(
                "marginal economy excludes bidder {i} of {num_bidders}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WdpResult {
    pub allocation: Allocation,
    pub value: f64,
    /// False when a deadline stopped the search early.
    pub optimal: bool,
}

/// Best allocation over reported bundles under `view`, restricted to the
/// economy's bidders. Excluded bidders receive the empty bundle.
pub fn wdp_reports(view: &ValuationView, profile: &[ReportSet], economy: Economy) -> Result<(Allocation, f64)> {
    let r = wdp_reports_with(view, profile, economy, &WdpOptions::default())?;
    Ok((r.allocation, r.value))
}

pub fn wdp_reports_with(
    view: &ValuationView,
    profile: &[ReportSet],
    economy: Economy,
    opts: &WdpOptions,
) -> Result<WdpResult> {
    let n = profile.len();
    economy.validate(n)?;
    let num_items = profile.first().map_or(0, |r| r.num_items());
    let mut bidders = Vec::with_capacity(n);
    for (i, reports) in profile.iter().enumerate() {
        if reports.num_items() != num_items {
            return Err(CoreError::ItemCount {
                expected: num_items,
                got: reports.num_items(),
            });
        }
        let cands = if economy.includes(i) {
            reports
                .iter()
                .map(|r| {
                    Ok(WdpCandidate {
                        items: r.bundle.mask(),
                        weight: view.value(reports, &r.bundle)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![WdpCandidate { items: 0, weight: 0.0 }]
        };
        bidders.push(cands);
    }
    let problem = WdpProblem { num_items, bidders };
    let sol = solve_wdp_with(&problem, opts)?;
    let bundles = sol
        .selection
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            if economy.includes(i) {
                profile[i].at(k).bundle
            } else {
                Bundle::empty(num_items)
            }
        })
        .collect();
    Ok(WdpResult {
        allocation: Allocation::new(bundles),
        value: sol.value,
        optimal: sol.optimal,
    })
}

/// The α-mixed view and its welfare-maximizing allocation over reports.
pub fn provisional_allocation(profile: &[ReportSet], alpha: f64) -> Result<(ValuationView, Allocation)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CoreError::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    let view = ValuationView::Alpha(alpha);
    let (a, _) = wdp_reports(&view, profile, Economy::Main)?;
    Ok((view, a))
}

/// The perturbed view with respect to `a`, which must be feasible and use
/// only reported bundles.
pub fn perturbed_view(profile: &[ReportSet], a: &Allocation) -> Result<ValuationView> {
    if !a.is_feasible() {
        return Err(CoreError::InfeasibleAllocation);
    }
    for (reports, b) in profile.iter().zip(a.bundles()) {
        if !reports.contains(b) {
            return Err(CoreError::UnsupportedBundle {
                bidder: reports.bidder(),
                bundle: *b,
            });
        }
    }
    Ok(ValuationView::Perturbed(a.clone()))
}
