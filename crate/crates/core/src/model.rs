//! Domain types: bundles, interval reports, allocations, prices and the
//! valuation views the mechanism reads reports through.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Absolute tolerance for weak comparisons of currency values.
pub const TOL: f64 = 1e-6;

/// Largest supported number of items.
pub const MAX_ITEMS: usize = 64;

/// A set of items, stored as a bitmask. Item 0 is the first coordinate of
/// the indicator vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bundle {
    mask: u64,
    num_items: u8,
}

impl Bundle {
    pub fn empty(num_items: usize) -> Self {
        assert!(num_items <= MAX_ITEMS, "at most {MAX_ITEMS} items");
        Self {
            mask: 0,
            num_items: num_items as u8,
        }
    }

    pub fn full(num_items: usize) -> Self {
        let mut b = Self::empty(num_items);
        b.mask = all_items(num_items);
        b
    }

    pub fn from_mask(mask: u64, num_items: usize) -> Result<Self> {
        if num_items > MAX_ITEMS || mask & !all_items(num_items) != 0 {
            return Err(CoreError::BundleOutOfRange { mask, num_items });
        }
        Ok(Self {
            mask,
            num_items: num_items as u8,
        })
    }

    pub fn from_items(items: &[usize], num_items: usize) -> Result<Self> {
        let mut mask = 0u64;
        for &j in items {
            if j >= num_items {
                return Err(CoreError::BundleOutOfRange {
                    mask: 1u64.checked_shl(j as u32).unwrap_or(0),
                    num_items,
                });
            }
            mask |= 1 << j;
        }
        Self::from_mask(mask, num_items)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn num_items(&self) -> usize {
        self.num_items as usize
    }

    /// Number of items in the bundle.
    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, item: usize) -> bool {
        item < self.num_items() && self.mask >> item & 1 == 1
    }

    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_items()).filter(|&j| self.contains(j))
    }

    pub fn is_disjoint(&self, other: &Bundle) -> bool {
        self.mask & other.mask == 0
    }

    pub fn overlap(&self, other: &Bundle) -> usize {
        (self.mask & other.mask).count_ones() as usize
    }

    /// Rank in lexicographic order of indicator vectors.
    pub fn order_key(&self) -> u64 {
        imlca_solver::indicator_order_key(self.mask, self.num_items())
    }

    pub fn indicators(&self) -> Vec<f64> {
        (0..self.num_items())
            .map(|j| if self.contains(j) { 1.0 } else { 0.0 })
            .collect()
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.items().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

pub(crate) fn all_items(num_items: usize) -> u64 {
    if num_items >= 64 {
        u64::MAX
    } else {
        (1u64 << num_items) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub bundle: Bundle,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalReport {
    pub fn new(bundle: Bundle, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 || lower > upper {
            return Err(CoreError::InvalidInterval { lower, upper });
        }
        Ok(Self {
            bundle,
            lower,
            upper,
        })
    }

    pub fn exact(bundle: Bundle, value: f64) -> Result<Self> {
        Self::new(bundle, value, value)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `(upper − lower) / upper`, or 0 for a zero-valued report.
    pub fn uncertainty(&self) -> f64 {
        if self.upper <= 0.0 {
            0.0
        } else {
            (self.upper - self.lower) / self.upper
        }
    }
}

pub fn reporting_uncertainty(r: &IntervalReport) -> f64 {
    r.uncertainty()
}

/// All interval reports of one bidder, in the order they were made. The
/// empty bundle is always the first entry, reported exactly at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSet {
    bidder: usize,
    num_items: usize,
    reports: IndexMap<Bundle, (f64, f64)>,
}

impl ReportSet {
    pub fn new(bidder: usize, num_items: usize) -> Self {
        let mut reports = IndexMap::new();
        reports.insert(Bundle::empty(num_items), (0.0, 0.0));
        Self {
            bidder,
            num_items,
            reports,
        }
    }

    pub fn bidder(&self) -> usize {
        self.bidder
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Number of reports including the empty bundle.
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    /// Number of reports on non-empty bundles.
    pub fn num_queried(&self) -> usize {
        self.reports.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, bundle: &Bundle) -> bool {
        self.reports.contains_key(bundle)
    }

    pub fn get(&self, bundle: &Bundle) -> Option<IntervalReport> {
        self.reports.get(bundle).map(|&(lower, upper)| IntervalReport {
            bundle: *bundle,
            lower,
            upper,
        })
    }

    pub fn index_of(&self, bundle: &Bundle) -> Option<usize> {
        self.reports.get_index_of(bundle)
    }

    pub fn at(&self, index: usize) -> IntervalReport {
        let (&bundle, &(lower, upper)) = self.reports.get_index(index).expect("report index");
        IntervalReport {
            bundle,
            lower,
            upper,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = IntervalReport> + '_ {
        self.reports.iter().map(|(&bundle, &(lower, upper))| IntervalReport {
            bundle,
            lower,
            upper,
        })
    }

    pub fn bundles(&self) -> impl Iterator<Item = Bundle> + '_ {
        self.reports.keys().copied()
    }

    pub fn lower(&self, bundle: &Bundle) -> Result<f64> {
        self.get(bundle).map(|r| r.lower).ok_or(self.unsupported(bundle))
    }

    pub fn upper(&self, bundle: &Bundle) -> Result<f64> {
        self.get(bundle).map(|r| r.upper).ok_or(self.unsupported(bundle))
    }

    fn unsupported(&self, bundle: &Bundle) -> CoreError {
        CoreError::UnsupportedBundle {
            bidder: self.bidder,
            bundle: *bundle,
        }
    }

    pub fn insert(&mut self, report: IntervalReport) -> Result<()> {
        if report.bundle.num_items() != self.num_items {
            return Err(CoreError::ItemCount {
                expected: self.num_items,
                got: report.bundle.num_items(),
            });
        }
        if self.reports.contains_key(&report.bundle) {
            return Err(CoreError::DuplicateReport {
                bidder: self.bidder,
                bundle: report.bundle,
            });
        }
        IntervalReport::new(report.bundle, report.lower, report.upper)?;
        self.reports.insert(report.bundle, (report.lower, report.upper));
        Ok(())
    }

    /// Replace the interval of a reported bundle with a tighter one. Moves
    /// against the tightening direction within [`TOL`] are ignored; larger
    /// ones are an error. Returns the number of bounds that changed.
    pub fn tighten(&mut self, bundle: &Bundle, lower: f64, upper: f64) -> Result<usize> {
        let unsupported = self.unsupported(bundle);
        let entry = self.reports.get_mut(bundle).ok_or(unsupported)?;
        let (old_lower, old_upper) = *entry;
        if !(lower.is_finite() && upper.is_finite()) || lower < old_lower - TOL || upper > old_upper + TOL {
            return Err(CoreError::Widening {
                bundle: *bundle,
                old_lower,
                old_upper,
                new_lower: lower,
                new_upper: upper,
            });
        }
        let mut new_lower = lower.max(old_lower);
        let mut new_upper = upper.min(old_upper);
        if new_lower > new_upper {
            if new_lower - new_upper > TOL {
                return Err(CoreError::InvalidInterval {
                    lower: new_lower,
                    upper: new_upper,
                });
            }
            let mid = 0.5 * (new_lower + new_upper);
            new_lower = mid;
            new_upper = mid;
        }
        let changed = usize::from(new_lower != old_lower) + usize::from(new_upper != old_upper);
        *entry = (new_lower, new_upper);
        Ok(changed)
    }

    /// Checks that `after` reports the same bundles as `self`, possibly more,
    /// with every shared interval tightened or unchanged.
    pub fn check_tightening(&self, after: &ReportSet) -> Result<()> {
        for r in self.iter() {
            let a = after.get(&r.bundle).ok_or(self.unsupported(&r.bundle))?;
            if a.lower < r.lower - TOL || a.upper > r.upper + TOL {
                return Err(CoreError::Widening {
                    bundle: r.bundle,
                    old_lower: r.lower,
                    old_upper: r.upper,
                    new_lower: a.lower,
                    new_upper: a.upper,
                });
            }
        }
        Ok(())
    }

    pub fn mean_uncertainty(&self) -> Option<f64> {
        let n = self.num_queried();
        (n > 0).then(|| self.iter().skip(1).map(|r| r.uncertainty()).sum::<f64>() / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    bundles: Vec<Bundle>,
}

impl Allocation {
    pub fn new(bundles: Vec<Bundle>) -> Self {
        Self { bundles }
    }

    pub fn empty(num_bidders: usize, num_items: usize) -> Self {
        Self::new(vec![Bundle::empty(num_items); num_bidders])
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn bundle(&self, bidder: usize) -> &Bundle {
        &self.bundles[bidder]
    }

    pub fn num_bidders(&self) -> usize {
        self.bundles.len()
    }

    /// Union of all allocated items.
    pub fn allocated_mask(&self) -> u64 {
        self.bundles.iter().fold(0, |acc, b| acc | b.mask())
    }

    pub fn is_feasible(&self) -> bool {
        let mut used = 0u64;
        for b in &self.bundles {
            if b.mask() & used != 0 {
                return false;
            }
            used |= b.mask();
        }
        true
    }
}

pub fn is_feasible(a: &Allocation) -> bool {
    a.is_feasible()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPrices {
    per_item: Vec<f64>,
}

impl LinearPrices {
    pub fn zeros(num_items: usize) -> Self {
        Self {
            per_item: vec![0.0; num_items],
        }
    }

    /// Tiny negative values from solver round-off are snapped to zero.
    pub fn new(per_item: Vec<f64>) -> Result<Self> {
        let mut per_item = per_item;
        for p in per_item.iter_mut() {
            if !p.is_finite() || *p < -TOL {
                return Err(CoreError::InvalidPrice(*p));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        Ok(Self { per_item })
    }

    pub fn per_item(&self) -> &[f64] {
        &self.per_item
    }

    pub fn price(&self, bundle: &Bundle) -> f64 {
        bundle.items().map(|j| self.per_item[j]).sum()
    }

    pub fn allocation_price(&self, a: &Allocation) -> f64 {
        a.bundles().iter().map(|b| self.price(b)).sum()
    }
}

/// A bidder's true value for any bundle.
pub trait Valuation {
    fn num_items(&self) -> usize;
    fn value(&self, bundle: &Bundle) -> f64;
}

/// Valuation stored as a dense table over all `2^m` bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableValuation {
    num_items: usize,
    values: Vec<f64>,
}

impl TableValuation {
    pub fn new(num_items: usize, values: Vec<f64>) -> Result<Self> {
        if num_items > 24 || values.len() != 1usize << num_items {
            return Err(CoreError::InvalidValuation(format!(
                "{} values for {num_items} items",
                values.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(CoreError::InvalidValuation("empty bundle must be worth 0".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::InvalidValuation("values must be finite and nonnegative".into()));
        }
        Ok(Self { num_items, values })
    }

    pub fn from_fn(num_items: usize, f: impl Fn(&Bundle) -> f64) -> Result<Self> {
        let values = (0..1u64 << num_items)
            .map(|mask| f(&Bundle::from_mask(mask, num_items).expect("mask in range")))
            .collect();
        Self::new(num_items, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Valuation for TableValuation {
    fn num_items(&self) -> usize {
        self.num_items
    }

    fn value(&self, bundle: &Bundle) -> f64 {
        self.values[bundle.mask() as usize]
    }
}

/// How reported intervals are turned into a single value per bundle.
#[derive(Debug, Clone, PartialEq)]
pub enum ValuationView {
    Lower,
    Upper,
    /// `α·lower + (1 − α)·upper`.
    Alpha(f64),
    /// Lower bound on the reference allocation's bundle, upper bound elsewhere.
    Perturbed(Allocation),
}

impl ValuationView {
    pub fn value(&self, reports: &ReportSet, bundle: &Bundle) -> Result<f64> {
        let r = reports.get(bundle).ok_or(CoreError::UnsupportedBundle {
            bidder: reports.bidder(),
            bundle: *bundle,
        })?;
        Ok(match self {
            ValuationView::Lower => r.lower,
            ValuationView::Upper => r.upper,
            ValuationView::Alpha(alpha) => alpha * r.lower + (1.0 - alpha) * r.upper,
            ValuationView::Perturbed(a) => {
                if a.bundles().get(reports.bidder()) == Some(bundle) {
                    r.lower
                } else {
                    r.upper
                }
            }
        })
    }
}

/// `Σ_i view_i(a_i)` over reported bundles.
pub fn total_value(view: &ValuationView, profile: &[ReportSet], a: &Allocation) -> Result<f64> {
    check_sizes(profile, a)?;
    profile
        .iter()
        .zip(a.bundles())
        .map(|(r, b)| view.value(r, b))
        .sum()
}

/// `Σ_i v_i(a_i)` under true valuations.
pub fn total_true_value<V: Valuation>(values: &[V], a: &Allocation) -> f64 {
    values.iter().zip(a.bundles()).map(|(v, b)| v.value(b)).sum()
}

pub fn efficiency<V: Valuation>(values: &[V], a: &Allocation, optimum_value: f64) -> Result<f64> {
    if optimum_value <= 0.0 {
        return Err(CoreError::Degenerate("optimal welfare is zero".into()));
    }
    if !a.is_feasible() {
        return Err(CoreError::InfeasibleAllocation);
    }
    Ok(total_true_value(values, a) / optimum_value)
}

pub fn relative_revenue(payments: &[f64], optimum_value: f64) -> Result<f64> {
    if optimum_value <= 0.0 {
        return Err(CoreError::Degenerate("optimal welfare is zero".into()));
    }
    Ok(payments.iter().sum::<f64>() / optimum_value)
}

fn check_sizes(profile: &[ReportSet], a: &Allocation) -> Result<()> {
    if profile.len() != a.num_bidders() {
        return Err(CoreError::Config(format!(
            "{} report sets for an allocation over {} bidders",
            profile.len(),
            a.num_bidders()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub allocation: Allocation,
    pub payments: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_basics() {
        let b = Bundle::from_items(&[0, 2], 4).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.contains(2) && !b.contains(1));
        assert_eq!(b.to_string(), "{0,2}");
        assert_eq!(b.indicators(), vec![1.0, 0.0, 1.0, 0.0]);
        assert!(Bundle::from_mask(0b10000, 4).is_err());
        assert!(Bundle::from_items(&[4], 4).is_err());
    }

    #[test]
    fn report_set_keeps_empty_first() {
        let mut r = ReportSet::new(3, 2);
        assert_eq!(r.len(), 1);
        assert!(r.at(0).bundle.is_empty());
        let ab = Bundle::full(2);
        r.insert(IntervalReport::new(ab, 15.0, 25.0).unwrap()).unwrap();
        assert!(matches!(
            r.insert(IntervalReport::new(ab, 1.0, 2.0).unwrap()),
            Err(CoreError::DuplicateReport { .. })
        ));
        assert_eq!(r.num_queried(), 1);
    }

    #[test]
    fn tighten_is_monotone() {
        let mut r = ReportSet::new(0, 2);
        let ab = Bundle::full(2);
        r.insert(IntervalReport::new(ab, 15.0, 25.0).unwrap()).unwrap();
        assert_eq!(r.tighten(&ab, 16.0, 25.0).unwrap(), 1);
        assert!(matches!(r.tighten(&ab, 14.0, 25.0), Err(CoreError::Widening { .. })));
        // within tolerance: ignored rather than widened
        assert_eq!(r.tighten(&ab, 16.0 - 1e-9, 25.0 + 1e-9).unwrap(), 0);
        assert_eq!(r.get(&ab).unwrap().lower, 16.0);
        assert!(r.tighten(&ab, 20.0, 18.0).is_err());
    }

    #[test]
    fn uncertainty_formula() {
        let ab = Bundle::full(2);
        assert_eq!(IntervalReport::new(ab, 15.0, 25.0).unwrap().uncertainty(), 0.4);
        assert_eq!(IntervalReport::new(ab, 7.0, 7.0).unwrap().uncertainty(), 0.0);
        assert_eq!(IntervalReport::new(ab, 0.0, 8.0).unwrap().uncertainty(), 1.0);
        assert_eq!(IntervalReport::new(ab, 0.0, 0.0).unwrap().uncertainty(), 0.0);
        assert!(IntervalReport::new(ab, 3.0, 2.0).is_err());
        assert!(IntervalReport::new(ab, -1.0, 2.0).is_err());
    }

    #[test]
    fn prices_snap_round_off() {
        let p = LinearPrices::new(vec![1.0, -1e-12]).unwrap();
        assert_eq!(p.per_item()[1], 0.0);
        assert!(LinearPrices::new(vec![-1.0]).is_err());
    }
}
