//! Simulated bidders: interval answers and the two refinement heuristics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::activity::{diar_errors, mrpar_satisfied, STRICT_MARGIN};
use crate::error::{CoreError, Result};
use crate::model::{Bundle, IntervalReport, LinearPrices, ReportSet, Valuation, TOL};

/// Offset that turns a weak utility comparison into a strict one.
pub const ETA: f64 = 1e-6;

/// Utilities this close to the allocated bundle's count as ties with it.
pub const TIE_TOL: f64 = 5e-7;

/// Bell-shaped draws confined to an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundedBell {
    /// Normal at the midpoint with σ = width / 4, redrawn until inside.
    #[default]
    Truncated,
    /// Always the midpoint.
    Midpoint,
}

impl BoundedBell {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 0.0 || *self == BoundedBell::Midpoint {
            return mid;
        }
        let normal = Normal::new(mid, (hi - lo) / 4.0).expect("positive width");
        for _ in 0..64 {
            let v = normal.sample(rng);
            if (lo..=hi).contains(&v) {
                return v;
            }
        }
        mid
    }
}

/// A bidder as seen by the mechanism.
pub trait Bidder {
    fn id(&self) -> usize;

    fn num_items(&self) -> usize;

    fn answer(&mut self, bundle: &Bundle) -> Result<IntervalReport>;

    /// Tightens `reports` so the revealed-preference rule holds at `prices`.
    /// Returns the number of bounds changed.
    fn mrpar_refine(&mut self, reports: &mut ReportSet, prices: &LinearPrices, allocated: &Bundle) -> Result<usize>;

    /// Tightens `reports` so the delta-improvement rule holds relative to
    /// the round-start reports `start`. Returns the number of bounds changed.
    fn diar_refine(
        &mut self,
        reports: &mut ReportSet,
        start: &ReportSet,
        prices: &LinearPrices,
        allocated: &Bundle,
        epsilon: f64,
    ) -> Result<usize>;

    fn freeze(&mut self);

    fn is_frozen(&self) -> bool;
}

impl<B: Bidder + ?Sized> Bidder for Box<B> {
    fn id(&self) -> usize {
        (**self).id()
    }

    fn num_items(&self) -> usize {
        (**self).num_items()
    }

    fn answer(&mut self, bundle: &Bundle) -> Result<IntervalReport> {
        (**self).answer(bundle)
    }

    fn mrpar_refine(&mut self, reports: &mut ReportSet, prices: &LinearPrices, allocated: &Bundle) -> Result<usize> {
        (**self).mrpar_refine(reports, prices, allocated)
    }

    fn diar_refine(
        &mut self,
        reports: &mut ReportSet,
        start: &ReportSet,
        prices: &LinearPrices,
        allocated: &Bundle,
        epsilon: f64,
    ) -> Result<usize> {
        (**self).diar_refine(reports, start, prices, allocated, epsilon)
    }

    fn freeze(&mut self) {
        (**self).freeze()
    }

    fn is_frozen(&self) -> bool {
        (**self).is_frozen()
    }
}

/// Answers a query after checking it is new.
pub fn answer_interval_query<B: Bidder + ?Sized>(bidder: &mut B, reports: &ReportSet, bundle: &Bundle) -> Result<IntervalReport> {
    if reports.contains(bundle) {
        return Err(CoreError::DuplicateReport {
            bidder: reports.bidder(),
            bundle: *bundle,
        });
    }
    bidder.answer(bundle)
}

/// Truthful bidder with reporting uncertainty `mu`.
#[derive(Debug, Clone)]
pub struct SimBidder<V> {
    id: usize,
    values: V,
    mu: f64,
    rng: ChaCha8Rng,
    bell: BoundedBell,
    frozen: bool,
}

impl<V: Valuation> SimBidder<V> {
    pub fn new(id: usize, values: V, mu: f64, seed: u64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(CoreError::Config(format!("reporting uncertainty {mu} must be nonnegative")));
        }
        Ok(Self {
            id,
            values,
            mu,
            rng: ChaCha8Rng::seed_from_u64(seed),
            bell: BoundedBell::default(),
            frozen: false,
        })
    }

    pub fn with_bell(mut self, bell: BoundedBell) -> Self {
        self.bell = bell;
        self
    }

    pub fn values(&self) -> &V {
        &self.values
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn check_active(&self) -> Result<()> {
        if self.frozen {
            Err(CoreError::Frozen(self.id))
        } else {
            Ok(())
        }
    }

    fn utility(&self, x: &Bundle, prices: &LinearPrices) -> f64 {
        self.values.value(x) - prices.price(x)
    }
}

impl<V: Valuation> Bidder for SimBidder<V> {
    fn id(&self) -> usize {
        self.id
    }

    fn num_items(&self) -> usize {
        self.values.num_items()
    }

    fn answer(&mut self, bundle: &Bundle) -> Result<IntervalReport> {
        self.check_active()?;
        let v = self.values.value(bundle);
        let z1: f64 = self.rng.sample(StandardNormal);
        let z2: f64 = self.rng.sample(StandardNormal);
        let scale = self.mu * v;
        IntervalReport::new(*bundle, (v - z1.abs() * scale).max(0.0), v + z2.abs() * scale)
    }

    fn mrpar_refine(&mut self, reports: &mut ReportSet, prices: &LinearPrices, allocated: &Bundle) -> Result<usize> {
        self.check_active()?;
        if mrpar_satisfied(reports, prices, allocated)?.0 || reports.len() < 2 {
            return Ok(0);
        }
        let bundles: Vec<Bundle> = reports.bundles().collect();
        let utils: Vec<f64> = bundles.iter().map(|x| self.utility(x, prices)).collect();
        let best = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ua = self.utility(allocated, prices);
        let top = if ua >= best - TIE_TOL {
            reports.index_of(allocated).expect("allocated bundle is reported")
        } else {
            utils.iter().position(|&u| u == best).expect("maximum is attained")
        };
        let second = (0..bundles.len())
            .filter(|&k| k != top)
            .fold(None, |acc: Option<usize>, k| match acc {
                Some(s) if utils[s] >= utils[k] => Some(s),
                _ => Some(k),
            })
            .expect("at least two reports");
        let x_top = bundles[top];

        let mut u_hat = self.bell.sample(&mut self.rng, utils[second], utils[top]);
        let max_other_upper = (0..bundles.len())
            .filter(|&k| k != top)
            .map(|k| reports.at(k).upper - prices.price(&bundles[k]))
            .fold(f64::NEG_INFINITY, f64::max);
        if max_other_upper < u_hat {
            u_hat = max_other_upper;
        }
        let top_lower = reports.at(top).lower - prices.price(&x_top);
        if u_hat < top_lower {
            u_hat = top_lower;
        }
        let eta = if x_top != *allocated && top_lower <= max_other_upper + STRICT_MARGIN {
            ETA
        } else {
            0.0
        };

        let mut changed = 0;
        let r = reports.at(top);
        let lower = self.values.value(&x_top).min(u_hat + prices.price(&x_top) + eta);
        changed += reports.tighten(&x_top, lower.max(r.lower), r.upper)?;
        for (k, x) in bundles.iter().enumerate() {
            if k == top {
                continue;
            }
            let r = reports.at(k);
            let upper = self.values.value(x).max(r.upper.min(u_hat + prices.price(x) - eta));
            changed += reports.tighten(x, r.lower, upper)?;
        }
        Ok(changed)
    }

    fn diar_refine(
        &mut self,
        reports: &mut ReportSet,
        start: &ReportSet,
        prices: &LinearPrices,
        allocated: &Bundle,
        epsilon: f64,
    ) -> Result<usize> {
        self.check_active()?;
        let va = self.values.value(allocated);
        let mut changed = 0;
        for e in diar_errors(start, prices, allocated)? {
            let x = start.at(e.index).bundle;
            if x == *allocated {
                continue;
            }
            let ra = reports.get(allocated).expect("allocated bundle is reported");
            let rx = reports.get(&x).expect("reports only grow");
            let now = rx.upper - prices.price(&x) - (ra.lower - prices.price(allocated));
            let done = e.error - now;
            if done >= epsilon - TOL {
                break;
            }
            let need = epsilon - done;
            let vx = self.values.value(&x);
            let upper_slack = rx.upper - vx;
            let lower_slack = va - ra.lower;
            if upper_slack + lower_slack >= need {
                let f = self.bell.sample(&mut self.rng, 0.0, 1.0);
                let from_upper = (f * need).clamp(need - lower_slack, upper_slack).max(0.0);
                let from_lower = (need - from_upper).max(0.0);
                changed += reports.tighten(&x, rx.lower, (rx.upper - from_upper).max(vx))?;
                changed += reports.tighten(allocated, (ra.lower + from_lower).min(va), ra.upper)?;
                break;
            }
            changed += reports.tighten(&x, vx, vx)?;
            changed += reports.tighten(allocated, va, va)?;
        }
        Ok(changed)
    }

    fn freeze(&mut self) {
        self.frozen = true;
    }

    fn is_frozen(&self) -> bool {
        self.frozen
    }
}

/// Answers every query with a fixed relative width around the truth and
/// never refines.
#[derive(Debug, Clone)]
pub struct StubbornBidder<V> {
    id: usize,
    values: V,
    width: f64,
    frozen: bool,
}

impl<V: Valuation> StubbornBidder<V> {
    pub fn new(id: usize, values: V, width: f64) -> Self {
        Self {
            id,
            values,
            width,
            frozen: false,
        }
    }
}

impl<V: Valuation> Bidder for StubbornBidder<V> {
    fn id(&self) -> usize {
        self.id
    }

    fn num_items(&self) -> usize {
        self.values.num_items()
    }

    fn answer(&mut self, bundle: &Bundle) -> Result<IntervalReport> {
        if self.frozen {
            return Err(CoreError::Frozen(self.id));
        }
        let v = self.values.value(bundle);
        IntervalReport::new(*bundle, (v * (1.0 - self.width)).max(0.0), v * (1.0 + self.width))
    }

    fn mrpar_refine(&mut self, _: &mut ReportSet, _: &LinearPrices, _: &Bundle) -> Result<usize> {
        if self.frozen {
            return Err(CoreError::Frozen(self.id));
        }
        Ok(0)
    }

    fn diar_refine(&mut self, _: &mut ReportSet, _: &ReportSet, _: &LinearPrices, _: &Bundle, _: f64) -> Result<usize> {
        if self.frozen {
            return Err(CoreError::Frozen(self.id));
        }
        Ok(0)
    }

    fn freeze(&mut self) {
        self.frozen = true;
    }

    fn is_frozen(&self) -> bool {
        self.frozen
    }
}
