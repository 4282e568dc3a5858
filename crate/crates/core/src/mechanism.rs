//! The auction loop: initial queries, ML-driven query rounds with
//! revealed-preference refinement, refinement rounds until the convergence
//! bound is met, and lower-bound VCG-style outcome determination.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity::{convergence_bound, diar_errors, diar_satisfied, mrpar_satisfied};
use crate::allocation::{provisional_allocation, wdp_reports, Economy};
use crate::bidder::{answer_interval_query, Bidder};
use crate::error::{CoreError, Result};
use crate::ml::{generate_round_queries, KernelParams, QueryParams};
use crate::model::{Allocation, Bundle, IntervalReport, LinearPrices, Outcome, ReportSet, ValuationView};
use crate::pricing::{
    default_shift, effort_reduction_prices_with, unique_prices_with, PriceSolution, PricingOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Interval bids with effort-reduction prices.
    Imlca,
    /// Interval bids with unique prices only.
    ImlcaSp,
    /// Exact value queries, no prices or refinement.
    MlcaExact,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Imlca => "imlca",
            Variant::ImlcaSp => "imlca-sp",
            Variant::MlcaExact => "mlca-exact",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imlca" => Ok(Variant::Imlca),
            "imlca-sp" => Ok(Variant::ImlcaSp),
            "mlca-exact" => Ok(Variant::MlcaExact),
            _ => Err(CoreError::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlphaPolicy {
    Fixed { alpha: f64 },
    /// Linear from 0 in the first round to 1 in the last possible round.
    Anneal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonPolicy {
    /// Share of the bidder's largest round-start pricing error.
    pub fraction: f64,
    pub floor: f64,
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        Self {
            fraction: 0.05,
            floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismConfig {
    pub q_max: usize,
    pub q_init: usize,
    pub q_round: usize,
    pub omega_stop: f64,
    pub max_refine_rounds: usize,
    pub alpha: AlphaPolicy,
    pub epsilon: EpsilonPolicy,
    pub variant: Variant,
    /// Shift of the effort-reduction objective; defaults to ten times the
    /// largest reported upper bound.
    pub shift: Option<f64>,
    pub kernel: KernelParams,
    pub pricing_node_limit: usize,
    /// Wall-clock cap per pricing call, in seconds.
    pub solver_time_limit: Option<f64>,
    pub seed: u64,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        Self {
            q_max: 14,
            q_init: 6,
            q_round: 4,
            omega_stop: 0.99,
            max_refine_rounds: 30,
            alpha: AlphaPolicy::Fixed { alpha: 0.5 },
            epsilon: EpsilonPolicy::default(),
            variant: Variant::Imlca,
            shift: None,
            kernel: KernelParams::default(),
            pricing_node_limit: PricingOptions::default().node_limit,
            solver_time_limit: None,
            seed: 0,
        }
    }
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Config(m));
        if self.q_init == 0 {
            return bad("q_init must be at least 1".into());
        }
        if self.q_init > self.q_max {
            return bad(format!("q_init {} exceeds q_max {}", self.q_init, self.q_max));
        }
        if self.q_round == 0 {
            return bad("q_round must be at least 1".into());
        }
        if !(self.omega_stop > 0.0 && self.omega_stop <= 1.0) {
            return bad(format!("omega_stop {} outside (0, 1]", self.omega_stop));
        }
        if let AlphaPolicy::Fixed { alpha } = self.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return bad(format!("alpha {alpha} outside [0, 1]"));
            }
        }
        if !(self.epsilon.fraction > 0.0 && self.epsilon.floor > 0.0) {
            return bad("epsilon policy must be positive".into());
        }
        if matches!(self.shift, Some(c) if !(c > 0.0 && c.is_finite())) {
            return bad("shift must be positive".into());
        }
        Ok(())
    }

    /// `⌈(q_max − q_init) / q_round⌉`.
    pub fn planned_ml_rounds(&self) -> usize {
        (self.q_max - self.q_init).div_ceil(self.q_round)
    }

    fn alpha_at(&self, round: usize) -> f64 {
        match self.alpha {
            AlphaPolicy::Fixed { alpha } => alpha,
            AlphaPolicy::Anneal => {
                let last = (self.planned_ml_rounds() + self.max_refine_rounds).saturating_sub(1);
                if last == 0 {
                    1.0
                } else {
                    (round as f64 / last as f64).min(1.0)
                }
            }
        }
    }

    fn pricing_options(&self) -> PricingOptions {
        PricingOptions {
            node_limit: self.pricing_node_limit,
            deadline: self
                .solver_time_limit
                .map(|s| Instant::now() + Duration::from_secs_f64(s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    MlRefinement,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRecord {
    pub prices: LinearPrices,
    pub delta: Vec<Vec<f64>>,
    pub max_delta: f64,
    pub positive_count: usize,
    pub proven_optimal: bool,
}

impl From<&PriceSolution> for PriceRecord {
    fn from(s: &PriceSolution) -> Self {
        Self {
            prices: s.prices.clone(),
            delta: s.delta.clone(),
            max_delta: s.max_delta,
            positive_count: s.positive_count,
            proven_optimal: s.proven_optimal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub index: usize,
    pub phase: Phase,
    pub alpha: f64,
    /// Convergence bound at the start of a convergence round.
    pub omega: Option<f64>,
    /// Reports the allocation and prices were computed from.
    pub reports: Vec<Vec<IntervalReport>>,
    pub allocation: Option<Allocation>,
    pub prices: Option<PriceRecord>,
    pub queries: Vec<Vec<Bundle>>,
    /// Bounds changed per bidder by revealed-preference refinement.
    pub mrpar_changes: Vec<usize>,
    /// Bounds changed per bidder by delta-improvement refinement.
    pub diar_changes: Vec<usize>,
    pub epsilon: Vec<Option<f64>>,
    pub newly_frozen: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionTrace {
    pub variant: Variant,
    pub rounds: Vec<RoundRecord>,
    pub ml_rounds: usize,
    pub convergence_rounds: usize,
    /// Rounds in which a bidder changed at least one bound while refining
    /// for the revealed-preference rule, summed over bidders.
    pub mrpar_refinements: usize,
    /// Individual bound changes over both refinement kinds.
    pub total_refinements: usize,
    /// Mean uncertainty of reports as first answered.
    pub initial_uncertainty: Option<f64>,
    /// Mean uncertainty of the final reports.
    pub final_uncertainty: Option<f64>,
    pub final_omega: Option<f64>,
    pub frozen: Vec<bool>,
    /// Set when lower-bound welfare at outcome time is zero.
    pub degenerate: bool,
    pub final_reports: Vec<Vec<IntervalReport>>,
}

impl AuctionTrace {
    fn new(variant: Variant, n: usize) -> Self {
        Self {
            variant,
            rounds: Vec::new(),
            ml_rounds: 0,
            convergence_rounds: 0,
            mrpar_refinements: 0,
            total_refinements: 0,
            initial_uncertainty: None,
            final_uncertainty: None,
            final_omega: None,
            frozen: vec![false; n],
            degenerate: false,
            final_reports: Vec::new(),
        }
    }

    fn push(&mut self, record: RoundRecord) {
        self.mrpar_refinements += record.mrpar_changes.iter().filter(|&&c| c > 0).count();
        self.total_refinements +=
            record.mrpar_changes.iter().sum::<usize>() + record.diar_changes.iter().sum::<usize>();
        self.rounds.push(record);
    }
}

/// Rebuilds report sets from their serialized form.
pub fn report_sets(reports: &[Vec<IntervalReport>], num_items: usize) -> Result<Vec<ReportSet>> {
    reports
        .iter()
        .enumerate()
        .map(|(i, rs)| {
            let mut set = ReportSet::new(i, num_items);
            for r in rs.iter().filter(|r| !r.bundle.is_empty()) {
                set.insert(*r)?;
            }
            Ok(set)
        })
        .collect()
}

fn snapshot(profile: &[ReportSet]) -> Vec<Vec<IntervalReport>> {
    profile.iter().map(|r| r.iter().collect()).collect()
}

/// Everything the phases share.
#[derive(Debug, Clone)]
pub struct AuctionState {
    pub profile: Vec<ReportSet>,
    pub trace: AuctionTrace,
    num_items: usize,
    answered_uncertainty: (f64, usize),
}

impl AuctionState {
    pub fn num_items(&self) -> usize {
        self.num_items
    }

    fn record_answer(&mut self, r: &IntervalReport) {
        self.answered_uncertainty.0 += r.uncertainty();
        self.answered_uncertainty.1 += 1;
    }
}

fn pooled_uncertainty(profile: &[ReportSet]) -> Option<f64> {
    let (sum, count) = profile
        .iter()
        .flat_map(|r| r.iter().skip(1))
        .fold((0.0, 0usize), |(s, c), r| (s + r.uncertainty(), c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn check_bidders<B: Bidder>(bidders: &[B]) -> Result<usize> {
    let num_items = bidders.first().map(|b| b.num_items()).unwrap_or(0);
    for b in bidders {
        if b.num_items() != num_items {
            return Err(CoreError::ItemCount {
                expected: num_items,
                got: b.num_items(),
            });
        }
    }
    Ok(num_items)
}

/// Each bidder answers `q_init` distinct non-empty bundles drawn uniformly
/// at random.
pub fn run_initialization<B: Bidder>(bidders: &mut [B], cfg: &MechanismConfig) -> Result<AuctionState> {
    cfg.validate()?;
    let num_items = check_bidders(bidders)?;
    if num_items >= 63 {
        return Err(CoreError::Config(format!("{num_items} items are too many to sample bundles from")));
    }
    let space = (1u64 << num_items) - 1;
    if space < cfg.q_init as u64 {
        return Err(CoreError::BundleSpaceTooSmall {
            available: space,
            requested: cfg.q_init,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AuctionState {
        profile: (0..bidders.len()).map(|i| ReportSet::new(i, num_items)).collect(),
        trace: AuctionTrace::new(cfg.variant, bidders.len()),
        num_items,
        answered_uncertainty: (0.0, 0),
    };
    for (i, bidder) in bidders.iter_mut().enumerate() {
        let masks: Vec<u64> = if space <= 1 << 20 {
            sample(&mut rng, space as usize, cfg.q_init)
                .into_iter()
                .map(|k| k as u64 + 1)
                .collect()
        } else {
            let mut seen = Vec::with_capacity(cfg.q_init);
            while seen.len() < cfg.q_init {
                let m = rng.random_range(1..=space);
                if !seen.contains(&m) {
                    seen.push(m);
                }
            }
            seen
        };
        for mask in masks {
            let b = Bundle::from_mask(mask, num_items)?;
            let r = answer_interval_query(bidder, &state.profile[i], &b)?;
            state.profile[i].insert(r)?;
            state.record_answer(&r);
        }
    }
    Ok(state)
}

fn compute_prices(
    profile: &[ReportSet],
    alpha: f64,
    a: &Allocation,
    cfg: &MechanismConfig,
) -> Result<PriceSolution> {
    let opts = cfg.pricing_options();
    match cfg.variant {
        Variant::Imlca => {
            let shift = cfg.shift.unwrap_or_else(|| default_shift(profile));
            effort_reduction_prices_with(profile, alpha, a, shift, &opts)
        }
        Variant::ImlcaSp | Variant::MlcaExact => unique_prices_with(profile, alpha, a, &opts),
    }
}

fn freeze<B: Bidder>(state: &mut AuctionState, bidder: &mut B, i: usize, restore: ReportSet, record: &mut RoundRecord) {
    state.profile[i] = restore;
    bidder.freeze();
    state.trace.frozen[i] = true;
    record.newly_frozen.push(i);
}

/// Revealed-preference refinement of one bidder, verified. Returns false if
/// the bidder was frozen.
fn refine_mrpar<B: Bidder>(
    state: &mut AuctionState,
    bidder: &mut B,
    i: usize,
    prices: &LinearPrices,
    a: &Allocation,
    record: &mut RoundRecord,
) -> Result<bool> {
    let before = state.profile[i].clone();
    let allocated = a.bundle(i);
    let outcome = bidder.mrpar_refine(&mut state.profile[i], prices, allocated);
    let ok = match outcome {
        Ok(changes) => {
            before.check_tightening(&state.profile[i])?;
            record.mrpar_changes[i] = changes;
            mrpar_satisfied(&state.profile[i], prices, allocated)?.0
        }
        Err(CoreError::Frozen(_)) => false,
        Err(e) => return Err(e),
    };
    if !ok {
        record.mrpar_changes[i] = 0;
        freeze(state, bidder, i, before, record);
    }
    Ok(ok)
}

/// Query rounds until every active bidder has `q_max` reports.
pub fn run_ml_refinement_phase<B: Bidder>(state: &mut AuctionState, bidders: &mut [B], cfg: &MechanismConfig) -> Result<()> {
    let n = bidders.len();
    loop {
        let active = (0..n).any(|i| !state.trace.frozen[i] && state.profile[i].num_queried() < cfg.q_max);
        if !active {
            break;
        }
        let index = state.trace.rounds.len();
        let alpha = cfg.alpha_at(index);
        let mut record = RoundRecord {
            index,
            phase: Phase::MlRefinement,
            alpha,
            omega: None,
            reports: snapshot(&state.profile),
            allocation: None,
            prices: None,
            queries: vec![Vec::new(); n],
            mrpar_changes: vec![0; n],
            diar_changes: vec![0; n],
            epsilon: vec![None; n],
            newly_frozen: Vec::new(),
        };
        let priced = if cfg.variant == Variant::MlcaExact {
            None
        } else {
            let (_, a) = provisional_allocation(&state.profile, alpha)?;
            let sol = compute_prices(&state.profile, alpha, &a, cfg)?;
            record.allocation = Some(a.clone());
            record.prices = Some(PriceRecord::from(&sol));
            Some((a, sol.prices))
        };

        let params = QueryParams {
            kernel: cfg.kernel,
            per_round: cfg.q_round,
            max_reports: cfg.q_max,
            round: state.trace.ml_rounds,
            frozen: state.trace.frozen.clone(),
        };
        let plan = generate_round_queries(&state.profile, &params)?;
        if plan.total() == 0 {
            break;
        }
        for (i, bundles) in plan.bundles.iter().enumerate() {
            for b in bundles {
                let r = answer_interval_query(&mut bidders[i], &state.profile[i], b)?;
                state.profile[i].insert(r)?;
                state.record_answer(&r);
            }
        }
        record.queries = plan.bundles;

        if let Some((a, prices)) = &priced {
            for (i, bidder) in bidders.iter_mut().enumerate() {
                if !state.trace.frozen[i] {
                    refine_mrpar(state, bidder, i, prices, a, &mut record)?;
                }
            }
        }
        state.trace.ml_rounds += 1;
        state.trace.push(record);
    }
    Ok(())
}

fn omega(profile: &[ReportSet], trace: &mut AuctionTrace) -> Result<f64> {
    match convergence_bound(profile) {
        Ok(w) => Ok(w),
        Err(CoreError::Degenerate(_)) => {
            trace.degenerate = true;
            Ok(1.0)
        }
        Err(e) => Err(e),
    }
}

/// Refinement rounds without new queries while the convergence bound is
/// below `omega_stop`, at most `max_refine_rounds` of them.
pub fn run_convergence_phase<B: Bidder>(state: &mut AuctionState, bidders: &mut [B], cfg: &MechanismConfig) -> Result<()> {
    let n = bidders.len();
    if cfg.variant == Variant::MlcaExact {
        return Ok(());
    }
    while state.trace.convergence_rounds < cfg.max_refine_rounds {
        let w = omega(&state.profile, &mut state.trace)?;
        if w >= cfg.omega_stop {
            break;
        }
        let index = state.trace.rounds.len();
        let alpha = cfg.alpha_at(index);
        let (_, a) = provisional_allocation(&state.profile, alpha)?;
        let sol = compute_prices(&state.profile, alpha, &a, cfg)?;
        let mut record = RoundRecord {
            index,
            phase: Phase::Convergence,
            alpha,
            omega: Some(w),
            reports: snapshot(&state.profile),
            allocation: Some(a.clone()),
            prices: Some(PriceRecord::from(&sol)),
            queries: vec![Vec::new(); n],
            mrpar_changes: vec![0; n],
            diar_changes: vec![0; n],
            epsilon: vec![None; n],
            newly_frozen: Vec::new(),
        };
        let prices = sol.prices;
        let start = state.profile.clone();
        for (i, bidder) in bidders.iter_mut().enumerate() {
            if state.trace.frozen[i] {
                continue;
            }
            if !refine_mrpar(state, bidder, i, &prices, &a, &mut record)? {
                continue;
            }
            let allocated = a.bundle(i);
            let top = diar_errors(&start[i], &prices, allocated)?
                .first()
                .map_or(0.0, |e| e.error);
            let eps = (cfg.epsilon.fraction * top).max(cfg.epsilon.floor);
            record.epsilon[i] = Some(eps);
            let ok = match bidder.diar_refine(&mut state.profile[i], &start[i], &prices, allocated, eps) {
                Ok(changes) => {
                    record.diar_changes[i] = changes;
                    diar_satisfied(&start[i], &state.profile[i], &prices, allocated, eps)?
                }
                Err(CoreError::Frozen(_)) => false,
                Err(e) => return Err(e),
            };
            if !ok {
                record.mrpar_changes[i] = 0;
                record.diar_changes[i] = 0;
                freeze(state, bidder, i, start[i].clone(), &mut record);
            }
        }
        state.trace.convergence_rounds += 1;
        state.trace.push(record);
    }
    Ok(())
}

/// Allocation maximizing lower-bound welfare over reports; each bidder pays
/// the lower-bound welfare the others lose through its presence.
pub fn determine_outcome(profile: &[ReportSet]) -> Result<Outcome> {
    let (a, _) = wdp_reports(&ValuationView::Lower, profile, Economy::Main)?;
    let own: Vec<f64> = profile
        .iter()
        .zip(a.bundles())
        .map(|(r, b)| r.lower(b))
        .collect::<Result<_>>()?;
    let total: f64 = own.iter().sum();
    let payments = (0..profile.len())
        .map(|i| {
            let (_, without) = wdp_reports(&ValuationView::Lower, profile, Economy::Marginal(i))?;
            let others: f64 = own.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum();
            debug_assert!((others - (total - own[i])).abs() < 1e-6);
            Ok(without - others)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome { allocation: a, payments })
}

/// The whole auction.
pub fn run_auction<B: Bidder>(bidders: &mut [B], cfg: &MechanismConfig) -> Result<(Outcome, AuctionTrace)> {
    let mut state = run_initialization(bidders, cfg)?;
    run_ml_refinement_phase(&mut state, bidders, cfg)?;
    run_convergence_phase(&mut state, bidders, cfg)?;
    let final_omega = omega(&state.profile, &mut state.trace)?;
    let outcome = determine_outcome(&state.profile)?;
    let lower_value: f64 = state
        .profile
        .iter()
        .zip(outcome.allocation.bundles())
        .map(|(r, b)| r.lower(b))
        .sum::<Result<f64>>()?;
    let mut trace = state.trace;
    trace.final_omega = Some(final_omega);
    trace.degenerate |= lower_value <= 0.0;
    trace.initial_uncertainty = (state.answered_uncertainty.1 > 0)
        .then(|| state.answered_uncertainty.0 / state.answered_uncertainty.1 as f64);
    trace.final_uncertainty = pooled_uncertainty(&state.profile);
    trace.final_reports = snapshot(&state.profile);
    Ok((outcome, trace))
}
