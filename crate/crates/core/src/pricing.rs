//! Linear item prices for a provisional allocation.
//!
//! For bidder `i` with allocated bundle `a_i` and a reported bundle `x`, the
//! clearing gap at prices `π` is
//!
//! ```text
//! g(π) = v̂(x) − v̂(a_i) − π(x) + π(a_i)
//! ```
//!
//! and `δ_ik ≥ g(π)` measures how far report `k` is from being demanded
//! less than `a_i`. At an optimum each `δ_ik` can be taken equal to its gap
//! (or to its cap, for the shifted objective), so the programs below are
//! written over the prices alone plus whatever auxiliary variables an
//! objective needs. Items nobody is allocated have no variable and are
//! priced exactly zero.

use std::time::Instant;

use imlca_solver::{
    solve_lp, solve_milp_with, solve_qp_from, Comparison, LinearConstraint, LpOutcome, LpProblem, MilpOptions,
    MilpOutcome, QpOutcome, QpProblem, Sense,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{Allocation, Bundle, LinearPrices, ReportSet, ValuationView, TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Minimize the largest gap.
    MinMaxDelta,
    /// Minimize the number of positive gaps at the largest gap.
    MinPositiveCount,
    /// Minimize the Euclidean norm of the gaps.
    MinDeltaNorm,
    /// Maximize the sum of prices.
    MaxPriceSum,
    /// Among sum-maximal prices, the one of least norm.
    MinPriceNorm,
    /// The two count stages again, under the perturbed view.
    PerturbedMinMaxDelta,
    PerturbedMinPositiveCount,
    /// Minimize the norm of the shifted perturbed gaps.
    MinShiftedDeltaNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub objective: f64,
    /// False if a node limit or deadline stopped the stage early.
    pub proven_optimal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSolution {
    pub prices: LinearPrices,
    /// Per bidder, per report (in report order).
    pub delta: Vec<Vec<f64>>,
    pub max_delta: f64,
    pub positive_count: usize,
    pub stages: Vec<StageRecord>,
}

impl PriceSolution {
    pub fn proven_optimal(&self) -> bool {
        self.stages.iter().all(|s| s.proven_optimal)
    }
}

#[derive(Debug, Clone)]
pub struct PricingOptions {
    /// Branch-and-bound node limit of the count-minimization stages.
    pub node_limit: usize,
    pub deadline: Option<Instant>,
}

impl Default for PricingOptions {
    fn default() -> Self {
        Self {
            node_limit: 2_000,
            deadline: None,
        }
    }
}

/// Default shift for the effort-reduction objective: ten times the largest
/// reported upper bound.
pub fn default_shift(profile: &[ReportSet]) -> f64 {
    let max_upper = profile
        .iter()
        .flat_map(|r| r.iter().map(|x| x.upper))
        .fold(0.0, f64::max);
    10.0 * max_upper.max(1.0)
}

struct Row {
    bidder: usize,
    constant: f64,
    coeffs: Vec<f64>,
}

impl Row {
    fn gap(&self, pi: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(pi).map(|(a, p)| a * p).sum::<f64>()
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }

    /// `g(π) ≤ bound` as a constraint over the price variables.
    fn at_most(&self, bound: f64) -> LinearConstraint {
        LinearConstraint::new(self.coeffs.clone(), Comparison::Le, bound - self.constant)
    }
}

struct PriceModel {
    num_items: usize,
    /// Item of each price variable.
    items: Vec<usize>,
    rows: Vec<Row>,
    reports_per_bidder: Vec<usize>,
    /// Slack granted to constraints derived from earlier solutions.
    slack: f64,
}

impl PriceModel {
    fn new(view: &ValuationView, a: &Allocation, profile: &[ReportSet]) -> Result<Self> {
        if profile.len() != a.num_bidders() {
            return Err(CoreError::Config(format!(
                "{} report sets for an allocation over {} bidders",
                profile.len(),
                a.num_bidders()
            )));
        }
        if !a.is_feasible() {
            return Err(CoreError::InfeasibleAllocation);
        }
        let num_items = profile.first().map_or(0, |r| r.num_items());
        let allocated = a.allocated_mask();
        let items: Vec<usize> = (0..num_items).filter(|j| allocated >> j & 1 == 1).collect();
        let indicator = |b: &Bundle| -> Vec<f64> {
            items
                .iter()
                .map(|&j| if b.contains(j) { 1.0 } else { 0.0 })
                .collect()
        };
        let mut rows = Vec::new();
        let mut scale = 1.0f64;
        for (i, reports) in profile.iter().enumerate() {
            let ai = a.bundle(i);
            let va = view.value(reports, ai)?;
            let ia = indicator(ai);
            for r in reports.iter() {
                let vx = view.value(reports, &r.bundle)?;
                scale = scale.max(vx.abs());
                let ix = indicator(&r.bundle);
                rows.push(Row {
                    bidder: i,
                    constant: vx - va,
                    coeffs: ia.iter().zip(&ix).map(|(p, q)| p - q).collect(),
                });
            }
        }
        Ok(Self {
            num_items,
            items,
            rows,
            reports_per_bidder: profile.iter().map(|r| r.len()).collect(),
            slack: 1e-9 * scale,
        })
    }

    fn nv(&self) -> usize {
        self.items.len()
    }

    /// Gaps above this count as positive.
    fn positive_threshold(&self) -> f64 {
        2.0 * self.slack
    }

    fn gaps(&self, pi: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap(pi)).collect()
    }

    fn prices(&self, pi: &[f64]) -> LinearPrices {
        let mut per_item = vec![0.0; self.num_items];
        for (v, &j) in self.items.iter().enumerate() {
            per_item[j] = pi[v].max(0.0);
        }
        LinearPrices::new(per_item).expect("nonnegative prices")
    }

    /// Clamp round-off so the price vector used downstream is the one the
    /// gaps are evaluated at.
    fn clean(&self, pi: &[f64]) -> Vec<f64> {
        pi.iter().map(|p| p.max(0.0)).collect()
    }

    fn per_bidder(&self, flat: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.reports_per_bidder.len());
        let mut k = 0;
        for &len in &self.reports_per_bidder {
            out.push(flat[k..k + len].to_vec());
            k += len;
        }
        debug_assert!(self.rows.iter().all(|r| r.bidder < out.len()));
        out
    }

    fn solution(&self, pi: &[f64], delta: Vec<f64>, stages: Vec<StageRecord>) -> PriceSolution {
        let threshold = self.positive_threshold();
        let max_delta = delta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        PriceSolution {
            prices: self.prices(pi),
            positive_count: delta.iter().filter(|&&d| d > threshold).count(),
            max_delta,
            delta: self.per_bidder(&delta),
            stages,
        }
    }
}

fn pad(c: &LinearConstraint, total: usize) -> LinearConstraint {
    let mut coeffs = c.coeffs.clone();
    coeffs.resize(total, 0.0);
    LinearConstraint::new(coeffs, c.cmp, c.rhs)
}

fn price_only_lp(nv: usize, objective: Vec<f64>, sense: Sense, constraints: &[LinearConstraint]) -> LpProblem {
    let mut lp = LpProblem::new(sense, objective);
    lp.constraints = constraints.iter().map(|c| pad(c, lp.num_vars())).collect();
    for j in nv..lp.num_vars() {
        lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }
    lp
}

fn numeric(what: &str) -> CoreError {
    CoreError::Solver(imlca_solver::SolverError::NonFinite(format!("{what} became infeasible")))
}

struct CountResult {
    pi: Vec<f64>,
    delta: f64,
    /// Constraints that keep this stage's outcome: non-positive gaps stay
    /// non-positive and every gap stays below the largest one.
    kept: Vec<LinearConstraint>,
}

/// The two-stage δ-approximate clearing program, subject to `extra`.
fn min_max_then_count(
    model: &PriceModel,
    extra: &[LinearConstraint],
    opts: &PricingOptions,
    perturbed: bool,
    stages: &mut Vec<StageRecord>,
) -> Result<CountResult> {
    let nv = model.nv();
    let s = model.slack;

    // Stage 1: min t s.t. g_r(π) ≤ t.
    let mut objective = vec![0.0; nv + 1];
    objective[nv] = 1.0;
    let mut lp = price_only_lp(nv, objective, Sense::Minimize, extra);
    for r in &model.rows {
        let mut coeffs = r.coeffs.clone();
        coeffs.push(-1.0);
        lp.add_constraint(coeffs, Comparison::Le, -r.constant);
    }
    let sol = match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => sol,
        _ => return Err(numeric("clearing-gap program")),
    };
    let mut pi = model.clean(&sol.x[..nv]);
    let delta = model.gaps(&pi).into_iter().fold(sol.x[nv], f64::max);
    stages.push(StageRecord {
        stage: if perturbed {
            Stage::PerturbedMinMaxDelta
        } else {
            Stage::MinMaxDelta
        },
        objective: delta,
        proven_optimal: true,
    });

    // Stage 2: min #{g_r > 0} s.t. g_r ≤ δ, with g_r ≤ δ·z_r and binary z_r.
    if delta > model.positive_threshold() {
        let zrows: Vec<usize> = (0..model.rows.len())
            .filter(|&r| !model.rows[r].is_constant())
            .collect();
        let total = nv + zrows.len();
        let mut objective = vec![0.0; nv];
        objective.extend(std::iter::repeat_n(1.0, zrows.len()));
        let mut milp = LpProblem::new(Sense::Minimize, objective);
        milp.constraints = extra.iter().map(|c| pad(c, total)).collect();
        for (k, &r) in zrows.iter().enumerate() {
            let mut coeffs = model.rows[r].coeffs.clone();
            coeffs.resize(total, 0.0);
            coeffs[nv + k] = -delta;
            milp.add_constraint(coeffs, Comparison::Le, s - model.rows[r].constant);
            milp.set_bounds(nv + k, 0.0, 1.0);
        }
        let integers: Vec<usize> = (nv..total).collect();

        let round = |pi: &[f64]| -> Option<(Vec<f64>, f64)> {
            if extra.iter().any(|c| c.violation(pi) > 1e-9) {
                return None;
            }
            let mut x = pi.to_vec();
            let mut count = 0.0;
            for &r in &zrows {
                let g = model.rows[r].gap(pi);
                if g > delta + s {
                    return None;
                }
                let z = if g > s { 1.0 } else { 0.0 };
                count += z;
                x.push(z);
            }
            Some((x, count))
        };
        let incumbent = round(&pi);
        let mut heuristic = |x: &[f64]| round(&model.clean(&x[..nv]));
        let milp_opts = MilpOptions {
            node_limit: opts.node_limit,
            deadline: opts.deadline,
            integral_objective: true,
        };
        match solve_milp_with(&milp, &integers, &milp_opts, incumbent, Some(&mut heuristic))? {
            MilpOutcome::Optimal(sol) => {
                pi = model.clean(&sol.x[..nv]);
                stages.push(StageRecord {
                    stage: if perturbed {
                        Stage::PerturbedMinPositiveCount
                    } else {
                        Stage::MinPositiveCount
                    },
                    objective: sol.x[nv..].iter().map(|z| z.round()).sum(),
                    proven_optimal: sol.proven_optimal,
                });
            }
            _ => return Err(numeric("positive-count program")),
        }
    }

    let kept = model
        .rows
        .iter()
        .filter(|r| !r.is_constant())
        .map(|r| {
            if r.gap(&pi) <= s {
                r.at_most(s)
            } else {
                r.at_most(delta + s)
            }
        })
        .collect();
    Ok(CountResult { pi, delta, kept })
}

/// Minimize `Σ max(0, g_r)²` keeping non-positive gaps non-positive and all
/// gaps at most `delta`. Returns the prices and constraints that hold every
/// gap at or below its optimal value.
fn min_delta_norm(
    model: &PriceModel,
    start: &CountResult,
    stages: &mut Vec<StageRecord>,
) -> Result<(Vec<f64>, Vec<LinearConstraint>)> {
    let nv = model.nv();
    let s = model.slack;
    let gaps = model.gaps(&start.pi);
    let unpinned: Vec<usize> = (0..model.rows.len())
        .filter(|&r| !model.rows[r].is_constant() && gaps[r] > s)
        .collect();

    let mut pi = start.pi.clone();
    if !unpinned.is_empty() {
        let total = nv + unpinned.len();
        let mut h = DMatrix::zeros(total, total);
        for k in nv..total {
            h[(k, k)] = 2.0;
        }
        let mut qp = QpProblem::new(h, vec![0.0; total]);
        for j in 0..nv {
            qp.set_bounds(j, 0.0, f64::INFINITY);
        }
        for k in nv..total {
            qp.set_bounds(k, 0.0, start.delta + s);
        }
        qp.constraints = start.kept.iter().map(|c| pad(c, total)).collect();
        for (k, &r) in unpinned.iter().enumerate() {
            let mut coeffs = model.rows[r].coeffs.clone();
            coeffs.resize(total, 0.0);
            coeffs[nv + k] = -1.0;
            qp.add_constraint(coeffs, Comparison::Le, -model.rows[r].constant);
        }
        let mut x0 = start.pi.clone();
        x0.extend(unpinned.iter().map(|&r| gaps[r].clamp(0.0, start.delta + s)));
        match solve_qp_from(&qp, Some(&x0))? {
            QpOutcome::Optimal(sol) => {
                pi = model.clean(&sol.x[..nv]);
                stages.push(StageRecord {
                    stage: Stage::MinDeltaNorm,
                    objective: sol.objective.max(0.0).sqrt(),
                    proven_optimal: true,
                });
            }
            QpOutcome::Infeasible => return Err(numeric("gap-norm program")),
        }
    } else {
        stages.push(StageRecord {
            stage: Stage::MinDeltaNorm,
            objective: 0.0,
            proven_optimal: true,
        });
    }

    let gaps = model.gaps(&pi);
    let kept = model
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_constant())
        .map(|(k, r)| {
            if unpinned.binary_search(&k).is_ok() {
                r.at_most(gaps[k].max(0.0) + s)
            } else {
                r.at_most(s)
            }
        })
        .collect();
    Ok((pi, kept))
}

/// Maximize the price sum subject to `constraints`, then pick the
/// least-norm price vector among the maximizers.
fn maximize_prices(
    nv: usize,
    constraints: &[LinearConstraint],
    start: &[f64],
    stages: &mut Vec<StageRecord>,
) -> Result<Vec<f64>> {
    let lp = price_only_lp(nv, vec![1.0; nv], Sense::Maximize, constraints);
    let (best, sum) = match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => {
            let sum = sol.objective;
            (sol.x, sum)
        }
        // Rows of the empty bundle cap every allocated price.
        LpOutcome::Unbounded => return Err(CoreError::Solver(imlca_solver::SolverError::Unbounded)),
        LpOutcome::Infeasible => return Err(numeric("price-sum program")),
    };
    stages.push(StageRecord {
        stage: Stage::MaxPriceSum,
        objective: sum,
        proven_optimal: true,
    });

    let mut qp = QpProblem::new(DMatrix::identity(nv, nv) * 2.0, vec![0.0; nv]);
    for j in 0..nv {
        qp.set_bounds(j, 0.0, f64::INFINITY);
    }
    qp.constraints = constraints.to_vec();
    qp.add_constraint(vec![1.0; nv], Comparison::Ge, sum - 1e-9 * sum.abs().max(1.0));
    let pi = match solve_qp_from(&qp, Some(&best))? {
        QpOutcome::Optimal(sol) => sol.x,
        QpOutcome::Infeasible => best,
    };
    let _ = start;
    stages.push(StageRecord {
        stage: Stage::MinPriceNorm,
        objective: pi.iter().map(|p| p * p).sum::<f64>().sqrt(),
        proven_optimal: true,
    });
    Ok(pi)
}

fn no_items(model: &PriceModel) -> PriceSolution {
    let pi: Vec<f64> = Vec::new();
    model.solution(&pi, model.gaps(&pi), Vec::new())
}

pub fn approx_clearing_prices(view: &ValuationView, a: &Allocation, profile: &[ReportSet]) -> Result<PriceSolution> {
    approx_clearing_prices_with(view, a, profile, &PricingOptions::default())
}

/// Prices minimizing the largest clearing gap, then the number of positive
/// gaps. Reported deltas are the gaps at the returned prices.
pub fn approx_clearing_prices_with(
    view: &ValuationView,
    a: &Allocation,
    profile: &[ReportSet],
    opts: &PricingOptions,
) -> Result<PriceSolution> {
    let model = PriceModel::new(view, a, profile)?;
    if model.nv() == 0 {
        return Ok(no_items(&model));
    }
    let mut stages = Vec::new();
    let res = min_max_then_count(&model, &[], opts, false, &mut stages)?;
    Ok(model.solution(&res.pi, model.gaps(&res.pi), stages))
}

pub fn unique_prices(profile: &[ReportSet], alpha: f64, a: &Allocation) -> Result<PriceSolution> {
    unique_prices_with(profile, alpha, a, &PricingOptions::default())
}

/// Approximate clearing prices under the α-view, made unique by a gap-norm
/// stage, a price-sum stage and a least-norm tie-break. Reported deltas are
/// the α-view gaps at the returned prices.
pub fn unique_prices_with(
    profile: &[ReportSet],
    alpha: f64,
    a: &Allocation,
    opts: &PricingOptions,
) -> Result<PriceSolution> {
    let model = PriceModel::new(&ValuationView::Alpha(alpha), a, profile)?;
    if model.nv() == 0 {
        return Ok(no_items(&model));
    }
    let mut stages = Vec::new();
    let first = min_max_then_count(&model, &[], opts, false, &mut stages)?;
    let (pi, kept) = min_delta_norm(&model, &first, &mut stages)?;
    let pi = model.clean(&maximize_prices(model.nv(), &kept, &pi, &mut stages)?);
    Ok(model.solution(&pi, model.gaps(&pi), stages))
}

pub fn effort_reduction_prices(profile: &[ReportSet], alpha: f64, a: &Allocation, shift: f64) -> Result<PriceSolution> {
    effort_reduction_prices_with(profile, alpha, a, shift, &PricingOptions::default())
}

/// Like [`unique_prices`], but before maximizing the price sum the
/// perturbed-view gaps are pushed as far below zero as the earlier stages
/// allow. Reported deltas are the perturbed gaps of that stage, capped
/// below at `−shift`; the returned prices keep every perturbed gap at or
/// below its reported delta.
pub fn effort_reduction_prices_with(
    profile: &[ReportSet],
    alpha: f64,
    a: &Allocation,
    shift: f64,
    opts: &PricingOptions,
) -> Result<PriceSolution> {
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(CoreError::Config(format!("shift constant {shift} must be positive")));
    }
    let model = PriceModel::new(&ValuationView::Alpha(alpha), a, profile)?;
    let tilde = PriceModel::new(&ValuationView::Perturbed(a.clone()), a, profile)?;
    if model.nv() == 0 {
        let pi: Vec<f64> = Vec::new();
        let delta = tilde.gaps(&pi).into_iter().map(|g| g.max(-shift)).collect();
        return Ok(tilde.solution(&pi, delta, Vec::new()));
    }
    let nv = model.nv();
    let s = tilde.slack.max(model.slack);
    let mut stages = Vec::new();

    let first = min_max_then_count(&model, &[], opts, false, &mut stages)?;
    let (_, k1) = min_delta_norm(&model, &first, &mut stages)?;

    let second = min_max_then_count(&tilde, &k1, opts, true, &mut stages)?;
    let mut held = k1;
    held.extend(second.kept.iter().cloned());

    let pi = shifted_norm(&tilde, &held, &second.pi, shift, &mut stages)?;
    let delta: Vec<f64> = tilde.gaps(&pi).into_iter().map(|g| g.max(-shift)).collect();
    held.extend(
        tilde
            .rows
            .iter()
            .zip(&delta)
            .filter(|(r, _)| !r.is_constant())
            .map(|(r, &d)| r.at_most(d + s)),
    );

    let pi = tilde.clean(&maximize_prices(nv, &held, &pi, &mut stages)?);
    Ok(tilde.solution(&pi, delta, stages))
}

/// Minimize `Σ_r (δ̃_r + shift)²` with `δ̃_r ≥ g̃_r(π)`.
fn shifted_norm(
    tilde: &PriceModel,
    held: &[LinearConstraint],
    start: &[f64],
    shift: f64,
    stages: &mut Vec<StageRecord>,
) -> Result<Vec<f64>> {
    let nv = tilde.nv();
    let rows: Vec<&Row> = tilde.rows.iter().filter(|r| !r.is_constant()).collect();
    let constant_part: f64 = tilde
        .rows
        .iter()
        .filter(|r| r.is_constant())
        .map(|r| (r.constant.max(-shift) + shift).powi(2))
        .sum();

    // With every gap above −shift, δ̃_r = g̃_r(π) and the program is a QP in
    // the prices alone.
    let mut h = DMatrix::zeros(nv, nv);
    let mut lin = vec![0.0; nv];
    for r in &rows {
        for p in 0..nv {
            if r.coeffs[p] == 0.0 {
                continue;
            }
            lin[p] += 2.0 * (r.constant + shift) * r.coeffs[p];
            for q in 0..nv {
                h[(p, q)] += 2.0 * r.coeffs[p] * r.coeffs[q];
            }
        }
    }
    let mut qp = QpProblem::new(h, lin);
    for j in 0..nv {
        qp.set_bounds(j, 0.0, f64::INFINITY);
    }
    qp.constraints = held.to_vec();
    let pi = match solve_qp_from(&qp, Some(start))? {
        QpOutcome::Optimal(sol) => tilde.clean(&sol.x),
        QpOutcome::Infeasible => return Err(numeric("shifted gap-norm program")),
    };
    let pi = if rows.iter().all(|r| r.gap(&pi) >= -shift - tilde.slack) {
        pi
    } else {
        shifted_norm_capped(tilde, &rows, held, &pi, shift)?
    };
    let objective = rows
        .iter()
        .map(|r| (r.gap(&pi).max(-shift) + shift).powi(2))
        .sum::<f64>()
        + constant_part;
    stages.push(StageRecord {
        stage: Stage::MinShiftedDeltaNorm,
        objective: objective.sqrt(),
        proven_optimal: true,
    });
    Ok(pi)
}

/// General form with one variable per gap, for when some gap would fall
/// below `−shift`.
fn shifted_norm_capped(
    tilde: &PriceModel,
    rows: &[&Row],
    held: &[LinearConstraint],
    start: &[f64],
    shift: f64,
) -> Result<Vec<f64>> {
    let nv = tilde.nv();
    let total = nv + rows.len();
    let mut h = DMatrix::zeros(total, total);
    let mut lin = vec![0.0; total];
    for k in nv..total {
        h[(k, k)] = 2.0;
        lin[k] = 2.0 * shift;
    }
    let mut qp = QpProblem::new(h, lin);
    for j in 0..nv {
        qp.set_bounds(j, 0.0, f64::INFINITY);
    }
    qp.constraints = held.iter().map(|c| pad(c, total)).collect();
    for (k, r) in rows.iter().enumerate() {
        let mut coeffs = r.coeffs.clone();
        coeffs.resize(total, 0.0);
        coeffs[nv + k] = -1.0;
        qp.add_constraint(coeffs, Comparison::Le, -r.constant);
    }
    let mut x0 = start.to_vec();
    x0.extend(rows.iter().map(|r| r.gap(start).max(-shift)));
    match solve_qp_from(&qp, Some(&x0))? {
        QpOutcome::Optimal(sol) => Ok(tilde.clean(&sol.x[..nv])),
        QpOutcome::Infeasible => Err(numeric("shifted gap-norm program")),
    }
}

/// Demand: every bidder weakly prefers its allocated bundle to each of its
/// reports at `prices`. Supply: no allocation over reported bundles earns
/// more revenue.
pub fn is_clearing(prices: &LinearPrices, a: &Allocation, view: &ValuationView, profile: &[ReportSet]) -> Result<bool> {
    clearing_check(prices, a, profile, |i, b| view.value(&profile[i], b))
}

/// [`is_clearing`] with true values in place of a view of the reports.
pub fn is_clearing_true<V: crate::model::Valuation>(
    prices: &LinearPrices,
    a: &Allocation,
    values: &[V],
    profile: &[ReportSet],
) -> Result<bool> {
    clearing_check(prices, a, profile, |i, b| Ok(values[i].value(b)))
}

fn clearing_check(
    prices: &LinearPrices,
    a: &Allocation,
    profile: &[ReportSet],
    value: impl Fn(usize, &Bundle) -> Result<f64>,
) -> Result<bool> {
    if !a.is_feasible() || a.num_bidders() != profile.len() {
        return Ok(false);
    }
    for (i, reports) in profile.iter().enumerate() {
        let ai = a.bundle(i);
        let ua = value(i, ai)? - prices.price(ai);
        for r in reports.iter() {
            if value(i, &r.bundle)? - prices.price(&r.bundle) > ua + TOL {
                return Ok(false);
            }
        }
    }
    let problem = imlca_solver::WdpProblem {
        num_items: profile.first().map_or(0, |r| r.num_items()),
        bidders: profile
            .iter()
            .map(|reports| {
                reports
                    .iter()
                    .map(|r| imlca_solver::WdpCandidate {
                        items: r.bundle.mask(),
                        weight: prices.price(&r.bundle),
                    })
                    .collect()
            })
            .collect(),
    };
    let best = imlca_solver::solve_wdp(&problem)?.value;
    Ok(prices.allocation_price(a) >= best - TOL)
}
