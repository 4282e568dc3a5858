//! Kernel regression on interval labels and learned-welfare queries.
//!
//! Each report's interval is its own insensitivity tube: the fit pays for
//! leaving `[lower, upper]`, not for where inside it lands. The dual of
//!
//! ```text
//! min ½‖w‖² + C Σ_k (ξ̄_k + ξ_k)
//! s.t. f(x_k) ≤ upper_k + ξ̄_k,  f(x_k) ≥ lower_k − ξ_k,  ξ ≥ 0
//! ```
//!
//! is a box-constrained QP over one multiplier pair per report.

use imlca_solver::{max_welfare_assignment, solve_qp, QpOutcome, QpProblem};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::allocation::Economy;
use crate::error::{CoreError, Result};
use crate::model::{Allocation, Bundle, ReportSet};

/// Bundle space limit of the exact learned-welfare maximization.
pub const MAX_QUERY_ITEMS: usize = imlca_solver::subset_dp::MAX_ITEMS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    /// `c` in `K(x, y) = (xᵀy + c)²`.
    pub offset: f64,
    pub regularization: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            offset: 1.0,
            regularization: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    params: KernelParams,
    num_items: usize,
    training: Vec<Bundle>,
    coefficients: Vec<f64>,
    /// Optimal value of the primal program.
    objective: f64,
}

impl KernelModel {
    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn training(&self) -> &[Bundle] {
        &self.training
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    fn kernel(&self, a: u64, b: u64) -> f64 {
        kernel(self.params.offset, a, b)
    }

    /// Kernel expansion without clamping.
    pub fn raw(&self, x: &Bundle) -> f64 {
        self.training
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * self.kernel(t.mask(), x.mask()))
            .sum()
    }

    /// Learned value: the kernel expansion clamped at 0, and exactly 0 on
    /// the empty bundle.
    pub fn predict(&self, x: &Bundle) -> f64 {
        if x.is_empty() {
            0.0
        } else {
            self.raw(x).max(0.0)
        }
    }

    /// Learned values of every bundle, indexed by mask.
    pub fn predict_all(&self) -> Vec<f64> {
        (0..1u64 << self.num_items)
            .map(|mask| {
                if mask == 0 {
                    return 0.0;
                }
                let v: f64 = self
                    .training
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(t, c)| c * self.kernel(t.mask(), mask))
                    .sum();
                v.max(0.0)
            })
            .collect()
    }

    /// `Σ_k` distance of the unclamped fit from each training interval.
    pub fn training_slack(&self, reports: &ReportSet) -> f64 {
        reports
            .iter()
            .skip(1)
            .map(|r| {
                let f = self.raw(&r.bundle);
                (f - r.upper).max(0.0) + (r.lower - f).max(0.0)
            })
            .sum()
    }
}

fn kernel(offset: f64, a: u64, b: u64) -> f64 {
    let dot = (a & b).count_ones() as f64 + offset;
    dot * dot
}

pub fn predict(model: &KernelModel, x: &Bundle) -> f64 {
    model.predict(x)
}

/// Fits the interval regression on the non-empty reports of `reports`.
pub fn fit_interval_model(reports: &ReportSet, params: KernelParams) -> Result<KernelModel> {
    if !(params.regularization > 0.0 && params.regularization.is_finite()) || !params.offset.is_finite() {
        return Err(CoreError::Config(format!("invalid kernel parameters {params:?}")));
    }
    let training: Vec<Bundle> = reports.bundles().filter(|b| !b.is_empty()).collect();
    let num_items = reports.num_items();
    if training.is_empty() {
        return Ok(KernelModel {
            params,
            num_items,
            training,
            coefficients: Vec::new(),
            objective: 0.0,
        });
    }
    let k = training.len();
    let gram = DMatrix::from_fn(k, k, |i, j| kernel(params.offset, training[i].mask(), training[j].mask()));
    // Variables (α, α*): α prices the lower side, α* the upper side, and
    // the expansion coefficients are α − α*.
    let mut h = DMatrix::zeros(2 * k, 2 * k);
    h.view_mut((0, 0), (k, k)).copy_from(&gram);
    h.view_mut((k, k), (k, k)).copy_from(&gram);
    h.view_mut((0, k), (k, k)).copy_from(&(-&gram));
    h.view_mut((k, 0), (k, k)).copy_from(&(-&gram));
    let mut linear = Vec::with_capacity(2 * k);
    for b in &training {
        linear.push(-reports.lower(b)?);
    }
    for b in &training {
        linear.push(reports.upper(b)?);
    }
    let mut qp = QpProblem::new(h, linear);
    for j in 0..2 * k {
        qp.set_bounds(j, 0.0, params.regularization);
    }
    let sol = match solve_qp(&qp)? {
        QpOutcome::Optimal(sol) => sol,
        QpOutcome::Infeasible => unreachable!("box with nonempty interior"),
    };
    let coefficients: Vec<f64> = (0..k).map(|i| sol.x[i] - sol.x[k + i]).collect();
    Ok(KernelModel {
        params,
        num_items,
        training,
        coefficients,
        objective: -sol.objective,
    })
}

/// Per-bidder query of one economy: each member's share of the
/// learned-welfare-maximizing allocation over the whole bundle space. A
/// member whose share is in `known[i]` gets its share of the maximizer with
/// `known[i]` excluded for that member alone; `None` if every bundle is
/// known. Non-members get `None`.
pub fn economy_queries(
    models: &[KernelModel],
    known: &[Vec<Bundle>],
    economy: Economy,
) -> Result<Vec<Option<Bundle>>> {
    let n = models.len();
    economy.validate(n)?;
    let num_items = models.first().map_or(0, |m| m.num_items);
    if num_items > MAX_QUERY_ITEMS {
        return Err(CoreError::Solver(imlca_solver::SolverError::TooLarge(format!(
            "{num_items} items (limit {MAX_QUERY_ITEMS})"
        ))));
    }
    let size = 1usize << num_items;
    let mut values: Vec<Vec<f64>> = models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if economy.includes(i) {
                m.predict_all()
            } else {
                let mut v = vec![f64::NEG_INFINITY; size];
                v[0] = 0.0;
                v
            }
        })
        .collect();
    let base = welfare_argmax(num_items, &values)?.0;

    let mut out = vec![None; n];
    for i in economy.members(n) {
        let share = base[i];
        let is_known = |mask: u64| share_known(&known[i], mask);
        if !is_known(share) {
            out[i] = Some(Bundle::from_mask(share, num_items)?);
            continue;
        }
        let saved = values[i].clone();
        for b in &known[i] {
            values[i][b.mask() as usize] = f64::NEG_INFINITY;
        }
        if let Some((alt, _)) = max_welfare_assignment(num_items, &values)? {
            out[i] = Some(Bundle::from_mask(alt[i], num_items)?);
        }
        values[i] = saved;
    }
    Ok(out)
}

fn welfare_argmax(num_items: usize, values: &[Vec<f64>]) -> Result<(Vec<u64>, f64)> {
    Ok(max_welfare_assignment(num_items, values)?.expect("empty bundles are always allowed"))
}

/// Allocation of the whole bundle space maximizing learned welfare within
/// `economy`, and its learned welfare.
pub fn learned_allocation(models: &[KernelModel], economy: Economy) -> Result<(Allocation, f64)> {
    let n = models.len();
    economy.validate(n)?;
    let num_items = models.first().map_or(0, |m| m.num_items);
    if num_items > MAX_QUERY_ITEMS {
        return Err(CoreError::Solver(imlca_solver::SolverError::TooLarge(format!(
            "{num_items} items (limit {MAX_QUERY_ITEMS})"
        ))));
    }
    let values: Vec<Vec<f64>> = models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if economy.includes(i) {
                m.predict_all()
            } else {
                let mut v = vec![f64::NEG_INFINITY; 1 << num_items];
                v[0] = 0.0;
                v
            }
        })
        .collect();
    let (masks, value) = welfare_argmax(num_items, &values)?;
    let bundles = masks
        .into_iter()
        .map(|m| Bundle::from_mask(m, num_items))
        .collect::<Result<Vec<_>>>()?;
    Ok((Allocation::new(bundles), value))
}

fn share_known(known: &[Bundle], mask: u64) -> bool {
    mask == 0 || known.iter().any(|b| b.mask() == mask)
}

/// Queries for the members of `economy`, excluding each member's reported
/// bundles. The empty bundle always counts as reported.
pub fn next_query(models: &[KernelModel], profile: &[ReportSet], economy: Economy) -> Result<Vec<Option<Bundle>>> {
    let known: Vec<Vec<Bundle>> = profile.iter().map(|r| r.bundles().collect()).collect();
    let out = economy_queries(models, &known, economy)?;
    for i in economy.members(models.len()) {
        if out[i].is_none() {
            return Err(CoreError::ExhaustedBundleSpace(i));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct QueryParams {
    pub kernel: KernelParams,
    /// Per-bidder cap on new queries in one round.
    pub per_round: usize,
    /// Per-bidder cap on non-empty reports overall.
    pub max_reports: usize,
    /// Rotates which marginal economies are served first.
    pub round: usize,
    /// Bidders that receive no queries.
    pub frozen: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryPlan {
    pub bundles: Vec<Vec<Bundle>>,
}

impl QueryPlan {
    pub fn total(&self) -> usize {
        self.bundles.iter().map(Vec::len).sum()
    }
}

/// One main-economy query per bidder, then one per marginal economy the
/// bidder belongs to, until the bidder's budget for the round is spent.
pub fn generate_round_queries(profile: &[ReportSet], params: &QueryParams) -> Result<QueryPlan> {
    let models = profile
        .iter()
        .map(|r| fit_interval_model(r, params.kernel))
        .collect::<Result<Vec<_>>>()?;
    generate_round_queries_with(&models, profile, params)
}

/// [`generate_round_queries`] with already fitted models.
pub fn generate_round_queries_with(
    models: &[KernelModel],
    profile: &[ReportSet],
    params: &QueryParams,
) -> Result<QueryPlan> {
    let n = profile.len();
    let mut budget: Vec<usize> = profile
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if params.frozen.get(i).copied().unwrap_or(false) {
                0
            } else {
                params.per_round.min(params.max_reports.saturating_sub(r.num_queried()))
            }
        })
        .collect();
    let mut known: Vec<Vec<Bundle>> = profile.iter().map(|r| r.bundles().collect()).collect();
    let mut plan = QueryPlan {
        bundles: vec![Vec::new(); n],
    };

    let mut economies = vec![Economy::Main];
    if n > 1 {
        economies.extend((0..n).map(|k| Economy::Marginal((params.round + k) % n)));
    }
    for economy in economies {
        let members = economy.members(n);
        if members.iter().all(|&i| budget[i] == 0) {
            continue;
        }
        let queries = economy_queries(models, &known, economy)?;
        for i in members {
            if budget[i] == 0 {
                continue;
            }
            if let Some(b) = queries[i] {
                plan.bundles[i].push(b);
                known[i].push(b);
                budget[i] -= 1;
            }
        }
        if budget.iter().all(|&b| b == 0) {
            break;
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IntervalReport;

    fn exact_reports(bidder: usize, values: &[f64]) -> ReportSet {
        let m = values.len().trailing_zeros() as usize;
        let mut r = ReportSet::new(bidder, m);
        for (mask, &v) in values.iter().enumerate().skip(1) {
            let b = Bundle::from_mask(mask as u64, m).unwrap();
            r.insert(IntervalReport::exact(b, v).unwrap()).unwrap();
        }
        r
    }

    #[test]
    fn empty_training_predicts_zero() {
        let m = fit_interval_model(&ReportSet::new(0, 3), KernelParams::default()).unwrap();
        assert!(m.predict_all().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interpolates_f1_bidder() {
        let params = KernelParams {
            offset: 1.0,
            regularization: 1e4,
        };
        let m = fit_interval_model(&exact_reports(0, &[0.0, 10.0, 4.0, 20.0]), params).unwrap();
        let ab = Bundle::full(2);
        assert!((m.predict(&ab) - 20.0).abs() <= 0.1);
        assert_eq!(m.predict(&Bundle::empty(2)), 0.0);
    }

    #[test]
    fn exclusion_resolve_on_f1() {
        let params = KernelParams {
            offset: 1.0,
            regularization: 1e4,
        };
        let r1 = exact_reports(0, &[0.0, 10.0, 4.0, 20.0]);
        let r2 = exact_reports(1, &[0.0, 6.0, 8.0, 12.0]);
        let models = vec![fit_interval_model(&r1, params).unwrap(), fit_interval_model(&r2, params).unwrap()];
        let ab = Bundle::full(2);
        let a = Bundle::from_items(&[0], 2).unwrap();
        let none: Vec<Vec<Bundle>> = vec![vec![], vec![]];
        let q = economy_queries(&models, &none, Economy::Main).unwrap();
        assert_eq!(q[0], Some(ab));
        let known = vec![vec![ab], vec![]];
        let q = economy_queries(&models, &known, Economy::Main).unwrap();
        assert_eq!(q[0], Some(a));
    }
}
