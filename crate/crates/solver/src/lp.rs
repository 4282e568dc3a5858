//! Dense two-phase simplex.
//!
//! Variables may carry arbitrary (possibly infinite) bounds; they are mapped
//! onto nonnegative structural columns before the tableau is built. The
//! entering rule is Dantzig's largest reduced cost, switching permanently to
//! Bland's rule after a run of degenerate pivots, so the solver both
//! terminates and stays deterministic.

use crate::{Result, SolverError};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub cmp: Comparison,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, cmp: Comparison, rhs: f64) -> Self {
        Self { coeffs, cmp, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.cmp {
            Comparison::Le => (lhs - self.rhs).max(0.0),
            Comparison::Ge => (self.rhs - lhs).max(0.0),
            Comparison::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program. Variables default to the bounds `[0, +inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, cmp: Comparison, rhs: f64) {
        self.constraints.push(LinearConstraint::new(coeffs, cmp, rhs));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or constraint violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(SolverError::Dimension(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::NonFinite("objective coefficient".into()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(SolverError::NonFinite(format!("bounds of variable {j}")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(SolverError::Dimension(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(SolverError::NonFinite(format!("constraint {i}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// How an original variable is expressed in structural columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Fixed(f64),
    Shifted { col: usize, lower: f64 },
    Mirrored { col: usize, upper: f64 },
    Split { pos: usize, neg: usize },
}

/// `coeffs·x (cmp) rhs` over original variables, rewritten over structural
/// columns.
fn structural_row(maps: &[VarMap], ncols: usize, coeffs: &[f64], rhs: f64) -> (Vec<f64>, f64) {
    let mut row = vec![0.0; ncols];
    let mut rhs = rhs;
    for (j, &a) in coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        match maps[j] {
            VarMap::Fixed(v) => rhs -= a * v,
            VarMap::Shifted { col, lower } => {
                row[col] += a;
                rhs -= a * lower;
            }
            VarMap::Mirrored { col, upper } => {
                row[col] -= a;
                rhs -= a * upper;
            }
            VarMap::Split { pos, neg } => {
                row[pos] += a;
                row[neg] -= a;
            }
        }
    }
    (row, rhs)
}

pub fn solve_lp(p: &LpProblem) -> Result<LpOutcome> {
    Ok(WarmLp::solve(p)?.0)
}

/// An optimal simplex tableau that accepts further `≤`/`≥` rows and
/// re-optimizes with dual simplex. Branch and bound uses it so a child node
/// starts from its parent's basis.
#[derive(Debug, Clone)]
pub(crate) struct WarmLp {
    maps: Vec<VarMap>,
    ncols: usize,
    objective: Vec<f64>,
    tableau: Tableau,
}

impl WarmLp {
    /// Solves `p` from scratch; the tableau is kept when optimal.
    pub(crate) fn solve(p: &LpProblem) -> Result<(LpOutcome, Option<WarmLp>)> {
        p.validate()?;
        let mut maps = Vec::with_capacity(p.num_vars());
        let mut ncols = 0usize;
        let mut upper_rows: Vec<(usize, f64)> = Vec::new();
        for &(lo, hi) in &p.bounds {
            if lo > hi {
                return Ok((LpOutcome::Infeasible, None));
            }
            let map = if lo == hi {
                VarMap::Fixed(lo)
            } else if lo.is_finite() {
                let col = ncols;
                ncols += 1;
                if hi.is_finite() {
                    upper_rows.push((col, hi - lo));
                }
                VarMap::Shifted { col, lower: lo }
            } else if hi.is_finite() {
                let col = ncols;
                ncols += 1;
                VarMap::Mirrored { col, upper: hi }
            } else {
                let pos = ncols;
                ncols += 2;
                VarMap::Split { pos, neg: pos + 1 }
            };
            maps.push(map);
        }

        let mut rows: Vec<(Vec<f64>, Comparison, f64)> = p
            .constraints
            .iter()
            .map(|c| {
                let (row, rhs) = structural_row(&maps, ncols, &c.coeffs, c.rhs);
                (row, c.cmp, rhs)
            })
            .collect();
        for &(col, width) in &upper_rows {
            let mut coeffs = vec![0.0; ncols];
            coeffs[col] = 1.0;
            rows.push((coeffs, Comparison::Le, width));
        }

        // Structural objective (always minimized internally).
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; ncols];
        for (j, &c) in p.objective.iter().enumerate() {
            let c = sign * c;
            match maps[j] {
                VarMap::Fixed(_) => {}
                VarMap::Shifted { col, .. } => cost[col] += c,
                VarMap::Mirrored { col, .. } => cost[col] -= c,
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        let mut tableau = Tableau::new(ncols, rows);
        if !tableau.phase1()? {
            return Ok((LpOutcome::Infeasible, None));
        }
        if !tableau.phase2(&cost)? {
            return Ok((LpOutcome::Unbounded, None));
        }
        let warm = WarmLp {
            maps,
            ncols,
            objective: p.objective.clone(),
            tableau,
        };
        Ok((LpOutcome::Optimal(warm.solution()), Some(warm)))
    }

    pub(crate) fn solution(&self) -> LpSolution {
        let y = self.tableau.values(self.ncols);
        let x: Vec<f64> = self
            .maps
            .iter()
            .map(|m| match *m {
                VarMap::Fixed(v) => v,
                VarMap::Shifted { col, lower } => lower + y[col],
                VarMap::Mirrored { col, upper } => upper - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect();
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution { x, objective }
    }

    /// Adds `coeffs·x ≤ rhs` (or `≥`) and re-optimizes. Returns false when
    /// the problem became infeasible.
    pub(crate) fn add_constraint(&mut self, coeffs: &[f64], cmp: Comparison, rhs: f64) -> Result<bool> {
        let (mut row, mut rhs) = structural_row(&self.maps, self.ncols, coeffs, rhs);
        match cmp {
            Comparison::Le => {}
            Comparison::Ge => {
                row.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
            }
            Comparison::Eq => {
                return Err(SolverError::Dimension("equality rows cannot be added warm".into()));
            }
        }
        self.tableau.add_le_row(&row, rhs);
        self.tableau.dual_simplex()
    }
}

#[derive(Debug, Clone)]
struct Tableau {
    width: usize,
    data: Vec<f64>,
    rows: usize,
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// Columns in `first_artificial..end_artificial` are artificial.
    first_artificial: usize,
    end_artificial: usize,
    /// Largest right-hand side at build time, for relative tolerances.
    scale: f64,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

impl Tableau {
    fn new(ncols: usize, rows: Vec<(Vec<f64>, Comparison, f64)>) -> Self {
        let m = rows.len();
        // Normalize to nonnegative right-hand sides.
        let rows: Vec<(Vec<f64>, Comparison, f64)> = rows
            .into_iter()
            .map(|(mut a, cmp, b)| {
                if b < 0.0 {
                    a.iter_mut().for_each(|v| *v = -*v);
                    let cmp = match cmp {
                        Comparison::Le => Comparison::Ge,
                        Comparison::Ge => Comparison::Le,
                        Comparison::Eq => Comparison::Eq,
                    };
                    (a, cmp, -b)
                } else {
                    (a, cmp, b)
                }
            })
            .collect();

        let nslack = rows.iter().filter(|r| r.1 != Comparison::Eq).count();
        let nart = rows.iter().filter(|r| r.1 != Comparison::Le).count();
        let first_artificial = ncols + nslack;
        let total = first_artificial + nart;
        let width = total + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0usize; m];
        let mut slack = ncols;
        let mut art = first_artificial;
        for (i, (a, cmp, b)) in rows.iter().enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            row[..ncols].copy_from_slice(a);
            row[total] = *b;
            match cmp {
                Comparison::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Comparison::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Comparison::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            width,
            data,
            rows: m,
            obj: vec![0.0; width],
            basis,
            first_artificial,
            end_artificial: total,
            scale: rows.iter().map(|r| r.2.abs()).fold(1.0, f64::max),
            iterations: 0,
            max_iterations: 200 * (m + total + 10),
            degenerate_run: 0,
            bland: false,
        }
    }

    /// Drives the artificials to zero. Returns false when infeasible.
    fn phase1(&mut self) -> Result<bool> {
        if self.first_artificial == self.end_artificial {
            return Ok(true);
        }
        let rhs = self.width - 1;
        for j in self.first_artificial..self.end_artificial {
            self.obj[j] = 1.0;
        }
        for i in 0..self.rows {
            if self.is_artificial(self.basis[i]) {
                self.subtract_row_from_obj(i, 1.0);
            }
        }
        if !self.run(true)? {
            // Phase 1 is bounded below by zero.
            return Err(SolverError::Unbounded);
        }
        let infeasibility = -self.obj[rhs];
        if infeasibility > 1e-7 * self.scale {
            return Ok(false);
        }
        self.expel_artificials();
        Ok(true)
    }

    /// Minimizes `cost` over the structural columns. Returns false when
    /// unbounded.
    fn phase2(&mut self, cost: &[f64]) -> Result<bool> {
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        self.obj[..cost.len()].copy_from_slice(cost);
        for i in 0..self.rows {
            let b = self.basis[i];
            let cb = if b < cost.len() { cost[b] } else { 0.0 };
            if cb != 0.0 {
                self.subtract_row_from_obj(i, cb);
            }
        }
        self.degenerate_run = 0;
        self.bland = false;
        self.run(false)
    }

    fn values(&self, ncols: usize) -> Vec<f64> {
        let mut y = vec![0.0; ncols];
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < ncols {
                y[b] = self.rhs(i).max(0.0);
            }
        }
        y
    }

    fn is_artificial(&self, j: usize) -> bool {
        (self.first_artificial..self.end_artificial).contains(&j)
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn subtract_row_from_obj(&mut self, i: usize, factor: f64) {
        let row = &self.data[i * self.width..(i + 1) * self.width];
        for (o, r) in self.obj.iter_mut().zip(row) {
            *o -= factor * r;
        }
    }

    /// Primal simplex iterations; artificial columns may enter only in
    /// phase 1. Returns false when unbounded.
    fn run(&mut self, phase1: bool) -> Result<bool> {
        loop {
            let Some(enter) = self.entering(phase1) else {
                return Ok(true);
            };
            let Some(leave) = self.leaving(enter) else {
                return Ok(false);
            };
            if self.rhs(leave).abs() <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_SWITCH {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(leave, enter);
            self.tick()?;
        }
    }

    fn tick(&mut self) -> Result<()> {
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(SolverError::IterationLimit(self.iterations));
        }
        Ok(())
    }

    fn may_enter(&self, j: usize, phase1: bool) -> bool {
        phase1 || !self.is_artificial(j)
    }

    fn entering(&self, phase1: bool) -> Option<usize> {
        let limit = self.width - 1;
        if self.bland {
            return (0..limit).find(|&j| self.may_enter(j, phase1) && self.obj[j] < -COST_TOL);
        }
        let mut best: Option<usize> = None;
        let mut best_val = -COST_TOL;
        for j in 0..limit {
            if self.obj[j] < best_val && self.may_enter(j, phase1) {
                best_val = self.obj[j];
                best = Some(j);
            }
        }
        best
    }

    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.data[i * self.width + col];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let pv = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= pv;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
                if v.abs() < 1e-13 {
                    *v = 0.0;
                }
            }
            row[c] = 0.0;
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Pivot zero-level artificials out of the basis where possible. Rows
    /// where no structural or slack column is available are redundant.
    fn expel_artificials(&mut self) {
        for i in 0..self.rows {
            if !self.is_artificial(self.basis[i]) {
                continue;
            }
            let w = self.width;
            let col = (0..self.first_artificial)
                .filter(|&j| self.data[i * w + j].abs() > PIVOT_TOL)
                .max_by(|&a, &b| {
                    self.data[i * w + a]
                        .abs()
                        .total_cmp(&self.data[i * w + b].abs())
                        .then(b.cmp(&a))
                });
            if let Some(j) = col {
                self.pivot(i, j);
            }
        }
    }

    /// Appends `row·y + s = rhs` with a fresh slack `s`, rewritten in terms
    /// of the current nonbasic columns.
    fn add_le_row(&mut self, row: &[f64], rhs: f64) {
        let (old_w, w) = (self.width, self.width + 1);
        let mut data = Vec::with_capacity((self.rows + 1) * w);
        for i in 0..self.rows {
            let src = &self.data[i * old_w..(i + 1) * old_w];
            data.extend_from_slice(&src[..old_w - 1]);
            data.push(0.0);
            data.push(src[old_w - 1]);
        }
        let mut new = vec![0.0; w];
        new[..row.len()].copy_from_slice(row);
        new[old_w - 1] = 1.0;
        new[w - 1] = rhs;
        for i in 0..self.rows {
            let f = new[self.basis[i]];
            if f != 0.0 {
                for (v, p) in new.iter_mut().zip(&data[i * w..(i + 1) * w]) {
                    *v -= f * p;
                }
            }
        }
        data.extend_from_slice(&new);
        self.data = data;
        let last = self.obj[old_w - 1];
        self.obj[old_w - 1] = 0.0;
        self.obj.push(last);
        self.basis.push(old_w - 1);
        self.rows += 1;
        self.width = w;
        self.max_iterations += 200;
    }

    /// Restores primal feasibility from a dual feasible basis. Returns false
    /// when infeasible.
    fn dual_simplex(&mut self) -> Result<bool> {
        let tol = 1e-9 * self.scale;
        loop {
            let leave = (0..self.rows)
                .filter(|&i| self.rhs(i) < -tol)
                .min_by(|&a, &b| self.rhs(a).total_cmp(&self.rhs(b)).then(a.cmp(&b)));
            let Some(r) = leave else {
                break;
            };
            let w = self.width;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..w - 1 {
                let a = self.data[r * w + j];
                if a >= -PIVOT_TOL || self.is_artificial(j) {
                    continue;
                }
                let ratio = self.obj[j].max(0.0) / -a;
                if enter.is_none_or(|(_, best)| ratio < best - 1e-12 * (1.0 + best.abs())) {
                    enter = Some((j, ratio));
                }
            }
            let Some((c, _)) = enter else {
                return Ok(false);
            };
            self.pivot(r, c);
            self.tick()?;
        }
        // Mop up any reduced cost the dual pivots left slightly negative.
        self.degenerate_run = 0;
        self.bland = false;
        if !self.run(false)? {
            return Err(SolverError::Unbounded);
        }
        Ok(true)
    }
}
