//! Primal active-set method for convex quadratic programs
//!
//! ```text
//! minimize   ½ xᵀ H x + cᵀ x
//! subject to linear rows and variable bounds
//! ```
//!
//! `H` only needs to be positive semidefinite. Along directions of zero
//! curvature the method takes a ray step to the nearest blocking constraint,
//! which is what the interval regression dual and the price problems need.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::lp::{solve_lp, Comparison, LinearConstraint, LpOutcome, LpProblem, Sense};
use crate::{Result, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    /// Defaults to free variables.
    pub bounds: Vec<(f64, f64)>,
}

impl QpProblem {
    pub fn new(hessian: DMatrix<f64>, linear: Vec<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            constraints: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, cmp: Comparison, rhs: f64) {
        self.constraints.push(LinearConstraint::new(coeffs, cmp, rhs));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        0.5 * v.dot(&(&self.hessian * &v)) + self.linear.iter().zip(x).map(|(c, a)| c * a).sum::<f64>()
    }

    fn feasibility_lp(&self) -> LpProblem {
        LpProblem {
            sense: Sense::Minimize,
            objective: vec![0.0; self.num_vars()],
            constraints: self.constraints.clone(),
            bounds: self.bounds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal(QpSolution),
    Infeasible,
}

impl QpOutcome {
    pub fn optimal(self) -> Option<QpSolution> {
        match self {
            QpOutcome::Optimal(s) => Some(s),
            QpOutcome::Infeasible => None,
        }
    }
}

pub fn solve_qp(p: &QpProblem) -> Result<QpOutcome> {
    solve_qp_from(p, None)
}

/// Like [`solve_qp`], starting from `start` when it is feasible.
pub fn solve_qp_from(p: &QpProblem, start: Option<&[f64]>) -> Result<QpOutcome> {
    let n = p.num_vars();
    if p.hessian.nrows() != n || p.hessian.ncols() != n {
        return Err(SolverError::Dimension(format!(
            "hessian is {}x{}, expected {n}x{n}",
            p.hessian.nrows(),
            p.hessian.ncols()
        )));
    }
    if p.hessian.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("hessian".into()));
    }
    let lp = p.feasibility_lp();
    lp.validate()?;
    check_convex(&p.hessian)?;

    let rows = match Rows::build(p) {
        Some(r) => r,
        None => return Ok(QpOutcome::Infeasible),
    };

    let x0 = match start {
        Some(s) if s.len() == n && lp.max_violation(s) <= 1e-9 => s.to_vec(),
        _ => match solve_lp(&lp)? {
            LpOutcome::Optimal(s) => s.x,
            LpOutcome::Infeasible => return Ok(QpOutcome::Infeasible),
            LpOutcome::Unbounded => unreachable!("zero objective"),
        },
    };

    let x = active_set(p, &rows, x0)?;
    let objective = p.objective_value(&x);
    Ok(QpOutcome::Optimal(QpSolution { x, objective }))
}

fn check_convex(h: &DMatrix<f64>) -> Result<()> {
    let n = h.nrows();
    if n == 0 {
        return Ok(());
    }
    let scale = h.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > 1e-9 * scale {
                return Err(SolverError::NotConvex(h[(i, j)] - h[(j, i)]));
            }
        }
    }
    let sym = (h + h.transpose()) * 0.5;
    let min_eig = sym.symmetric_eigenvalues().min();
    if min_eig < -1e-8 * scale {
        return Err(SolverError::NotConvex(min_eig));
    }
    Ok(())
}

/// All constraints as normalized rows `a·x ≤ b` (or `=` when `eq`).
struct Rows {
    a: Vec<DVector<f64>>,
    b: Vec<f64>,
    eq: Vec<bool>,
}

impl Rows {
    fn build(p: &QpProblem) -> Option<Rows> {
        let n = p.num_vars();
        let mut rows = Rows {
            a: Vec::new(),
            b: Vec::new(),
            eq: Vec::new(),
        };
        for c in &p.constraints {
            let a = DVector::from_column_slice(&c.coeffs);
            match c.cmp {
                Comparison::Le => rows.push(a, c.rhs, false)?,
                Comparison::Ge => rows.push(-a, -c.rhs, false)?,
                Comparison::Eq => rows.push(a, c.rhs, true)?,
            }
        }
        for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
            let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
            if lo == hi {
                rows.push(e, lo, true)?;
                continue;
            }
            if hi.is_finite() {
                rows.push(e.clone(), hi, false)?;
            }
            if lo.is_finite() {
                rows.push(-e, -lo, false)?;
            }
        }
        Some(rows)
    }

    /// Returns `None` when a zero row is violated.
    fn push(&mut self, a: DVector<f64>, b: f64, eq: bool) -> Option<()> {
        let norm = a.norm();
        if norm == 0.0 {
            let ok = if eq { b.abs() <= 1e-9 } else { b >= -1e-9 };
            return ok.then_some(());
        }
        self.a.push(a / norm);
        self.b.push(b / norm);
        self.eq.push(eq);
        Some(())
    }

    fn len(&self) -> usize {
        self.a.len()
    }
}

/// Orthonormal basis of the span of `rows` (dependent rows are skipped) and
/// the indices that were kept.
fn orthonormalize(rows: &[&DVector<f64>]) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        let mut v = (*r).clone();
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        let norm = v.norm();
        if norm > 1e-9 {
            basis.push(v / norm);
            kept.push(k);
        }
    }
    (basis, kept)
}

fn null_space(n: usize, range: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = range.to_vec();
    let mut z = Vec::new();
    for j in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            let v = v / norm;
            basis.push(v.clone());
            z.push(v);
        }
    }
    z
}

fn active_set(p: &QpProblem, rows: &Rows, x0: Vec<f64>) -> Result<Vec<f64>> {
    let n = p.num_vars();
    let h = &p.hessian;
    let c = DVector::from_column_slice(&p.linear);
    let mut x = DVector::from_vec(x0);
    let scale = h.amax().max(c.amax()).max(1.0);
    let grad_tol = 1e-10 * scale;

    // Working set, kept linearly independent. Equalities are permanent.
    let mut working: Vec<usize> = {
        let eq_rows: Vec<usize> = (0..rows.len()).filter(|&i| rows.eq[i]).collect();
        let refs: Vec<&DVector<f64>> = eq_rows.iter().map(|&i| &rows.a[i]).collect();
        let (_, kept) = orthonormalize(&refs);
        kept.into_iter().map(|k| eq_rows[k]).collect()
    };

    let max_iter = 50 * (n + rows.len() + 10);
    for _ in 0..max_iter {
        let g = h * &x + &c;
        let refs: Vec<&DVector<f64>> = working.iter().map(|&i| &rows.a[i]).collect();
        let (range, _) = orthonormalize(&refs);
        let z = null_space(n, &range);

        let direction = if z.is_empty() {
            None
        } else {
            let zm = DMatrix::from_columns(&z);
            let gz = zm.transpose() * &g;
            if gz.amax() <= grad_tol {
                None
            } else {
                Some(reduced_step(h, &zm, &gz))
            }
        };

        match direction {
            None => {
                // Stationary on the working set: check multipliers.
                if working.is_empty() {
                    return Ok(x.iter().copied().collect());
                }
                let aw = DMatrix::from_fn(working.len(), n, |r, col| rows.a[working[r]][col]);
                let gram = &aw * aw.transpose();
                let rhs = -(&aw * &g);
                let lambda = gram
                    .clone()
                    .cholesky()
                    .map(|ch| ch.solve(&rhs))
                    .or_else(|| gram.lu().solve(&rhs))
                    .ok_or_else(|| SolverError::NonFinite("working-set multipliers".into()))?;
                let drop = working
                    .iter()
                    .enumerate()
                    .filter(|&(_, &row)| !rows.eq[row])
                    .map(|(k, _)| (k, lambda[k]))
                    .filter(|&(_, l)| l < -1e-9 * scale)
                    .fold(None::<(usize, f64)>, |acc, (k, l)| match acc {
                        Some((_, bl)) if bl <= l => acc,
                        _ => Some((k, l)),
                    });
                match drop {
                    None => return Ok(x.iter().copied().collect()),
                    Some((k, _)) => {
                        working.remove(k);
                    }
                }
            }
            Some((step, is_ray)) => {
                let mut alpha = if is_ray { f64::INFINITY } else { 1.0 };
                let mut blocking = None;
                for i in 0..rows.len() {
                    if rows.eq[i] || working.contains(&i) {
                        continue;
                    }
                    let ap = rows.a[i].dot(&step);
                    if ap <= 1e-12 {
                        continue;
                    }
                    let slack = (rows.b[i] - rows.a[i].dot(&x)).max(0.0);
                    let t = slack / ap;
                    if t < alpha {
                        alpha = t;
                        blocking = Some(i);
                    }
                }
                if alpha.is_infinite() {
                    return Err(SolverError::Unbounded);
                }
                x += &step * alpha;
                if let Some(i) = blocking {
                    working.push(i);
                }
            }
        }
    }
    Err(SolverError::IterationLimit(max_iter))
}

/// Step within the null space of the working set. Returns the step and
/// whether it is a zero-curvature ray (to be scaled by the ratio test).
fn reduced_step(h: &DMatrix<f64>, z: &DMatrix<f64>, gz: &DVector<f64>) -> (DVector<f64>, bool) {
    let m = z.transpose() * h * z;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let lmax = eig.eigenvalues.amax().max(1.0);
    let w = eig.eigenvectors.transpose() * gz;
    let r = w.len();
    let flat: Vec<usize> = (0..r).filter(|&k| eig.eigenvalues[k] <= 1e-9 * lmax).collect();
    let gnorm = gz.amax();
    if flat.iter().any(|&k| w[k].abs() > 1e-9 * gnorm.max(1e-12)) {
        let mut d = DVector::zeros(r);
        for &k in &flat {
            d -= eig.eigenvectors.column(k) * w[k];
        }
        // Rays are searched to the first blocking row, so only the
        // direction matters; unit length keeps the blocking test meaningful.
        let d = z * d;
        let norm = d.norm();
        return (d / norm, true);
    }
    let mut d = DVector::zeros(r);
    for k in 0..r {
        let lam = eig.eigenvalues[k];
        if lam > 1e-9 * lmax {
            d -= eig.eigenvectors.column(k) * (w[k] / lam);
        }
    }
    (z * d, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn active_lower_bound() {
        let mut p = QpProblem::new(DMatrix::from_element(1, 1, 2.0), vec![0.0]);
        p.add_constraint(vec![1.0], Comparison::Ge, 3.0);
        let s = solve_qp(&p).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(s.x[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.objective, 9.0, epsilon = 1e-9);
    }

    #[test]
    fn equality_projection() {
        // (x-1)² + (y-1)² = x² + y² - 2x - 2y + 2
        let mut p = QpProblem::new(DMatrix::identity(2, 2) * 2.0, vec![-2.0, -2.0]);
        p.add_constraint(vec![1.0, 1.0], Comparison::Eq, 1.0);
        let s = solve_qp(&p).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn unconstrained_norm() {
        let p = QpProblem::new(DMatrix::identity(4, 4) * 2.0, vec![0.0; 4]);
        let s = solve_qp(&p).unwrap().optimal().unwrap();
        assert!(s.x.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn semidefinite_ray_to_bound() {
        // min x² - y with y <= 4: zero curvature in y.
        let mut h = DMatrix::zeros(2, 2);
        h[(0, 0)] = 2.0;
        let mut p = QpProblem::new(h, vec![0.0, -1.0]);
        p.set_bounds(1, f64::NEG_INFINITY, 4.0);
        let s = solve_qp(&p).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(s.x[1], 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.objective, -4.0, epsilon = 1e-9);
    }

    #[test]
    fn unbounded_linear_direction() {
        let p = QpProblem::new(DMatrix::zeros(1, 1), vec![1.0]);
        assert_eq!(solve_qp(&p), Err(SolverError::Unbounded));
    }

    #[test]
    fn rejects_indefinite() {
        let mut h = DMatrix::identity(2, 2);
        h[(1, 1)] = -1.0;
        let p = QpProblem::new(h, vec![0.0, 0.0]);
        assert!(matches!(solve_qp(&p), Err(SolverError::NotConvex(_))));
    }

    #[test]
    fn infeasible_rows() {
        let mut p = QpProblem::new(DMatrix::identity(1, 1), vec![0.0]);
        p.add_constraint(vec![1.0], Comparison::Ge, 2.0);
        p.add_constraint(vec![1.0], Comparison::Le, 1.0);
        assert_eq!(solve_qp(&p).unwrap(), QpOutcome::Infeasible);
    }

    #[test]
    fn warm_start_matches_cold() {
        let mut p = QpProblem::new(DMatrix::identity(2, 2) * 2.0, vec![-4.0, -6.0]);
        p.add_constraint(vec![1.0, 1.0], Comparison::Le, 2.0);
        p.set_bounds(0, 0.0, f64::INFINITY);
        p.set_bounds(1, 0.0, f64::INFINITY);
        let cold = solve_qp(&p).unwrap().optimal().unwrap();
        let warm = solve_qp_from(&p, Some(&[0.0, 0.0])).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(cold.x[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(cold.x[1], 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(warm.x[0], cold.x[0], epsilon = 1e-9);
        assert_abs_diff_eq!(warm.x[1], cold.x[1], epsilon = 1e-9);
    }
}
