//! Depth-first branch and bound over an [`LpProblem`] with some integer
//! variables.

use std::time::Instant;

use std::rc::Rc;

use crate::lp::{Comparison, LpOutcome, LpProblem, Sense, WarmLp};
use crate::Result;

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub node_limit: usize,
    pub deadline: Option<Instant>,
    /// Objective takes integer values at every integer-feasible point, so a
    /// node can be pruned once its rounded bound cannot beat the incumbent.
    pub integral_objective: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
            deadline: None,
            integral_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// False when the search stopped early on the node limit or deadline.
    pub proven_optimal: bool,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MilpOutcome {
    Optimal(MilpSolution),
    Infeasible,
    Unbounded,
}

impl MilpOutcome {
    pub fn solution(self) -> Option<MilpSolution> {
        match self {
            MilpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

struct Warm {
    lp: Rc<WarmLp>,
    var: usize,
    cmp: Comparison,
    value: f64,
}

struct Pending {
    bounds: Vec<(f64, f64)>,
    warm: Option<Warm>,
}

/// Re-optimizes the parent's tableau with the child's extra bound. `None`
/// asks for a cold solve: the warm path failed numerically or its answer
/// does not check out against the node problem.
fn resolve_warm(node: &LpProblem, w: &Warm, scale: f64) -> Option<(LpOutcome, Option<WarmLp>)> {
    let mut lp = (*w.lp).clone();
    let mut coeffs = vec![0.0; node.num_vars()];
    coeffs[w.var] = 1.0;
    match lp.add_constraint(&coeffs, w.cmp, w.value) {
        Ok(true) => {
            let sol = lp.solution();
            (node.max_violation(&sol.x) <= 1e-7 * scale).then(|| (LpOutcome::Optimal(sol), Some(lp)))
        }
        Ok(false) => Some((LpOutcome::Infeasible, None)),
        Err(_) => None,
    }
}

/// Callback invoked with every node's relaxation solution; may return an
/// integer-feasible point and its objective.
pub type Heuristic<'a> = dyn FnMut(&[f64]) -> Option<(Vec<f64>, f64)> + 'a;

pub fn solve_milp(p: &LpProblem, integers: &[usize]) -> Result<MilpOutcome> {
    solve_milp_with(p, integers, &MilpOptions::default(), None, None)
}

pub fn solve_milp_with(
    p: &LpProblem,
    integers: &[usize],
    opts: &MilpOptions,
    incumbent: Option<(Vec<f64>, f64)>,
    mut heuristic: Option<&mut Heuristic<'_>>,
) -> Result<MilpOutcome> {
    p.validate()?;
    // Internally everything is a minimization.
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut best: Option<(Vec<f64>, f64)> = incumbent.map(|(x, v)| (x, sign * v));

    let can_prune = |bound: f64, best: &Option<(Vec<f64>, f64)>| -> bool {
        let Some((_, incumbent)) = best else {
            return false;
        };
        if opts.integral_objective {
            (bound - 1e-6).ceil() >= incumbent - 1e-9
        } else {
            bound >= incumbent - 1e-9
        }
    };

    // Each pending node carries its bounds and, when available, the parent's
    // optimal tableau plus the one bound that differs from it.
    let mut stack: Vec<Pending> = vec![Pending {
        bounds: p.bounds.clone(),
        warm: None,
    }];
    let mut nodes = 0usize;
    let mut complete = true;
    let mut node = p.clone();
    let scale = p.constraints.iter().map(|c| c.rhs.abs()).fold(1.0, f64::max);

    while let Some(Pending { bounds, warm }) = stack.pop() {
        if nodes >= opts.node_limit || opts.deadline.is_some_and(|d| Instant::now() >= d) {
            complete = false;
            break;
        }
        nodes += 1;
        node.bounds = bounds;
        let (outcome, lp) = match warm.and_then(|w| resolve_warm(&node, &w, scale)) {
            Some(done) => done,
            None => WarmLp::solve(&node)?,
        };
        let sol = match outcome {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                if nodes == 1 {
                    return Ok(MilpOutcome::Unbounded);
                }
                continue;
            }
        };
        let bound = sign * sol.objective;
        if can_prune(bound, &best) {
            continue;
        }
        if let Some(h) = heuristic.as_mut() {
            if let Some((x, v)) = h(&sol.x) {
                let v = sign * v;
                if best.as_ref().is_none_or(|(_, b)| v < *b - 1e-9) {
                    best = Some((x, v));
                }
                if can_prune(bound, &best) {
                    continue;
                }
            }
        }

        let branch = integers
            .iter()
            .copied()
            .map(|j| {
                let v = sol.x[j];
                (j, (v - v.floor()).min(v.ceil() - v))
            })
            .filter(|&(_, frac)| frac > INT_TOL)
            .fold(None::<(usize, f64)>, |acc, (j, f)| match acc {
                Some((_, bf)) if bf >= f => acc,
                _ => Some((j, f)),
            });

        match branch {
            None => {
                let mut x = sol.x.clone();
                for &j in integers {
                    x[j] = x[j].round();
                }
                if best.as_ref().is_none_or(|(_, b)| bound < *b - 1e-9) {
                    best = Some((x, bound));
                }
            }
            Some((j, _)) => {
                let v = sol.x[j];
                let (lo, hi) = node.bounds[j];
                let parent = lp.map(Rc::new);
                let (ceil, floor) = (v.ceil().max(lo), v.floor().min(hi));
                let mut up = node.bounds.clone();
                up[j] = (ceil, hi);
                let mut down = node.bounds.clone();
                down[j] = (lo, floor);
                stack.push(Pending {
                    bounds: up,
                    warm: parent.clone().map(|lp| Warm { lp, var: j, cmp: Comparison::Ge, value: ceil }),
                });
                stack.push(Pending {
                    bounds: down,
                    warm: parent.map(|lp| Warm { lp, var: j, cmp: Comparison::Le, value: floor }),
                });
            }
        }
    }

    Ok(match best {
        Some((x, v)) => MilpOutcome::Optimal(MilpSolution {
            x,
            objective: sign * v,
            proven_optimal: complete,
            nodes,
        }),
        None if complete => MilpOutcome::Infeasible,
        // Stopped before finding anything: report as infeasible would be a lie.
        None => return Err(crate::SolverError::IterationLimit(nodes)),
    })
}
