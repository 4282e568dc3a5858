//! Winner determination: pick one candidate bundle per bidder so that no item
//! is used twice and the total weight is maximal.
//!
//! Depth-first branch and bound over bidders in order, candidates in the
//! order given. Only strict improvements replace the incumbent, so among
//! optimal selections the lexicographically smallest index vector wins.

use std::time::Instant;

use crate::{Result, SolverError};

const IMPROVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdpCandidate {
    /// Item bitmask.
    pub items: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WdpProblem {
    pub num_items: usize,
    pub bidders: Vec<Vec<WdpCandidate>>,
}

#[derive(Debug, Clone, Default)]
pub struct WdpOptions {
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WdpSolution {
    /// Candidate index chosen for each bidder.
    pub selection: Vec<usize>,
    pub value: f64,
    /// False if the deadline cut the search short.
    pub optimal: bool,
}

pub fn solve_wdp(p: &WdpProblem) -> Result<WdpSolution> {
    solve_wdp_with(p, &WdpOptions::default())
}

pub fn solve_wdp_with(p: &WdpProblem, opts: &WdpOptions) -> Result<WdpSolution> {
    if p.num_items > 64 {
        return Err(SolverError::TooLarge(format!("{} items", p.num_items)));
    }
    let all = if p.num_items == 64 {
        u64::MAX
    } else {
        (1u64 << p.num_items) - 1
    };
    let mut start = Vec::with_capacity(p.bidders.len());
    for (i, cands) in p.bidders.iter().enumerate() {
        let mut empty = None;
        for (k, c) in cands.iter().enumerate() {
            if c.items & !all != 0 {
                return Err(SolverError::Dimension(format!(
                    "bidder {i} candidate {k} uses items beyond {}",
                    p.num_items
                )));
            }
            if !c.weight.is_finite() {
                return Err(SolverError::NonFinite(format!("bidder {i} candidate {k}")));
            }
            if c.items == 0 && empty.is_none() {
                empty = Some(k);
            }
        }
        start.push(empty.ok_or(SolverError::MissingEmptyCandidate(i))?);
    }

    // Search from scratch: seeding with the all-empty selection would let it
    // win ties against lexicographically smaller optima.
    let mut search = Search {
        p,
        opts,
        best_value: f64::NEG_INFINITY,
        best: start,
        current: vec![0; p.bidders.len()],
        nodes: 0,
        timed_out: false,
    };
    search.dfs(0, 0, 0.0);
    if search.best_value == f64::NEG_INFINITY {
        // Deadline hit before the first leaf; the all-empty selection stands.
        search.best_value = search
            .best
            .iter()
            .enumerate()
            .map(|(i, &k)| p.bidders[i][k].weight)
            .sum();
    }
    Ok(WdpSolution {
        selection: search.best,
        value: search.best_value,
        optimal: !search.timed_out,
    })
}

struct Search<'a> {
    p: &'a WdpProblem,
    opts: &'a WdpOptions,
    best: Vec<usize>,
    best_value: f64,
    current: Vec<usize>,
    nodes: usize,
    timed_out: bool,
}

impl Search<'_> {
    fn bound(&self, bidder: usize, used: u64) -> f64 {
        self.p.bidders[bidder..]
            .iter()
            .map(|cands| {
                cands
                    .iter()
                    .filter(|c| c.items & used == 0)
                    .map(|c| c.weight)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum()
    }

    fn dfs(&mut self, bidder: usize, used: u64, value: f64) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % 4096 == 0 && self.opts.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
            return;
        }
        if bidder == self.p.bidders.len() {
            if value > self.best_value + IMPROVE_TOL {
                self.best_value = value;
                self.best.clone_from(&self.current);
            }
            return;
        }
        if value + self.bound(bidder, used) <= self.best_value + IMPROVE_TOL {
            return;
        }
        for (k, c) in self.p.bidders[bidder].iter().enumerate() {
            if c.items & used != 0 {
                continue;
            }
            self.current[bidder] = k;
            self.dfs(bidder + 1, used | c.items, value + c.weight);
        }
    }
}
