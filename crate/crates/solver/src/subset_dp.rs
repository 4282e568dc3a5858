//! Exact welfare maximization when every bidder has a value for every bundle.
//!
//! Dynamic programming over subsets of the still-available items, in
//! `O(n · 3^m)` time. Used where values are defined on the whole bundle
//! space (learned models, true valuations) rather than on a short list of
//! reported bundles.

use crate::{Result, SolverError};

pub const MAX_ITEMS: usize = 16;

/// Position of `mask` in the lexicographic order of indicator vectors
/// `(x_1, …, x_m)`, where item 0 is `x_1`.
pub fn indicator_order_key(mask: u64, num_items: usize) -> u64 {
    if num_items == 0 {
        return 0;
    }
    mask.reverse_bits() >> (64 - num_items)
}

/// `values[i][mask]` is bidder `i`'s value for bundle `mask`; use
/// `f64::NEG_INFINITY` to forbid a bundle. Returns one bundle per bidder and
/// the total value, or `None` if every assignment uses a forbidden bundle.
///
/// Among optimal assignments the result is the one whose bundles, bidder by
/// bidder, come first in indicator order.
pub fn max_welfare_assignment(num_items: usize, values: &[Vec<f64>]) -> Result<Option<(Vec<u64>, f64)>> {
    if num_items > MAX_ITEMS {
        return Err(SolverError::TooLarge(format!(
            "{num_items} items (limit {MAX_ITEMS})"
        )));
    }
    let size = 1usize << num_items;
    for (i, v) in values.iter().enumerate() {
        if v.len() != size {
            return Err(SolverError::Dimension(format!(
                "bidder {i} has {} values, expected {size}",
                v.len()
            )));
        }
        if v.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(SolverError::NonFinite(format!("values of bidder {i}")));
        }
    }
    let n = values.len();
    let full = size - 1;

    // best[i][s]: max value of bidders i.. using only items in s.
    let mut best = vec![vec![0.0f64; size]; n + 1];
    for i in (0..n).rev() {
        let (head, tail) = best.split_at_mut(i + 1);
        let next = &tail[0];
        let cur = &mut head[i];
        let vi = &values[i];
        for s in 0..size {
            let mut m = f64::NEG_INFINITY;
            let mut t = s;
            loop {
                let v = vi[t];
                if v != f64::NEG_INFINITY {
                    let total = v + next[s & !t];
                    if total > m {
                        m = total;
                    }
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
            cur[s] = m;
        }
    }

    let total = best[0][full];
    if total == f64::NEG_INFINITY {
        return Ok(None);
    }

    let mut bundles = Vec::with_capacity(n);
    let mut avail = full;
    for i in 0..n {
        let target = best[i][avail];
        let tol = 1e-9 * target.abs().max(1.0);
        let mut pick: Option<usize> = None;
        let mut t = avail;
        loop {
            let v = values[i][t];
            if v != f64::NEG_INFINITY {
                let rest = best[i + 1][avail & !t];
                if v + rest >= target - tol
                    && pick.is_none_or(|p| {
                        indicator_order_key(t as u64, num_items) < indicator_order_key(p as u64, num_items)
                    })
                {
                    pick = Some(t);
                }
            }
            if t == 0 {
                break;
            }
            t = (t - 1) & avail;
        }
        let t = pick.expect("dp value is attained");
        bundles.push(t as u64);
        avail &= !t;
    }
    let value = bundles
        .iter()
        .enumerate()
        .map(|(i, &b)| values[i][b as usize])
        .sum();
    Ok(Some((bundles, value)))
}
