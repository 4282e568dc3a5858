#![allow(dead_code)]

use imlca_core::{Bundle, IntervalReport, ReportSet, TableValuation};

pub const A: u64 = 0b01;
pub const B: u64 = 0b10;
pub const AB: u64 = 0b11;

pub fn bundle(mask: u64, m: usize) -> Bundle {
    Bundle::from_mask(mask, m).unwrap()
}

pub fn f1_values() -> Vec<TableValuation> {
    vec![
        TableValuation::new(2, vec![0.0, 10.0, 4.0, 20.0]).unwrap(),
        TableValuation::new(2, vec![0.0, 6.0, 8.0, 12.0]).unwrap(),
    ]
}

pub fn reports(bidder: usize, m: usize, rows: &[(u64, f64, f64)]) -> ReportSet {
    let mut r = ReportSet::new(bidder, m);
    for &(mask, lo, hi) in rows {
        r.insert(IntervalReport::new(bundle(mask, m), lo, hi).unwrap()).unwrap();
    }
    r
}

/// Interval reports of the two-item fixture.
pub fn f1_r() -> Vec<ReportSet> {
    vec![
        reports(0, 2, &[(AB, 15.0, 25.0), (A, 8.0, 12.0)]),
        reports(1, 2, &[(AB, 10.0, 14.0), (B, 6.0, 9.0)]),
    ]
}

/// Exact reports of every bundle at the fixture's true values.
pub fn f1_exact() -> Vec<ReportSet> {
    vec![
        reports(0, 2, &[(A, 10.0, 10.0), (B, 4.0, 4.0), (AB, 20.0, 20.0)]),
        reports(1, 2, &[(A, 6.0, 6.0), (B, 8.0, 8.0), (AB, 12.0, 12.0)]),
    ]
}

pub mod gen {
    use imlca_core::{Bundle, IntervalReport, ReportSet, TableValuation, Valuation};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub struct Instance {
        pub values: Vec<TableValuation>,
        pub profile: Vec<ReportSet>,
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Item values in [1, 10] with a per-bidder synergy in [-0.1, 0.3].
    pub fn values(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<TableValuation> {
        (0..n)
            .map(|_| {
                let base: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..10.0)).collect();
                let syn: f64 = rng.random_range(-0.1..0.3);
                TableValuation::from_fn(m, |b| {
                    let s: f64 = b.items().map(|j| base[j]).sum();
                    s * (1.0 + syn * (b.len().saturating_sub(1)) as f64)
                })
                .unwrap()
            })
            .collect()
    }

    /// Values of the form `Σ w_j x_j + Σ c_jk x_j x_k` with `c ≥ 0`.
    pub fn pairwise_values(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<TableValuation> {
        (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..10.0)).collect();
                let c: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| rng.random_range(0.0..3.0)).collect()).collect();
                TableValuation::from_fn(m, |b| {
                    let items: Vec<usize> = b.items().collect();
                    let mut v: f64 = items.iter().map(|&j| w[j]).sum();
                    for (p, &j) in items.iter().enumerate() {
                        for &k in &items[p + 1..] {
                            v += c[j][k];
                        }
                    }
                    v
                })
                .unwrap()
            })
            .collect()
    }

    /// Interval around `v` of relative half-widths drawn from `[0, width]`;
    /// exact with probability 1/4.
    pub fn interval(rng: &mut ChaCha8Rng, v: f64, width: f64) -> (f64, f64) {
        if rng.random_bool(0.25) {
            return (v, v);
        }
        let lo = (v - rng.random_range(0.0..=width) * v).max(0.0);
        let hi = v + rng.random_range(0.0..=width) * v;
        (lo, hi)
    }

    pub fn reports(rng: &mut ChaCha8Rng, values: &[TableValuation], per_bidder: usize, width: f64) -> Vec<ReportSet> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let m = v.num_items();
                let mut masks: Vec<u64> = (1..1u64 << m).collect();
                masks.shuffle(rng);
                let mut r = ReportSet::new(i, m);
                for &mask in masks.iter().take(per_bidder) {
                    let b = Bundle::from_mask(mask, m).unwrap();
                    let (lo, hi) = interval(rng, v.value(&b), width);
                    r.insert(IntervalReport::new(b, lo, hi).unwrap()).unwrap();
                }
                r
            })
            .collect()
    }

    pub fn instance(seed: u64, n: usize, m: usize, per_bidder: usize, width: f64) -> Instance {
        let mut rng = rng(seed);
        let values = values(&mut rng, n, m);
        let profile = reports(&mut rng, &values, per_bidder, width);
        Instance { values, profile }
    }

    /// Exact reports of every bundle.
    pub fn full_exact(values: &[TableValuation]) -> Vec<ReportSet> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let m = v.num_items();
                let mut r = ReportSet::new(i, m);
                for mask in 1..1u64 << m {
                    let b = Bundle::from_mask(mask, m).unwrap();
                    r.insert(IntervalReport::exact(b, v.value(&b)).unwrap()).unwrap();
                }
                r
            })
            .collect()
    }

    /// Best welfare over all assignments of the whole bundle space.
    pub fn brute_optimum(values: &[TableValuation]) -> f64 {
        fn go(values: &[TableValuation], i: usize, used: u64) -> f64 {
            if i == values.len() {
                return 0.0;
            }
            let m = values[i].num_items();
            let free = !used & ((1u64 << m) - 1);
            let mut best = f64::NEG_INFINITY;
            let mut sub = free;
            loop {
                let b = Bundle::from_mask(sub, m).unwrap();
                best = best.max(values[i].value(&b) + go(values, i + 1, used | sub));
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & free;
            }
            best
        }
        go(values, 0, 0)
    }
}
