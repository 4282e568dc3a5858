mod common;

use common::gen;
use imlca_core::pricing::{default_shift, Stage};
use imlca_core::{
    approx_clearing_prices, effort_reduction_prices, is_clearing, perturbed_view, provisional_allocation, unique_prices,
    wdp_reports, Allocation, Bundle, Economy, LinearPrices, ReportSet, ValuationView,
};
use proptest::prelude::*;
use rand::Rng;

/// `v̂(x) − π(x) − (v̂(a_i) − π(a_i))` for every report, in report order.
fn gaps(view: &ValuationView, profile: &[ReportSet], a: &Allocation, prices: &LinearPrices) -> Vec<Vec<f64>> {
    profile
        .iter()
        .zip(a.bundles())
        .map(|(r, ai)| {
            let base = view.value(r, ai).unwrap() - prices.price(ai);
            r.iter().map(|x| view.value(r, &x.bundle).unwrap() - prices.price(&x.bundle) - base).collect()
        })
        .collect()
}

fn max_gap(g: &[Vec<f64>]) -> f64 {
    g.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn stage_objective(stages: &[imlca_core::pricing::StageRecord], stage: Stage) -> Option<f64> {
    stages.iter().find(|s| s.stage == stage).map(|s| s.objective)
}

fn assert_unallocated_zero(prices: &LinearPrices, a: &Allocation) {
    let used = a.allocated_mask();
    for (j, &p) in prices.per_item().iter().enumerate() {
        if used >> j & 1 == 0 {
            assert_eq!(p.to_bits(), 0.0f64.to_bits(), "item {j} unallocated but priced {p}");
        }
        assert!(p >= 0.0);
    }
}

fn setup(seed: u64, n: usize, m: usize, k: usize, alpha: f64) -> (Vec<ReportSet>, ValuationView, Allocation) {
    let inst = gen::instance(seed, n, m, k, 0.4);
    let (view, a) = provisional_allocation(&inst.profile, alpha).unwrap();
    (inst.profile, view, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn approx_clearing_is_minimax(seed in any::<u64>(), n in 1usize..=3, m in 2usize..=4, k in 1usize..=4,
                                  alpha in prop::sample::select(vec![0.0, 0.5, 1.0])) {
        let (profile, view, a) = setup(seed, n, m, k, alpha);
        let sol = approx_clearing_prices(&view, &a, &profile).unwrap();
        assert_unallocated_zero(&sol.prices, &a);
        let star = stage_objective(&sol.stages, Stage::MinMaxDelta).unwrap();
        // The allocated bundle's own row pins the largest gap at zero or above.
        prop_assert!(star >= -1e-9);
        prop_assert!(sol.max_delta >= -1e-9);
        let g = gaps(&view, &profile, &a, &sol.prices);
        prop_assert!((max_gap(&g) - sol.max_delta).abs() <= 1e-6);
        prop_assert!(sol.max_delta <= star + 1e-6);
        for (gi, di) in g.iter().zip(&sol.delta) {
            for (x, y) in gi.iter().zip(di) {
                prop_assert!(x - y <= 1e-6, "reported delta {y} below gap {x}");
            }
        }
        // No sampled price vector beats the optimum.
        let mut rng = gen::rng(seed ^ 0x5eed);
        let scale = profile.iter().flat_map(|r| r.iter().map(|x| x.upper)).fold(1.0, f64::max);
        for _ in 0..50 {
            let per: Vec<f64> = (0..m)
                .map(|j| if a.allocated_mask() >> j & 1 == 1 { rng.random_range(0.0..scale) } else { 0.0 })
                .collect();
            let p = LinearPrices::new(per).unwrap();
            prop_assert!(max_gap(&gaps(&view, &profile, &a, &p)) >= star - 1e-6);
        }
    }

    #[test]
    fn unique_prices_keep_stage_constraints(seed in any::<u64>(), n in 1usize..=3, m in 2usize..=4, k in 1usize..=4,
                                            alpha in prop::sample::select(vec![0.0, 0.5, 1.0])) {
        let (profile, view, a) = setup(seed, n, m, k, alpha);
        let sol = unique_prices(&profile, alpha, &a).unwrap();
        assert_unallocated_zero(&sol.prices, &a);
        let star = stage_objective(&sol.stages, Stage::MinMaxDelta).unwrap();
        let g = gaps(&view, &profile, &a, &sol.prices);
        prop_assert!(max_gap(&g) <= star.max(0.0) + 1e-6);
        if let Some(count) = stage_objective(&sol.stages, Stage::MinPositiveCount) {
            if sol.stages.iter().all(|s| s.proven_optimal) {
                prop_assert!(sol.positive_count as f64 <= count + 1e-9);
            }
        }
        let approx = approx_clearing_prices(&view, &a, &profile).unwrap();
        prop_assert!((approx.max_delta - star).abs() <= 1e-6);
    }

    #[test]
    fn effort_reduction_prices_are_sound(seed in any::<u64>(), n in 1usize..=3, m in 2usize..=4, k in 1usize..=4,
                                         alpha in prop::sample::select(vec![0.0, 0.5, 1.0])) {
        let (profile, _, a) = setup(seed, n, m, k, alpha);
        let shift = default_shift(&profile);
        let sol = effort_reduction_prices(&profile, alpha, &a, shift).unwrap();
        assert_unallocated_zero(&sol.prices, &a);
        let tilde = perturbed_view(&profile, &a).unwrap();
        let g = gaps(&tilde, &profile, &a, &sol.prices);
        for (i, (r, ai)) in profile.iter().zip(a.bundles()).enumerate() {
            let lower_a = r.lower(ai).unwrap() - sol.prices.price(ai);
            for (k, x) in r.iter().enumerate() {
                let d = sol.delta[i][k];
                prop_assert!((d - g[i][k].max(-shift)).abs() <= 1e-6);
                if d <= 0.0 && x.bundle != *ai {
                    prop_assert!(lower_a >= x.upper - sol.prices.price(&x.bundle) - 1e-6,
                        "bidder {i} report {k}: ignorable but not dominated");
                }
            }
        }
    }

    #[test]
    fn scaling_keeps_unallocated_prices_zero(seed in any::<u64>(), c in 0.1f64..10.0) {
        let (profile, view, a) = setup(seed, 2, 3, 3, 0.5);
        let scaled: Vec<ReportSet> = profile
            .iter()
            .map(|r| {
                let mut s = ReportSet::new(r.bidder(), r.num_items());
                for x in r.iter().skip(1) {
                    s.insert(imlca_core::IntervalReport::new(x.bundle, c * x.lower, c * x.upper).unwrap()).unwrap();
                }
                s
            })
            .collect();
        let sol = approx_clearing_prices(&view, &a, &profile).unwrap();
        let scaled_sol = approx_clearing_prices(&view, &a, &scaled).unwrap();
        assert_unallocated_zero(&scaled_sol.prices, &a);
        prop_assert!((scaled_sol.max_delta - c * sol.max_delta).abs() <= 1e-6 * c.max(1.0) * 10.0);
    }
}

/// Additive bidders reporting every bundle exactly admit item prices that
/// clear the efficient allocation.
#[test]
fn additive_exact_instances_clear() {
    for seed in 0..50u64 {
        let mut rng = gen::rng(seed);
        let n = rng.random_range(2..=4);
        let m = rng.random_range(2..=4);
        let w: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(1.0..20.0)).collect()).collect();
        let values: Vec<_> = w
            .iter()
            .map(|wi| imlca_core::TableValuation::from_fn(m, |b| b.items().map(|j| wi[j]).sum()).unwrap())
            .collect();
        let profile = gen::full_exact(&values);
        let view = ValuationView::Lower;
        let (a, value) = wdp_reports(&view, &profile, Economy::Main).unwrap();
        assert!((value - gen::brute_optimum(&values)).abs() <= 1e-9);
        let sol = approx_clearing_prices(&view, &a, &profile).unwrap();
        assert!(sol.max_delta <= 1e-6, "seed {seed}: max delta {}", sol.max_delta);
        assert_eq!(sol.positive_count, 0);
        assert!(is_clearing(&sol.prices, &a, &view, &profile).unwrap(), "seed {seed}");
    }
}

/// Zero prices on an allocation giving every bidder its best report clear
/// demand, so the minimax gap is zero.
#[test]
fn clearing_candidate_bounds_delta() {
    for seed in 0..40u64 {
        let mut rng = gen::rng(seed);
        let m = 4;
        // Each bidder only reports bundles inside its own item.
        let values = gen::values(&mut rng, 2, m);
        let mut profile = vec![ReportSet::new(0, m), ReportSet::new(1, m)];
        for (i, r) in profile.iter_mut().enumerate() {
            for mask in [0b0011u64 << (2 * i), 0b0001 << (2 * i)] {
                let b = Bundle::from_mask(mask, m).unwrap();
                let v = imlca_core::Valuation::value(&values[i], &b);
                r.insert(imlca_core::IntervalReport::exact(b, v).unwrap()).unwrap();
            }
        }
        let view = ValuationView::Lower;
        let (a, _) = wdp_reports(&view, &profile, Economy::Main).unwrap();
        let zero = LinearPrices::zeros(m);
        if is_clearing(&zero, &a, &view, &profile).unwrap() {
            let sol = approx_clearing_prices(&view, &a, &profile).unwrap();
            assert!(sol.max_delta <= 1e-6);
            assert_eq!(sol.positive_count, 0);
        }
    }
}
