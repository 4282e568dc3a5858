mod common;

use common::gen;
use imlca_core::ml::{economy_queries, generate_round_queries, QueryParams};
use imlca_core::{
    fit_interval_model, learned_allocation, next_query, total_true_value, Bundle, Economy, IntervalReport,
    KernelParams, ReportSet, Valuation,
};
use proptest::prelude::*;
use rand::Rng;

fn zero_function_slack(r: &ReportSet) -> f64 {
    r.iter().skip(1).map(|x| x.lower.max(0.0)).sum()
}

fn random_profile(seed: u64, n: usize, m: usize, k: usize) -> Vec<ReportSet> {
    gen::instance(seed, n, m, k, 0.4).profile
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_beats_zero_function(seed in any::<u64>(), m in 2usize..=5, k in 1usize..=10,
                               c in prop::sample::select(vec![1.0, 100.0, 1e4])) {
        let r = &random_profile(seed, 1, m, k)[0];
        let model = fit_interval_model(r, KernelParams { offset: 1.0, regularization: c }).unwrap();
        let zero = zero_function_slack(r);
        prop_assert!(model.training_slack(r) <= zero + 1e-6 * zero.max(1.0));
        prop_assert!(model.objective() <= c * zero + 1e-6 * (c * zero).max(1.0));
    }

    #[test]
    fn extra_report_costs_at_most_its_own_slack(seed in any::<u64>(), m in 3usize..=5, k in 1usize..=6) {
        let params = KernelParams::default();
        let mut rng = gen::rng(seed);
        let values = gen::values(&mut rng, 1, m);
        let mut r = gen::reports(&mut rng, &values, k, 0.4).remove(0);
        let before = fit_interval_model(&r, params).unwrap();
        let fresh = (1..1u64 << m)
            .map(|mask| Bundle::from_mask(mask, m).unwrap())
            .find(|b| !r.contains(b));
        prop_assume!(fresh.is_some());
        let b = fresh.unwrap();
        let (lo, hi) = gen::interval(&mut rng, values[0].value(&b), 0.4);
        r.insert(IntervalReport::new(b, lo, hi).unwrap()).unwrap();
        let f = before.raw(&b);
        let standalone = params.regularization * ((f - hi).max(0.0) + (lo - f).max(0.0));
        let after = fit_interval_model(&r, params).unwrap();
        prop_assert!(after.objective() <= before.objective() + standalone + 1e-6 * before.objective().max(1.0));
    }

    #[test]
    fn queries_are_feasible_and_new(seed in any::<u64>(), n in 1usize..=4, m in 2usize..=5, k in 1usize..=4,
                                    econ in 0usize..5) {
        prop_assume!(k + 1 < 1 << m);
        let profile = random_profile(seed, n, m, k);
        let models: Vec<_> = profile.iter().map(|r| fit_interval_model(r, KernelParams::default()).unwrap()).collect();
        let economy = if econ == 0 || econ > n { Economy::Main } else { Economy::Marginal(econ - 1) };
        let q = next_query(&models, &profile, economy).unwrap();
        let mut used = 0u64;
        for (i, b) in q.iter().enumerate() {
            match b {
                Some(b) => {
                    prop_assert!(economy.includes(i));
                    prop_assert!(!b.is_empty() && !profile[i].contains(b));
                }
                None => prop_assert!(!economy.includes(i)),
            }
        }
        // The unconstrained maximizer itself is a feasible allocation.
        let (a, _) = learned_allocation(&models, economy).unwrap();
        for (i, b) in a.bundles().iter().enumerate() {
            prop_assert!(used & b.mask() == 0);
            used |= b.mask();
            if !economy.includes(i) {
                prop_assert!(b.is_empty());
            }
        }
    }

    #[test]
    fn round_plan_respects_caps(seed in any::<u64>(), n in 1usize..=4, m in 3usize..=5, k in 1usize..=4,
                                per_round in 1usize..=5, max_reports in 1usize..=8, round in 0usize..10) {
        let profile = random_profile(seed, n, m, k);
        let mut frozen = vec![false; n];
        frozen[seed as usize % n] = seed % 3 == 0;
        let params = QueryParams { kernel: KernelParams::default(), per_round, max_reports, round, frozen: frozen.clone() };
        let plan = generate_round_queries(&profile, &params).unwrap();
        for (i, qs) in plan.bundles.iter().enumerate() {
            let budget = per_round.min(max_reports.saturating_sub(profile[i].num_queried()));
            prop_assert!(qs.len() <= budget);
            prop_assert!(qs.len() <= n);
            if frozen[i] {
                prop_assert!(qs.is_empty());
            }
            for (p, b) in qs.iter().enumerate() {
                prop_assert!(!b.is_empty() && !profile[i].contains(b));
                prop_assert!(!qs[..p].contains(b));
            }
        }
    }
}

/// With every bundle reported exactly and values the kernel can represent,
/// the learned maximizer is efficient.
#[test]
fn exact_labels_recover_the_efficient_allocation() {
    let params = KernelParams {
        offset: 1.0,
        regularization: 1e5,
    };
    for seed in 0..30u64 {
        let mut rng = gen::rng(seed);
        let n = rng.random_range(2..=3);
        let m = rng.random_range(2..=4);
        let values = gen::pairwise_values(&mut rng, n, m);
        let profile = gen::full_exact(&values);
        let models: Vec<_> = profile.iter().map(|r| fit_interval_model(r, params).unwrap()).collect();
        for (model, v) in models.iter().zip(&values) {
            for mask in 1..1u64 << m {
                let b = Bundle::from_mask(mask, m).unwrap();
                assert!((model.predict(&b) - v.value(&b)).abs() <= 1e-3, "seed {seed} bundle {b}");
            }
        }
        let (a, _) = learned_allocation(&models, Economy::Main).unwrap();
        let opt = gen::brute_optimum(&values);
        assert!(total_true_value(&values, &a) >= opt - 1e-2, "seed {seed}");
    }
}

#[test]
fn single_bidder_gets_main_economy_only() {
    let profile = random_profile(7, 1, 4, 2);
    let params = QueryParams {
        kernel: KernelParams::default(),
        per_round: 3,
        max_reports: 10,
        round: 0,
        frozen: vec![false],
    };
    let plan = generate_round_queries(&profile, &params).unwrap();
    assert_eq!(plan.bundles[0].len(), 1);
}

#[test]
fn bidder_at_cap_gets_nothing() {
    let profile = random_profile(9, 3, 4, 3);
    let params = QueryParams {
        kernel: KernelParams::default(),
        per_round: 3,
        max_reports: 3,
        round: 0,
        frozen: vec![false; 3],
    };
    let plan = generate_round_queries(&profile, &params).unwrap();
    assert_eq!(plan.total(), 0);
}

#[test]
fn exhausted_member_is_reported() {
    let values = gen::values(&mut gen::rng(3), 2, 2);
    let profile = gen::full_exact(&values);
    let models: Vec<_> = profile.iter().map(|r| fit_interval_model(r, KernelParams::default()).unwrap()).collect();
    assert!(next_query(&models, &profile, Economy::Main).is_err());
    let known: Vec<Vec<Bundle>> = profile.iter().map(|r| r.bundles().collect()).collect();
    let q = economy_queries(&models, &known, Economy::Marginal(0)).unwrap();
    assert_eq!(q, vec![None, None]);
}
