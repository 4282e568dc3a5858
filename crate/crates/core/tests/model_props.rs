mod common;

use common::gen;
use imlca_core::{
    efficiency, reporting_uncertainty, total_true_value, total_value, wdp_reports, Allocation, Bundle, Economy,
    IntervalReport, ReportSet, TableValuation, Valuation, ValuationView,
};
use proptest::prelude::*;

fn wdp_value(view: &ValuationView, profile: &[ReportSet], economy: Economy) -> f64 {
    wdp_reports(view, profile, economy).unwrap().1
}

fn exact_profile(profile: &[ReportSet]) -> Vec<ReportSet> {
    profile
        .iter()
        .map(|r| {
            let mut s = ReportSet::new(r.bidder(), r.num_items());
            for x in r.iter().skip(1) {
                s.insert(IntervalReport::exact(x.bundle, x.lower).unwrap()).unwrap();
            }
            s
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wdp_views_are_ordered(seed in any::<u64>(), n in 1usize..=4, m in 2usize..=5, k in 1usize..=6,
                             a1 in 0.0f64..=1.0, a2 in 0.0f64..=1.0) {
        let p = gen::instance(seed, n, m, k, 0.5).profile;
        let lower = wdp_value(&ValuationView::Lower, &p, Economy::Main);
        let upper = wdp_value(&ValuationView::Upper, &p, Economy::Main);
        prop_assert!(lower <= upper + 1e-9);
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(wdp_value(&ValuationView::Alpha(lo), &p, Economy::Main)
            >= wdp_value(&ValuationView::Alpha(hi), &p, Economy::Main) - 1e-9);
    }

    #[test]
    fn marginal_economies_lose_at_most_the_excluded_share(seed in any::<u64>(), n in 2usize..=4, m in 2usize..=5,
                                                         k in 1usize..=5, alpha in 0.0f64..=1.0) {
        let p = gen::instance(seed, n, m, k, 0.5).profile;
        let view = ValuationView::Alpha(alpha);
        let (a, main) = wdp_reports(&view, &p, Economy::Main).unwrap();
        for i in 0..n {
            let marginal = wdp_value(&view, &p, Economy::Marginal(i));
            let own = view.value(&p[i], a.bundle(i)).unwrap();
            prop_assert!(marginal >= main - own - 1e-9);
            prop_assert!(marginal <= main + 1e-9);
        }
    }

    #[test]
    fn exact_reports_make_views_agree(seed in any::<u64>(), n in 1usize..=4, m in 2usize..=5, k in 1usize..=6) {
        let p = exact_profile(&gen::instance(seed, n, m, k, 0.5).profile);
        let (a, lower) = wdp_reports(&ValuationView::Lower, &p, Economy::Main).unwrap();
        let upper = wdp_value(&ValuationView::Upper, &p, Economy::Main);
        let perturbed = wdp_value(&ValuationView::Perturbed(a), &p, Economy::Main);
        prop_assert_eq!(lower, upper);
        prop_assert_eq!(lower, perturbed);
    }

    #[test]
    fn total_value_is_the_sum_of_parts(seed in any::<u64>(), n in 1usize..=4, m in 2usize..=5, k in 1usize..=6,
                                       alpha in 0.0f64..=1.0) {
        let p = gen::instance(seed, n, m, k, 0.5).profile;
        let view = ValuationView::Alpha(alpha);
        let (a, value) = wdp_reports(&view, &p, Economy::Main).unwrap();
        let parts: Vec<f64> = p.iter().zip(a.bundles()).map(|(r, b)| view.value(r, b).unwrap()).collect();
        let total = total_value(&view, &p, &a).unwrap();
        let magnitude = parts.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!((total - parts.iter().sum::<f64>()).abs() <= 1e-9 * magnitude);
        prop_assert!((total - value).abs() <= 1e-9 * magnitude);
    }

    #[test]
    fn efficiency_is_scale_free(seed in any::<u64>(), n in 1usize..=3, m in 2usize..=4, c in 0.01f64..100.0) {
        let values = gen::values(&mut gen::rng(seed), n, m);
        let scaled: Vec<TableValuation> = values
            .iter()
            .map(|v| TableValuation::new(m, v.values().iter().map(|x| c * x).collect()).unwrap())
            .collect();
        let opt = gen::brute_optimum(&values);
        let scaled_opt = gen::brute_optimum(&scaled);
        prop_assert!((scaled_opt - c * opt).abs() <= 1e-9 * scaled_opt.max(1.0));
        // Every feasible allocation of the first two bidders' item splits.
        for mask in 0..1u64 << m {
            let mut bundles = vec![Bundle::empty(m); n];
            bundles[0] = Bundle::from_mask(mask, m).unwrap();
            if n > 1 {
                bundles[1] = Bundle::from_mask(!mask & ((1 << m) - 1), m).unwrap();
            }
            let a = Allocation::new(bundles);
            let e = efficiency(&values, &a, opt).unwrap();
            let es = efficiency(&scaled, &a, scaled_opt).unwrap();
            prop_assert!((e - es).abs() <= 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
            prop_assert!((total_true_value(&values, &a) / opt - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn uncertainty_is_a_fraction(lo in 0.0f64..100.0, w in 0.0f64..100.0) {
        let r = IntervalReport::new(Bundle::full(3), lo, lo + w).unwrap();
        let u = reporting_uncertainty(&r);
        prop_assert!((0.0..=1.0).contains(&u));
    }

    #[test]
    fn tightening_is_monotone(seed in any::<u64>(), f in 0.0f64..=1.0, g in 0.0f64..=1.0) {
        let mut rng = gen::rng(seed);
        let values = gen::values(&mut rng, 1, 3);
        let mut r = gen::reports(&mut rng, &values, 4, 0.5).remove(0);
        let before = r.clone();
        let bundles: Vec<Bundle> = r.bundles().skip(1).collect();
        for b in &bundles {
            let (lo, hi) = (r.lower(b).unwrap(), r.upper(b).unwrap());
            let t = values[0].value(b);
            r.tighten(b, lo + f * (t - lo), hi - g * (hi - t)).unwrap();
        }
        before.check_tightening(&r).unwrap();
        for b in &bundles {
            prop_assert!(r.lower(b).unwrap() >= before.lower(b).unwrap());
            prop_assert!(r.upper(b).unwrap() <= before.upper(b).unwrap());
            // Loosening is refused.
            prop_assert!(r.clone().tighten(b, before.lower(b).unwrap() - 1.0, r.upper(b).unwrap()).is_err());
        }
    }
}
