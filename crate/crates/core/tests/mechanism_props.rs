mod common;

use common::gen;
use imlca_core::mechanism::report_sets;
use imlca_core::{
    perturbed_view, run_auction, AuctionTrace, Bidder, MechanismConfig, Outcome, Phase, SimBidder, StubbornBidder,
    TableValuation, Valuation, Variant,
};

fn small_config(variant: Variant, seed: u64) -> MechanismConfig {
    MechanismConfig {
        q_init: 3,
        q_max: 7,
        q_round: 2,
        max_refine_rounds: 10,
        variant,
        seed,
        ..Default::default()
    }
}

fn sim_bidders(values: &[TableValuation], mu: f64, seed: u64) -> Vec<SimBidder<TableValuation>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| SimBidder::new(i, v.clone(), mu, seed * 1000 + i as u64).unwrap())
        .collect()
}

fn run(values: &[TableValuation], mu: f64, cfg: &MechanismConfig) -> (Outcome, AuctionTrace) {
    let mut bidders = sim_bidders(values, mu, cfg.seed);
    run_auction(&mut bidders, cfg).unwrap()
}

fn instance(seed: u64, n: usize, m: usize) -> Vec<TableValuation> {
    gen::values(&mut gen::rng(seed), n, m)
}

fn check_outcome(values: &[TableValuation], outcome: &Outcome, trace: &AuctionTrace) {
    let m = values[0].num_items();
    let profile = report_sets(&trace.final_reports, m).unwrap();
    assert!(outcome.allocation.is_feasible());
    for (i, (b, p)) in outcome.allocation.bundles().iter().zip(&outcome.payments).enumerate() {
        let lower = profile[i].lower(b).unwrap();
        assert!(lower - p >= -1e-6, "bidder {i}: lower utility {}", lower - p);
        assert!(values[i].value(b) - p >= -1e-6, "bidder {i}: true utility");
        assert!(*p >= -1e-6, "bidder {i}: payment {p}");
    }
}

fn check_sandwich(values: &[TableValuation], trace: &AuctionTrace) {
    let snapshots = trace.rounds.iter().map(|r| &r.reports).chain(std::iter::once(&trace.final_reports));
    for reports in snapshots {
        for (i, rs) in reports.iter().enumerate() {
            for r in rs {
                let t = values[i].value(&r.bundle);
                assert!(r.lower <= t && t <= r.upper, "bidder {i}: {r:?} misses {t}");
            }
        }
    }
}

#[test]
fn small_runs_are_rational_and_deficit_free() {
    for seed in 0..12u64 {
        let values = instance(seed, 3, 5);
        for variant in [Variant::Imlca, Variant::ImlcaSp, Variant::MlcaExact] {
            let cfg = small_config(variant, seed);
            let (outcome, trace) = run(&values, 0.5, &cfg);
            check_outcome(&values, &outcome, &trace);
            check_sandwich(&values, &trace);
            for rs in &trace.final_reports {
                assert!(rs.len() <= cfg.q_max + 1);
            }
            if trace.frozen.iter().all(|f| !f) {
                assert_eq!(trace.ml_rounds, cfg.planned_ml_rounds());
            }
            assert!(trace.convergence_rounds <= cfg.max_refine_rounds);
            if variant != Variant::MlcaExact {
                let omega = trace.final_omega.unwrap();
                assert!(omega <= 1.0 + 1e-9);
            }
        }
    }
}

/// Every report the bidder may ignore under the effort-reduction prices is
/// dominated by the allocated bundle at the bidder's own bounds.
#[test]
fn effort_reduction_rounds_respect_ignorability() {
    for seed in 0..8u64 {
        let values = instance(seed, 3, 5);
        let (_, trace) = run(&values, 0.5, &small_config(Variant::Imlca, seed));
        for round in &trace.rounds {
            let (Some(a), Some(prices)) = (&round.allocation, &round.prices) else {
                continue;
            };
            let profile = report_sets(&round.reports, 5).unwrap();
            perturbed_view(&profile, a).unwrap();
            for (i, r) in profile.iter().enumerate() {
                let ai = a.bundle(i);
                let base = r.lower(ai).unwrap() - prices.prices.price(ai);
                for (k, x) in r.iter().enumerate() {
                    if prices.delta[i][k] <= 0.0 && x.bundle != *ai {
                        assert!(base >= x.upper - prices.prices.price(&x.bundle) - 1e-6);
                    }
                }
            }
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let values = instance(5, 3, 5);
    let cfg = small_config(Variant::Imlca, 5);
    let (o1, t1) = run(&values, 0.5, &cfg);
    let (o2, t2) = run(&values, 0.5, &cfg);
    assert_eq!(o1, o2);
    assert_eq!(t1, t2);
}

#[test]
fn exact_reports_match_the_exact_baseline() {
    for seed in 0..10u64 {
        let values = instance(seed, 3, 5);
        let (a, _) = run(&values, 0.0, &small_config(Variant::Imlca, seed));
        let (b, _) = run(&values, 0.0, &small_config(Variant::MlcaExact, seed));
        assert_eq!(a.allocation, b.allocation, "seed {seed}");
        assert_eq!(a.payments, b.payments, "seed {seed}");
    }
}

#[test]
fn ml_phase_round_counts() {
    let values = instance(1, 2, 4);
    let cfg = MechanismConfig {
        q_init: 4,
        q_max: 4,
        ..small_config(Variant::Imlca, 1)
    };
    let (_, trace) = run(&values, 0.5, &cfg);
    assert_eq!(trace.ml_rounds, 0);
    assert!(trace.rounds.iter().all(|r| r.phase == Phase::Convergence));

    // Uneven split: the last round asks for the remainder.
    let cfg = MechanismConfig {
        q_init: 2,
        q_max: 7,
        q_round: 2,
        ..small_config(Variant::Imlca, 1)
    };
    let (_, trace) = run(&values, 0.5, &cfg);
    assert_eq!(trace.ml_rounds, 3);
    for rs in &trace.final_reports {
        assert!(rs.len() <= 8);
    }
}

#[test]
fn two_item_fixture_has_one_ml_round() {
    let values = common::f1_values();
    let cfg = MechanismConfig {
        q_init: 1,
        q_max: 3,
        q_round: 2,
        ..small_config(Variant::Imlca, 3)
    };
    let (outcome, trace) = run(&values, 0.5, &cfg);
    assert_eq!(trace.ml_rounds, 1);
    check_outcome(&values, &outcome, &trace);
}

#[test]
fn stubborn_bidder_is_frozen() {
    let values = instance(2, 3, 4);
    let mut bidders: Vec<Box<dyn Bidder>> = vec![
        Box::new(SimBidder::new(0, values[0].clone(), 0.5, 1).unwrap()),
        Box::new(StubbornBidder::new(1, values[1].clone(), 0.6)),
        Box::new(SimBidder::new(2, values[2].clone(), 0.5, 2).unwrap()),
    ];
    let cfg = small_config(Variant::Imlca, 2);
    let (outcome, trace) = run_auction(&mut bidders, &cfg).unwrap();
    assert!(trace.frozen[1]);
    assert!(!trace.frozen[0] && !trace.frozen[2]);
    // A frozen bidder keeps its reports and still takes part in the outcome.
    let frozen_at = trace.rounds.iter().position(|r| r.newly_frozen.contains(&1)).unwrap();
    let later: Vec<_> = trace.rounds[frozen_at + 1..].iter().map(|r| &r.reports[1]).collect();
    assert!(later.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(outcome.allocation.num_bidders(), 3);
    check_outcome(&values, &outcome, &trace);
}
