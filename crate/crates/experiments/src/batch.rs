//! Runs every (seed, variant) pair of an experiment.

use std::time::Instant;

use imlca_core::{
    efficiency, relative_revenue, run_auction, AuctionTrace, Outcome, SimBidder, TableValuation, Variant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, TraceMode};
use crate::domain::{generate_instance, Instance};
use crate::error::{ExperimentError, Result};
use crate::optimum::brute_force_optimum;

/// Environment variable with the number of worker threads.
pub const THREADS_VAR: &str = "IMLCA_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub variant: Variant,
    pub efficiency: Option<f64>,
    pub relative_revenue: Option<f64>,
    pub welfare: Option<f64>,
    pub optimum: Option<f64>,
    pub rounds: Option<usize>,
    pub ml_rounds: Option<usize>,
    pub convergence_rounds: Option<usize>,
    pub mrpar_refinements: Option<usize>,
    pub total_refinements: Option<usize>,
    pub initial_uncertainty: Option<f64>,
    pub final_uncertainty: Option<f64>,
    pub final_omega: Option<f64>,
    pub frozen: Option<usize>,
    pub degenerate: Option<bool>,
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(seed: u64, variant: Variant, err: &ExperimentError) -> Self {
        Self {
            seed,
            variant,
            efficiency: None,
            relative_revenue: None,
            welfare: None,
            optimum: None,
            rounds: None,
            ml_rounds: None,
            convergence_rounds: None,
            mrpar_refinements: None,
            total_refinements: None,
            initial_uncertainty: None,
            final_uncertainty: None,
            final_omega: None,
            frozen: None,
            degenerate: None,
            error: Some(err.to_string()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub seed: u64,
    pub variant: Variant,
    pub seconds: f64,
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    pub seconds: f64,
    pub outcome: Option<Outcome>,
    pub trace: Option<AuctionTrace>,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    /// Sorted by seed, then variant.
    pub runs: Vec<RunOutput>,
}

impl BatchOutput {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.runs.iter().map(|r| r.row.clone()).collect()
    }

    pub fn timings(&self) -> Vec<TimingRow> {
        self.runs
            .iter()
            .map(|r| TimingRow {
                seed: r.row.seed,
                variant: r.row.variant,
                seconds: r.seconds,
            })
            .collect()
    }

    pub fn has_errors(&self) -> bool {
        self.runs.iter().any(|r| r.row.is_error())
    }
}

/// Seed of bidder `bidder`'s stream in the run on instance `seed`. The same
/// for every variant, so runs on one instance are paired.
pub fn bidder_seed(master: u64, seed: u64, bidder: usize) -> u64 {
    let mut x = master ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (bidder as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 31;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 29)
}

/// Simulated bidders of `instance`. The exact baseline always reports
/// exact values.
pub fn bidders_for(cfg: &ExperimentConfig, instance: &Instance, variant: Variant) -> Result<Vec<SimBidder<TableValuation>>> {
    let mu = if variant == Variant::MlcaExact { 0.0 } else { cfg.mu };
    instance
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| Ok(SimBidder::new(i, v.clone(), mu, bidder_seed(cfg.master_seed, instance.seed, i))?))
        .collect()
}

pub fn run_auction_on(
    cfg: &ExperimentConfig,
    instance: &Instance,
    variant: Variant,
) -> Result<(Outcome, AuctionTrace)> {
    let mut bidders = bidders_for(cfg, instance, variant)?;
    let mech = imlca_core::MechanismConfig {
        variant,
        seed: instance.seed,
        ..cfg.mechanism.clone()
    };
    Ok(run_auction(&mut bidders, &mech)?)
}

fn evaluate(
    cfg: &ExperimentConfig,
    instance: &Instance,
    optimum: f64,
    variant: Variant,
) -> Result<(ResultRow, Outcome, AuctionTrace)> {
    let (outcome, trace) = run_auction_on(cfg, instance, variant)?;
    let welfare = imlca_core::total_true_value(&instance.values, &outcome.allocation);
    let row = ResultRow {
        seed: instance.seed,
        variant,
        efficiency: Some(efficiency(&instance.values, &outcome.allocation, optimum)?),
        relative_revenue: Some(relative_revenue(&outcome.payments, optimum)?),
        welfare: Some(welfare),
        optimum: Some(optimum),
        rounds: Some(trace.rounds.len()),
        ml_rounds: Some(trace.ml_rounds),
        convergence_rounds: Some(trace.convergence_rounds),
        mrpar_refinements: Some(trace.mrpar_refinements),
        total_refinements: Some(trace.total_refinements),
        initial_uncertainty: trace.initial_uncertainty,
        final_uncertainty: trace.final_uncertainty,
        final_omega: trace.final_omega,
        frozen: Some(trace.frozen.iter().filter(|&&f| f).count()),
        degenerate: Some(trace.degenerate),
        error: None,
    };
    Ok((row, outcome, trace))
}

/// Runs one variant on the instance of `seed`; failures become error rows.
pub fn run_one(cfg: &ExperimentConfig, seed: u64, variant: Variant) -> RunOutput {
    let start = Instant::now();
    let result = generate_instance(&cfg.domain, seed).and_then(|instance| {
        let (_, optimum) = brute_force_optimum(&instance.values)?;
        evaluate(cfg, &instance, optimum, variant)
    });
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((row, outcome, trace)) => RunOutput {
            row,
            seconds,
            outcome: Some(outcome),
            trace: (cfg.trace == TraceMode::Json).then_some(trace),
        },
        Err(e) => RunOutput {
            row: ResultRow::failed(seed, variant, &e),
            seconds,
            outcome: None,
            trace: None,
        },
    }
}

/// Worker count from [`THREADS_VAR`], else the number of cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchOutput> {
    cfg.validate()?;
    let mut variants = cfg.variants.clone();
    variants.sort();
    variants.dedup();
    let pairs: Vec<(u64, Variant)> = cfg
        .seeds
        .iter()
        .flat_map(|s| variants.iter().map(move |&v| (s, v)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut runs: Vec<RunOutput> = pool.install(|| pairs.par_iter().map(|&(s, v)| run_one(cfg, s, v)).collect());
    runs.sort_by_key(|r| (r.row.seed, r.row.variant));
    Ok(BatchOutput { runs })
}
