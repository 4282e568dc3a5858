//! Result files.
//!
//! `results.csv` holds one row per run with the columns of [`ResultRow`] in
//! declaration order; empty cells are missing values. Wall-clock times go
//! to `timing.csv` so the other files are reproducible byte for byte.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use imlca_core::{AuctionTrace, Variant};

use crate::batch::{BatchOutput, ResultRow, TimingRow};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{aggregate, Aggregate};

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const TRACE_DIR: &str = "traces";

pub fn write_rows<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn write_timings<W: Write>(w: W, rows: &[TimingRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn aggregate_json(agg: &Aggregate) -> Result<String> {
    let mut s = serde_json::to_string_pretty(agg)?;
    s.push('\n');
    Ok(s)
}

pub fn trace_file_name(seed: u64, variant: Variant) -> String {
    format!("{seed}-{}.json", variant.name())
}

pub fn write_trace(dir: &Path, seed: u64, variant: Variant, trace: &AuctionTrace) -> Result<()> {
    fs::create_dir_all(dir)?;
    let f = fs::File::create(dir.join(trace_file_name(seed, variant)))?;
    serde_json::to_writer(std::io::BufWriter::new(f), trace)?;
    Ok(())
}

/// Writes every artifact of a batch into `dir`.
pub fn write_batch(dir: &Path, cfg: &ExperimentConfig, batch: &BatchOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rows = batch.rows();
    write_rows(fs::File::create(dir.join(RESULTS_FILE))?, &rows)?;
    write_timings(fs::File::create(dir.join(TIMING_FILE))?, &batch.timings())?;
    fs::write(dir.join(AGGREGATE_FILE), aggregate_json(&aggregate(&rows))?)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml_string()?)?;
    for run in &batch.runs {
        if let Some(trace) = &run.trace {
            write_trace(&dir.join(TRACE_DIR), run.row.seed, run.row.variant, trace)?;
        }
    }
    Ok(())
}

pub fn read_results(dir: &Path) -> Result<Vec<ResultRow>> {
    read_rows(fs::File::open(dir.join(RESULTS_FILE))?)
}
