//! Per-variant means and standard errors.

use std::fmt::Write;

use imlca_core::Variant;
use serde::{Deserialize, Serialize};

use crate::batch::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for a single value.
    pub stderr: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Stat> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { n, mean, stderr })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant: Variant,
    pub runs: usize,
    pub errors: usize,
    pub efficiency: Option<Stat>,
    pub relative_revenue: Option<Stat>,
    pub rounds: Option<Stat>,
    pub mrpar_refinements: Option<Stat>,
    pub total_refinements: Option<Stat>,
    pub initial_uncertainty: Option<Stat>,
    pub final_uncertainty: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variants: Vec<VariantAggregate>,
}

fn collect<T: Copy>(rows: &[&ResultRow], f: impl Fn(&ResultRow) -> Option<T>, conv: impl Fn(T) -> f64) -> Option<Stat> {
    let xs: Vec<f64> = rows.iter().filter_map(|r| f(r)).map(conv).collect();
    Stat::of(&xs)
}

/// Errored rows are counted but contribute no metrics.
pub fn aggregate(rows: &[ResultRow]) -> Aggregate {
    let mut variants: Vec<Variant> = rows.iter().map(|r| r.variant).collect();
    variants.sort();
    variants.dedup();
    let as_f = |x: usize| x as f64;
    let variants = variants
        .into_iter()
        .map(|v| {
            let all: Vec<&ResultRow> = rows.iter().filter(|r| r.variant == v).collect();
            let ok: Vec<&ResultRow> = all.iter().copied().filter(|r| !r.is_error()).collect();
            VariantAggregate {
                variant: v,
                runs: all.len(),
                errors: all.len() - ok.len(),
                efficiency: collect(&ok, |r| r.efficiency, |x| x),
                relative_revenue: collect(&ok, |r| r.relative_revenue, |x| x),
                rounds: collect(&ok, |r| r.rounds, as_f),
                mrpar_refinements: collect(&ok, |r| r.mrpar_refinements, as_f),
                total_refinements: collect(&ok, |r| r.total_refinements, as_f),
                initial_uncertainty: collect(&ok, |r| r.initial_uncertainty, |x| x),
                final_uncertainty: collect(&ok, |r| r.final_uncertainty, |x| x),
            }
        })
        .collect();
    Aggregate { variants }
}

fn cell(s: Option<Stat>, percent: bool) -> String {
    match s {
        None => "-".into(),
        Some(s) if percent => format!("{:.2}% ({:.2})", 100.0 * s.mean, 100.0 * s.stderr),
        Some(s) => format!("{:.2} ({:.2})", s.mean, s.stderr),
    }
}

/// Plain-text table, standard errors in parentheses.
pub fn render_table(agg: &Aggregate) -> String {
    let header = [
        "variant",
        "runs",
        "errors",
        "efficiency",
        "revenue",
        "rounds",
        "mrpar",
        "refinements",
        "init unc",
        "final unc",
    ];
    let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for v in &agg.variants {
        lines.push(vec![
            v.variant.name().to_string(),
            v.runs.to_string(),
            v.errors.to_string(),
            cell(v.efficiency, true),
            cell(v.relative_revenue, true),
            cell(v.rounds, false),
            cell(v.mrpar_refinements, false),
            cell(v.total_refinements, false),
            cell(v.initial_uncertainty, true),
            cell(v.final_uncertainty, true),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
