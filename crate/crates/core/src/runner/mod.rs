//! Experiment configs, seeded grid sweeps with resume, and result files.

mod config;
mod study;
mod sweep;

pub use config::{ExperimentConfig, Task};
pub use study::{
    blind_score, decay_report, heatmap_report, quantity_report, recovery_theory, replicate_over_p, summarize_by_p,
    DecayReport, HeatmapReport, QuantityReport, RecoveryTheory,
};
pub use sweep::{
    cell_seeds, cells, manifest_hash, read_results, run_cell, run_sweep, run_sweep_with, worker_count, CellIndex,
    CellRecord, CellSeeds, ResultRow, RunManifest, SweepReport, CSV_HEADER, MANIFEST_FILE, RESULTS_FILE, TIMINGS_FILE,
    TOOL_VERSION, WORKERS_ENV,
};

use crate::error::{Error, Result};

/// Rejects rows from more than one manifest.
pub fn single_manifest(rows: &[ResultRow]) -> Result<&str> {
    let first = rows.first().map(|r| r.manifest.as_str()).ok_or_else(|| Error::Config("no result rows".into()))?;
    if let Some(r) = rows.iter().find(|r| r.manifest != first) {
        return Err(Error::ManifestMismatch(format!("rows from manifests {first} and {}", r.manifest)));
    }
    Ok(first)
}

/// Scores grouped by `p` (ascending), keeping seed order.
pub fn scores_by_p(rows: &[ResultRow]) -> Vec<(f64, Vec<f64>)> {
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.p.total_cmp(&b.p));
    for r in sorted {
        match out.last_mut() {
            Some((p, v)) if *p == r.p => v.push(r.score),
            _ => out.push((r.p, vec![r.score])),
        }
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Sample standard deviation (n - 1).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn std_err(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len().max(1) as f64).sqrt()
}
