//! Turning result rows into fitted decay curves, advantage heatmaps and
//! quantity tables.

use serde::{Deserialize, Serialize};

use super::{mean, single_manifest, std_err, ResultRow};
use crate::analysis::{
    fit_best_boundary, fit_decay, quantity_tradeoff, se_bands, spearman, zero_contour, AdvantageGrid, BoundaryFit,
    DecayFit, QuantityRow, SeBand,
};
use crate::error::{Error, Result};
use crate::pattern::{analytic_recovery, generate, mc_recovery_oracle, PatternSpec};
use crate::rng;

/// Mean score at `p = 1`, the score of a learner that receives no
/// information at all.
pub fn blind_score(rows: &[ResultRow]) -> Option<f64> {
    let xs: Vec<f64> = rows.iter().filter(|r| r.p == 1.0).map(|r| r.score).collect();
    (!xs.is_empty()).then(|| mean(&xs))
}

/// `(p, mean, standard error)` per corruption ratio, ascending in `p`.
pub fn summarize_by_p(rows: &[ResultRow]) -> Vec<(f64, f64, f64)> {
    super::scores_by_p(rows).into_iter().map(|(p, xs)| (p, mean(&xs), std_err(&xs))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub manifest: String,
    /// Subtracted from every score before fitting, if any.
    pub offset: f64,
    /// `(p, mean, standard error)` after the offset.
    pub points: Vec<(f64, f64, f64)>,
    pub spearman: f64,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
}

/// Fits the decay law to per-`p` mean scores, less `offset`.
pub fn decay_report(rows: &[ResultRow], offset: f64) -> Result<DecayReport> {
    let manifest = single_manifest(rows)?.to_string();
    let points: Vec<(f64, f64, f64)> = summarize_by_p(rows).into_iter().map(|(p, m, se)| (p, m - offset, se)).collect();
    let ps: Vec<f64> = points.iter().map(|x| x.0).collect();
    let ms: Vec<f64> = points.iter().map(|x| x.1).collect();
    let rho = if points.len() >= 2 { spearman(&ps, &ms) } else { f64::NAN };
    let means: Vec<(f64, f64)> = points.iter().map(|x| (x.0, x.1)).collect();
    let (fit, fit_error) = match fit_decay(&means) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DecayReport { manifest, offset, points, spearman: rho, fit, fit_error })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapReport {
    pub baseline_manifest: String,
    pub imputed_manifest: String,
    pub grid: AdvantageGrid,
    pub contour: Option<Vec<[f64; 2]>>,
    pub boundary: Option<BoundaryFit>,
    pub boundary_error: Option<String>,
    /// Gradient-scaled offsets of the boundary at one and two standard errors.
    pub bands: Vec<SeBand>,
}

/// Advantage grid from a sweep without imputation (one `q`) and a sweep with
/// imputation over the `q` grid, followed by the zero contour, the best
/// boundary family and its SE bands.
pub fn heatmap_report(baseline: &[ResultRow], imputed: &[ResultRow]) -> Result<HeatmapReport> {
    let baseline_manifest = single_manifest(baseline)?.to_string();
    let imputed_manifest = single_manifest(imputed)?.to_string();
    let without: Vec<(f64, f64)> = baseline.iter().map(|r| (r.p, r.score)).collect();
    let with: Vec<(f64, f64, f64)> = imputed.iter().map(|r| (r.p, r.q, r.score)).collect();
    let grid = AdvantageGrid::from_scores(&with, &without)?;
    let contour = zero_contour(&grid).ok();
    let (boundary, boundary_error) = match contour.as_deref().map(fit_best_boundary) {
        Some(Ok(b)) => (Some(b), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, Some(Error::NoSignChange.to_string())),
    };
    let bands = match (&boundary, &contour) {
        (Some(b), Some(c)) => [1.0, 2.0].iter().map(|&z| se_bands(b, c, &grid, z)).collect(),
        _ => Vec::new(),
    };
    Ok(HeatmapReport { baseline_manifest, imputed_manifest, grid, contour, boundary, boundary_error, bands })
}

/// Copies rows computed at a single corruption ratio to every `p` in
/// `p_grid`. Valid when the score provably does not depend on `p`: general
/// imputation rebuilds observations from the truth, so this holds under
/// vehicle-missing and mask-region corruption but not under cell noise,
/// which also corrupts rewards.
pub fn replicate_over_p(rows: &[ResultRow], p_grid: &[f64]) -> Vec<ResultRow> {
    p_grid.iter().flat_map(|&p| rows.iter().map(move |r| ResultRow { p, ..r.clone() })).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityReport {
    pub manifest: String,
    /// Clean-data mean score at the smallest size.
    pub benchmark: f64,
    pub benchmark_se: f64,
    pub rows: Vec<QuantityRow>,
}

/// Size needed at each `p` to match the clean score at the smallest size.
/// Requires rows at `p = 0`.
pub fn quantity_report(rows: &[ResultRow]) -> Result<QuantityReport> {
    let manifest = single_manifest(rows)?.to_string();
    let base = rows.iter().map(|r| r.size).fold(f64::INFINITY, f64::min);
    let clean: Vec<f64> = rows.iter().filter(|r| r.p == 0.0 && r.size == base).map(|r| r.score).collect();
    if clean.is_empty() {
        return Err(Error::Config("quantity analysis needs clean (p = 0) rows".into()));
    }
    let benchmark = mean(&clean);
    let triples: Vec<(f64, f64, f64)> = rows.iter().filter(|r| r.p > 0.0).map(|r| (r.p, r.size, r.score)).collect();
    Ok(QuantityReport {
        manifest,
        benchmark,
        benchmark_se: std_err(&clean),
        rows: quantity_tradeoff(&triples, benchmark),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTheory {
    /// Mean planted occurrence rate across patterns.
    pub planted_lambda: f64,
    /// `(p, Monte-Carlo recovery, analytic recovery)` averaged over patterns.
    pub points: Vec<(f64, f64, f64)>,
    /// Decay law fitted to the Monte-Carlo recovery curve.
    pub mc_fit: DecayFit,
}

/// Fraction of patterns that keep an intact occurrence under token-missing
/// corruption, by simulation over the planted occurrences of one generated
/// dataset and by the Poisson formula, with the decay law fitted to the
/// simulated curve.
pub fn recovery_theory(spec: &PatternSpec, p_grid: &[f64], trials: usize, seed: u64) -> Result<RecoveryTheory> {
    let ds = generate(spec, seed)?;
    let mut stream = rng::stream(seed, "recovery-oracle");
    let n = spec.n_patterns as f64;
    let planted_lambda = (0..spec.n_patterns).map(|i| spec.rate_of(i)).sum::<f64>() / n;
    let points: Vec<(f64, f64, f64)> = p_grid
        .iter()
        .map(|&p| {
            let mc = mc_recovery_oracle(&ds, p, trials, &mut stream).iter().sum::<f64>() / n;
            let th =
                (0..spec.n_patterns).map(|i| analytic_recovery(spec.rate_of(i), p, spec.pattern_length)).sum::<f64>()
                    / n;
            (p, mc, th)
        })
        .collect();
    let mc_fit = fit_decay(&points.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>())?;
    Ok(RecoveryTheory { planted_lambda, points, mc_fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: f64, q: f64, seed: u64, score: f64) -> ResultRow {
        ResultRow { task: "pattern".into(), p, q, size: 1.0, seed, score, duration_s: 0.0, manifest: "m".into() }
    }

    #[test]
    fn blind_score_averages_p_one() {
        let rows = [row(0.0, 0.0, 0, 5.0), row(1.0, 0.0, 0, 1.0), row(1.0, 0.0, 1, 2.0)];
        assert_eq!(blind_score(&rows), Some(1.5));
        assert_eq!(blind_score(&rows[..1]), None);
    }

    #[test]
    fn decay_report_recovers_planted_curve() {
        let rows: Vec<ResultRow> = (0..=10)
            .map(|i| {
                let p = i as f64 / 10.0;
                row(p, 0.0, 0, 10.0 + crate::analysis::decay_model(2.0, 3.0, p))
            })
            .collect();
        let r = decay_report(&rows, 10.0).unwrap();
        let fit = r.fit.unwrap();
        assert!((fit.a - 2.0).abs() < 1e-6 && (fit.lambda - 3.0).abs() < 1e-6);
        assert!(r.spearman < -0.99);
    }

    #[test]
    fn replicated_rows_cover_grid() {
        let rows = [row(0.3, 0.5, 0, 1.0), row(0.3, 1.0, 0, 2.0)];
        let out = replicate_over_p(&rows, &[0.1, 0.9]);
        assert_eq!(out.len(), 4);
        assert!(out.iter().filter(|r| r.p == 0.9).count() == 2);
    }

    #[test]
    fn recovery_theory_finds_planted_rate() {
        let spec = PatternSpec { n_samples: 2000, rate: 4.0, ..PatternSpec::default() };
        let grid: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let t = recovery_theory(&spec, &grid, 200, 5).unwrap();
        assert_eq!(t.planted_lambda, 4.0);
        assert!((t.mc_fit.lambda - 4.0).abs() < 0.4, "{:?}", t.mc_fit);
        assert!((t.mc_fit.a - 1.0).abs() < 0.05);
    }
}
