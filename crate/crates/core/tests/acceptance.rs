//! One verdict line per acceptance criterion. Sweeps are cached under the
//! cargo target tmpdir and resume, so only the first run pays for training.
//! Set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use corruptlab::agent::{dqn_gradcheck, TrainConfig};
use corruptlab::analysis::{spearman, Classification};
use corruptlab::corruption::{CorruptionKind, CorruptionSpec};
use corruptlab::imputation::{impute_artificial_exact, ImputationSpec};
use corruptlab::pattern::{corrupt_train, generate, train_eval};
use corruptlab::rng;
use corruptlab::runner::{
    blind_score, decay_report, heatmap_report, mean, recovery_theory, replicate_over_p, run_sweep, run_sweep_with,
    std_dev, std_err, summarize_by_p, ExperimentConfig, HeatmapReport, ResultRow, Task,
};
use corruptlab::sim::{optimize_fixed_plan, DemandProfile};

const GRADCHECK_TOL: f64 = 1e-4;
const GRADCHECK_SECONDS: f64 = 60.0;
const RL_MARGIN: f64 = 0.05;
const SIGNAL_SPEARMAN: f64 = -0.9;
const SIGNAL_R2: f64 = 0.90;
const PATTERN_R2: f64 = 0.95;
const PATTERN_LAMBDA_REL: f64 = 0.15;
const ROUND_TRIP_EXACT: f64 = 1e-6;
const ROUND_TRIP_NOISY: f64 = 0.05;
const ROUND_TRIP_NOISY_R2: f64 = 0.99;
const ROUND_TRIP_SECONDS: f64 = 1.0;
const MASK_PLATEAU: f64 = 0.10;
const MASK_DROP: f64 = 0.25;
const HEATMAP_Z: f64 = 2.0;
const IDENTITY_SE: f64 = 2.0;
const QUANTITY_SE: f64 = 2.0;

const HEATMAP_P: [f64; 5] = [0.1, 0.3, 0.6, 0.75, 0.9];
const HEATMAP_Q: [f64; 5] = [0.1, 0.3, 0.5, 0.75, 1.0];

fn cache(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn grid11() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn config(task: Task, kind: CorruptionKind, p: &[f64], seeds: &[u64], name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(task, CorruptionSpec { kind, p: 0.0, seed: 0 }, p.to_vec(), seeds.to_vec());
    c.output_dir = cache(name);
    c
}

fn sweep(c: &ExperimentConfig) -> Vec<ResultRow> {
    let t = Instant::now();
    let r = run_sweep(c).unwrap_or_else(|e| panic!("{}: {e}", c.output_dir.display()));
    assert!(r.failures.is_empty(), "{}: {:?}", c.output_dir.display(), r.failures);
    if r.computed > 0 {
        println!(
            "    [{}: {} cells computed in {:.0} s]",
            c.output_dir.display(),
            r.computed,
            t.elapsed().as_secs_f64()
        );
    }
    r.rows
}

fn scores_at(rows: &[ResultRow], p: f64) -> Vec<f64> {
    rows.iter().filter(|r| r.p == p).map(|r| r.score).collect()
}

fn cell(report: &HeatmapReport, p: f64, q: f64) -> (f64, f64) {
    let g = &report.grid;
    let i = g.p_grid.iter().position(|&x| (x - p).abs() < 1e-9).expect("p on grid");
    let j = g.q_grid.iter().position(|&x| (x - q).abs() < 1e-9).expect("q on grid");
    (g.mean[i][j], g.se[i][j])
}

struct Verdicts {
    failed: Vec<u32>,
}

impl Verdicts {
    fn record(&mut self, id: u32, ok: bool, summary: String) {
        println!("criterion {id:>2} {}  {summary}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id);
        }
    }
}

fn heatmap(task: Task, kind: CorruptionKind, seeds: &[u64], name: &str) -> HeatmapReport {
    let base = sweep(&config(task, kind, &HEATMAP_P, seeds, &format!("{name}-baseline")));
    // Imputed signal scores cannot depend on p (observations are rebuilt from
    // the truth and vehicle-missing leaves rewards alone): one column suffices.
    let imputed_p: Vec<f64> = if task == Task::SignalRl { vec![HEATMAP_P[0]] } else { HEATMAP_P.to_vec() };
    let mut ic = config(task, kind, &imputed_p, seeds, &format!("{name}-imputed"));
    ic.q_grid = HEATMAP_Q.to_vec();
    ic.imputation = ImputationSpec::artificial(0.0, 0);
    let mut imputed = sweep(&ic);
    if task == Task::SignalRl {
        imputed = replicate_over_p(&imputed, &HEATMAP_P);
    }
    heatmap_report(&base, &imputed).unwrap()
}

fn main() {
    let mut v = Verdicts { failed: Vec::new() };
    let signal_seeds = [0, 1, 2];
    let pattern_seeds = [0, 1, 2, 3, 4];

    // 1. Gradient check on the full architecture.
    let t = Instant::now();
    let g = dqn_gradcheck(&TrainConfig::default(), 0, 16, 1000, 1e-4).unwrap();
    let secs = t.elapsed().as_secs_f64();
    v.record(
        1,
        g.max_rel_error < GRADCHECK_TOL && secs < GRADCHECK_SECONDS,
        format!(
            "gradient check: max rel error {:.2e} (< {GRADCHECK_TOL:e}) over {} entries, {secs:.1} s",
            g.max_rel_error, g.checked
        ),
    );

    // 5. Fit round trips (cheap, run early).
    let t = Instant::now();
    let rt = round_trips();
    let secs = t.elapsed().as_secs_f64();
    v.record(
        5,
        rt.0 < ROUND_TRIP_EXACT && rt.1 < ROUND_TRIP_NOISY && rt.2 >= ROUND_TRIP_NOISY_R2 && secs < ROUND_TRIP_SECONDS,
        format!(
            "fit round trips: exact rel error {:.1e}, noisy rel error {:.3}, min R² {:.4}, {secs:.2} s",
            rt.0, rt.1, rt.2
        ),
    );

    // 2. Clean RL against the optimised fixed-timing plan.
    let clean = sweep(&config(Task::SignalRl, CorruptionKind::None, &[0.0], &[0, 1, 2, 3, 4], "signal-clean"));
    let rl = mean(&clean.iter().map(|r| r.score).collect::<Vec<_>>());
    let fixed = optimize_fixed_plan(&DemandProfile::default(), &[0, 1, 2, 3, 4]).unwrap();
    v.record(
        2,
        rl >= (1.0 + RL_MARGIN) * fixed.mean_return,
        format!(
            "clean RL return {rl:.1} vs optimised fixed timing {:.1} (plan greens {:?}): {:+.1}%",
            fixed.mean_return,
            fixed.plan,
            100.0 * (rl / fixed.mean_return - 1.0)
        ),
    );

    // 3. Signal decay law under vehicle-missing.
    let missing =
        sweep(&config(Task::SignalRl, CorruptionKind::VehicleMissing, &grid11(), &signal_seeds, "signal-missing"));
    let blind = blind_score(&missing).unwrap();
    let d = decay_report(&missing, blind).unwrap();
    let raw = decay_report(&missing, 0.0).unwrap();
    let (r2, a, lambda) = d.fit.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.r_squared, f.a, f.lambda));
    v.record(
        3,
        d.spearman <= SIGNAL_SPEARMAN && r2 >= SIGNAL_R2,
        format!(
            "signal decay: spearman {:.3}, R² {r2:.3} (a {a:.1}, λ {lambda:.3}, blind return {blind:.1})",
            d.spearman
        ),
    );
    if let Some(f) = &raw.fit {
        println!("    raw-return fit: a {:.1}, λ {:.3}, R² {:.3}", f.a, f.lambda, f.r_squared);
    }
    for (p, m, se) in &d.points {
        println!("    p {p:.1}: score {m:.1} ± {se:.1}");
    }

    // 4. Pattern decay law against the Monte-Carlo recovery oracle.
    let pc = config(Task::Pattern, CorruptionKind::TokenMissing, &grid11(), &pattern_seeds, "pattern-missing");
    let pattern = sweep(&pc);
    let pd = decay_report(&pattern, 0.0).unwrap();
    let theory = recovery_theory(&pc.pattern_spec(), &grid11(), 200, 0).unwrap();
    let oracle = theory.mc_fit.lambda;
    let (pr2, pl) = pd.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.r_squared, f.lambda));
    let rel = ((pl - oracle) / oracle).abs();
    v.record(
        4,
        pr2 >= PATTERN_R2 && rel <= PATTERN_LAMBDA_REL,
        format!(
            "pattern decay: R² {pr2:.4}, λ {pl:.3} vs oracle {oracle:.3} ({:.1}% off; planted {:.1})",
            100.0 * rel,
            theory.planted_lambda
        ),
    );

    // 6. Noise is worse than missing data, and less stable.
    let noise = sweep(&config(Task::SignalRl, CorruptionKind::CellNoise, &[0.2, 0.3], &signal_seeds, "signal-noise"));
    let (n2, m2) = (mean(&scores_at(&noise, 0.2)), mean(&scores_at(&missing, 0.2)));
    let (n3, m3) = (std_dev(&scores_at(&noise, 0.3)), std_dev(&scores_at(&missing, 0.3)));
    v.record(
        6,
        n2 < m2 && n3 > m3,
        format!("noise vs missing: mean at 0.2 {n2:.1} vs {m2:.1}; seed std at 0.3 {n3:.1} vs {m3:.1}"),
    );

    // 7. Masking plateau then collapse, scored above the blind return.
    let mask =
        sweep(&config(Task::SignalRl, CorruptionKind::MaskRegion, &[0.0, 0.5, 0.9, 1.0], &signal_seeds, "signal-mask"));
    let mblind = blind_score(&mask).unwrap();
    let s = |p| mean(&scores_at(&mask, p)) - mblind;
    let (s0, s5, s9) = (s(0.0), s(0.5), s(0.9));
    v.record(
        7,
        (s5 - s0).abs() <= MASK_PLATEAU * s0 && s9 <= (1.0 - MASK_DROP) * s0,
        format!(
            "mask: score at 0.5 {:+.1}% of unmasked, at 0.9 {:+.1}% (unmasked {s0:.1} above blind {mblind:.1})",
            100.0 * (s5 / s0 - 1.0),
            100.0 * (s9 / s0 - 1.0)
        ),
    );
    for p in [0.0, 0.5, 0.9, 1.0] {
        let xs = scores_at(&mask, p);
        println!("    mask {p:.1}: raw return {:.1} ± {:.1}", mean(&xs), std_err(&xs));
    }

    // 8 and 9. Heatmap sign structure and boundary classification.
    let sig = heatmap(Task::SignalRl, CorruptionKind::VehicleMissing, &signal_seeds, "signal-heatmap");
    let pat = heatmap(Task::Pattern, CorruptionKind::TokenMissing, &pattern_seeds, "pattern-heatmap");
    let mut ok8 = true;
    let mut parts = Vec::new();
    for (name, r) in [("signal", &sig), ("pattern", &pat)] {
        let (hi, hi_se) = cell(r, 0.9, 0.1);
        let (lo, lo_se) = cell(r, 0.6, 1.0);
        let (zh, zl) = (hi / hi_se, lo / lo_se);
        ok8 &= hi > 0.0 && zh >= HEATMAP_Z && lo < 0.0 && zl <= -HEATMAP_Z;
        parts.push(format!("{name} A(0.9,0.1) {hi:.3} (z {zh:.1}), A(0.6,1) {lo:.3} (z {zl:.1})"));
    }
    v.record(8, ok8, format!("heatmap signs: {}", parts.join("; ")));
    let class = |r: &HeatmapReport| r.boundary.as_ref().map(|b| b.classification);
    let (sc, pcl) = (class(&sig), class(&pat));
    v.record(
        9,
        pcl == Some(Classification::NoiseInsensitive) && sc == Some(Classification::NoiseSensitive),
        format!(
            "classification: pattern {pcl:?} (area {:?}), signal {sc:?} (area {:?})",
            pat.boundary.as_ref().map(|b| b.signed_area),
            sig.boundary.as_ref().map(|b| b.signed_area)
        ),
    );

    // 10. Exact imputation at q = 0 restores the clean inputs and score.
    let spec = pc.pattern_spec();
    let tc = pc.pattern_train_config();
    let ds = generate(&spec, 0).unwrap();
    let corrupted = corrupt_train(&ds, 0.5, &mut rng::stream(1, "identity"));
    let restored: Vec<Vec<u32>> = corrupted
        .iter()
        .zip(&ds.train)
        .map(|(c, s)| {
            impute_artificial_exact(c, &s.tokens, 0.0, spec.vocab_size, &mut rng::stream(2, "identity")).unwrap()
        })
        .collect();
    let bit_exact = restored.iter().zip(&ds.train).all(|(r, s)| *r == s.tokens);
    let (mut clean_scores, mut imputed_scores) = (Vec::new(), Vec::new());
    for seed in pattern_seeds {
        let ds = generate(&spec, seed).unwrap();
        let corr = CorruptionSpec { kind: CorruptionKind::TokenMissing, p: 0.5, seed: seed + 100 };
        clean_scores.push(train_eval(&ds, &CorruptionSpec::none(), &ImputationSpec::none(), &tc, seed).unwrap());
        imputed_scores.push(train_eval(&ds, &corr, &ImputationSpec::artificial(0.0, seed + 200), &tc, seed).unwrap());
    }
    let (cm, im, cse) = (mean(&clean_scores), mean(&imputed_scores), std_err(&clean_scores));
    v.record(
        10,
        bit_exact && (cm - im).abs() <= IDENTITY_SE * cse,
        format!("exact imputation q=0: inputs bit-exact {bit_exact}, score {im:.4} vs clean {cm:.4} (SE {cse:.4})"),
    );

    // 11. Quadrupling the data does not recover the clean score.
    let mut qc = config(Task::Pattern, CorruptionKind::TokenMissing, &[0.0, 0.4], &pattern_seeds, "pattern-quantity");
    qc.size_grid = vec![1.0, 4.0];
    let q = sweep(&qc);
    let pick =
        |p: f64, size: f64| -> Vec<f64> { q.iter().filter(|r| r.p == p && r.size == size).map(|r| r.score).collect() };
    let (base, big) = (pick(0.0, 1.0), pick(0.4, 4.0));
    let se = (std_err(&base).powi(2) + std_err(&big).powi(2)).sqrt();
    v.record(
        11,
        mean(&big) <= mean(&base) - QUANTITY_SE * se,
        format!(
            "quantity: p 0.4 at 4x size {:.4} vs clean base {:.4} (combined SE {se:.4}, needs a gap of {:.4})",
            mean(&big),
            mean(&base),
            QUANTITY_SE * se
        ),
    );
    for (p, m, se) in summarize_by_p(&q.iter().filter(|r| r.size == 1.0).cloned().collect::<Vec<_>>()) {
        println!("    size 1, p {p:.1}: {m:.4} ± {se:.4}");
    }

    // 12. Determinism and resume, in fresh directories.
    v.record(12, determinism(), "identical sweeps are byte-identical; interrupted then resumed matches".into());

    // Spearman of the pattern sweep, for the record.
    let ps: Vec<f64> = pd.points.iter().map(|x| x.0).collect();
    let ms: Vec<f64> = pd.points.iter().map(|x| x.1).collect();
    println!("    pattern spearman {:.3}", spearman(&ps, &ms));

    println!("{} of 12 criteria passed; failing: {:?}", 12 - v.failed.len(), v.failed);
    if !v.failed.is_empty() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}

/// Worst relative parameter error on exact samples, worst on 1%-noise
/// samples over 20 seeds, and the lowest noisy R².
fn round_trips() -> (f64, f64, f64) {
    use corruptlab::analysis::{decay_model, fit_decay};
    use rand_distr::{Distribution, Normal};
    let (mut exact, mut noisy, mut r2) = (0.0f64, 0.0f64, 1.0f64);
    for (a, lambda) in [(0.475, 3.517), (395.8, 7.493)] {
        let pts: Vec<(f64, f64)> = grid11().into_iter().map(|p| (p, decay_model(a, lambda, p))).collect();
        let f = fit_decay(&pts).unwrap();
        exact = exact.max(((f.a - a) / a).abs()).max(((f.lambda - lambda) / lambda).abs());
        let noise = Normal::new(0.0, 0.01 * a).unwrap();
        for seed in 0..20 {
            let mut r = rng::stream(seed, "acceptance-noise");
            let pts: Vec<(f64, f64)> = pts.iter().map(|&(p, s)| (p, s + noise.sample(&mut r))).collect();
            let f = fit_decay(&pts).unwrap();
            noisy = noisy.max(((f.a - a) / a).abs()).max(((f.lambda - lambda) / lambda).abs());
            r2 = r2.min(f.r_squared);
        }
    }
    (exact, noisy, r2)
}

fn determinism() -> bool {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let make = |k: usize| {
        let mut c = ExperimentConfig::new(
            Task::Pattern,
            CorruptionSpec { kind: CorruptionKind::TokenMissing, p: 0.0, seed: 0 },
            vec![0.0, 0.3, 0.6],
            vec![0, 1],
        );
        c.output_dir = dirs[k].path().to_path_buf();
        c
    };
    run_sweep_with(&make(0), 1, None).unwrap();
    run_sweep_with(&make(1), 1, None).unwrap();
    let partial = run_sweep_with(&make(2), 1, Some(3)).unwrap();
    let resumed = run_sweep_with(&make(2), 1, None).unwrap();
    let read = |k: usize| std::fs::read(dirs[k].path().join("results.csv")).unwrap();
    partial.computed == 3 && resumed.computed == 3 && resumed.skipped == 3 && read(0) == read(1) && read(0) == read(2)
}
