use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use corruptlab::agent::{self, TrainConfig};
use corruptlab::corruption::{CorruptionKind, CorruptionSpec};
use corruptlab::imputation::ImputationSpec;
use corruptlab::render::{self, Series};
use corruptlab::runner::{
    self, blind_score, decay_report, heatmap_report, quantity_report, read_results, recovery_theory, replicate_over_p,
    run_sweep, single_manifest, ExperimentConfig, ResultRow, SweepReport, Task,
};
use corruptlab::sim::{self, DemandProfile};
use corruptlab::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "corruptlab", version, about = "Measure how missing and noisy data degrade learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one signal-control agent and evaluate it.
    Train(TrainArgs),
    /// Signal-control sweep over the fraction of undetected vehicles.
    SweepMissing(SweepArgs),
    /// Signal-control sweep over cell and reward noise.
    SweepNoise(SweepArgs),
    /// Signal-control sweep over the masked region of every lane.
    SweepMask(SweepArgs),
    /// Imputation advantage heatmap with zero contour and fitted boundary.
    Heatmap(HeatmapArgs),
    /// Dataset size needed to offset corruption on the pattern task.
    Quantity(QuantityArgs),
    /// Pattern-task decay sweep checked against the recovery theory.
    Pattern(PatternArgs),
    /// Fit the decay law to stored results.
    Fit(FitArgs),
    /// Render stored results or reports as SVG.
    Plot(PlotArgs),
    /// Finite-difference check of the agent's loss gradient.
    Gradcheck(GradcheckArgs),
    /// Run the sweep described by a JSON config.
    Run(RunArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Number of seeds (0, 1, ... n-1).
    #[arg(long, default_value_t = 3)]
    seeds: u64,
}

/// Overrides of the desk-scale signal-control preset.
#[derive(Args, Clone, Copy)]
struct SignalScale {
    /// Training episodes per run.
    #[arg(long)]
    episodes: Option<usize>,
    /// Greedy evaluation episodes per run.
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Episode length in seconds.
    #[arg(long)]
    horizon: Option<usize>,
}

impl SignalScale {
    fn train_config(&self) -> TrainConfig {
        let mut t = TrainConfig::desk();
        if let Some(e) = self.episodes {
            t.episodes = e;
        }
        if let Some(e) = self.eval_episodes {
            t.eval_episodes = e;
        }
        t
    }

    fn demand(&self) -> Option<DemandProfile> {
        self.horizon.map(|horizon| DemandProfile { horizon, ..DemandProfile::default() })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "results/train")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SignalCorruption::None)]
    corruption: SignalCorruption,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Replace observations with general imputation at this noise level.
    #[arg(long)]
    impute_q: Option<f64>,
    #[command(flatten)]
    scale: SignalScale,
    /// Also search and evaluate the fixed-timing baseline.
    #[arg(long)]
    baseline: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalCorruption {
    None,
    VehicleMissing,
    CellNoise,
    MaskRegion,
}

impl From<SignalCorruption> for CorruptionKind {
    fn from(c: SignalCorruption) -> Self {
        match c {
            SignalCorruption::None => CorruptionKind::None,
            SignalCorruption::VehicleMissing => CorruptionKind::VehicleMissing,
            SignalCorruption::CellNoise => CorruptionKind::CellNoise,
            SignalCorruption::MaskRegion => CorruptionKind::MaskRegion,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Corruption ratios; `a,b,...,c` expands with step `b - a`.
    #[arg(long, value_parser = parse_grid, default_value = "0,0.1,...,1")]
    p: Grid,
    #[command(flatten)]
    scale: SignalScale,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum TaskArg {
    SignalRl,
    Pattern,
}

#[derive(Args)]
struct HeatmapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long, value_parser = parse_grid, default_value = "0.1,0.3,0.6,0.75,0.9")]
    p: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0.1,0.3,0.5,0.75,1")]
    q: Grid,
    #[command(flatten)]
    scale: SignalScale,
}

#[derive(Args)]
struct QuantityArgs {
    #[command(flatten)]
    common: Common,
    /// Corruption ratios; 0 is added for the clean benchmark.
    #[arg(long, value_parser = parse_grid, default_value = "0.2,0.4,0.6")]
    p: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "1,2,4")]
    sizes: Grid,
}

#[derive(Args)]
struct PatternArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_grid, default_value = "0,0.1,...,0.9")]
    p: Grid,
    /// Monte-Carlo trials per pattern for the recovery oracle.
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args)]
struct FitArgs {
    /// Results CSV files.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    /// Accept rows from different manifests.
    #[arg(long)]
    force: bool,
    /// Fit raw signal-control returns instead of returns above the blind (p = 1) score.
    #[arg(long)]
    raw: bool,
    /// Write the fit here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Decay,
    Heatmap,
    Boundary,
    Quantity,
    TrainingCurves,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(value_enum)]
    kind: PlotKind,
    /// Results CSV (decay, quantity), heatmap JSON (heatmap, boundary) or
    /// training-curve CSVs.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

/// Comma-separated numbers; `a,b,...,c` expands to `a, b, b + (b - a), ... c`.
fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    if let Some(k) = parts.iter().position(|&t| t == "...") {
        if k != 2 || parts.len() != 4 {
            return Err("range form is a,b,...,c".into());
        }
        let (a, b, c) = (num(parts[0])?, num(parts[1])?, num(parts[3])?);
        let step = b - a;
        if step <= 0.0 || c < a {
            return Err("range must increase".into());
        }
        let n = ((c - a) / step + 1e-9).floor() as usize;
        // Rounded to 12 decimals so that 0.1 steps print as 0.3, not 0.30000000000000004.
        return Ok(Grid((0..=n).map(|i| ((a + step * i as f64) * 1e12).round() / 1e12).collect()));
    }
    parts.iter().map(|t| num(t)).collect::<Result<_, _>>().map(Grid)
}

fn seed_list(n: u64) -> anyhow::Result<Vec<u64>> {
    if n == 0 {
        bail!(Error::Config("seeds: must be at least 1".into()));
    }
    Ok((0..n).collect())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Records the manifest hash in an SVG document.
fn stamp_svg(svg: &str, manifests: &[&str]) -> String {
    let comment = format!("<!-- manifest: {} -->\n", manifests.join(" "));
    match svg.find('>') {
        Some(i) => format!("{}\n{comment}{}", &svg[..=i], &svg[i + 1..]),
        None => svg.to_string(),
    }
}

fn write_svg(path: &Path, svg: &str, manifests: &[&str]) -> anyhow::Result<()> {
    fs::write(path, stamp_svg(svg, manifests)).with_context(|| format!("writing {}", path.display()))
}

fn sweep_and_report(config: &ExperimentConfig) -> anyhow::Result<SweepReport> {
    let report = run_sweep(config)?;
    eprintln!(
        "{}: {} rows ({} computed, {} resumed, {} failed)",
        report.results_path.display(),
        report.rows.len(),
        report.computed,
        report.skipped,
        report.failures.len()
    );
    for (cell, msg) in &report.failures {
        eprintln!("cell {cell:?} failed: {msg}");
    }
    Ok(report)
}

fn exit_for(report: &SweepReport) -> u8 {
    if report.failures.is_empty() {
        0
    } else {
        EXIT_PARTIAL
    }
}

fn signal_config(kind: CorruptionKind, p: Vec<f64>, common: &Common, scale: SignalScale) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Task::SignalRl, CorruptionSpec { kind, p: 0.0, seed: 0 }, p, Vec::new());
    cfg.output_dir = common.out.clone();
    cfg.master_seed = common.master_seed;
    cfg.train = Some(scale.train_config());
    cfg.demand = scale.demand();
    cfg
}

/// Decay fit, JSON and SVG for one stored sweep.
fn write_decay(rows: &[ResultRow], dir: &Path, title: &str, raw: bool) -> anyhow::Result<()> {
    let signal = rows.first().is_some_and(|r| r.task == Task::SignalRl.name());
    let offset = if signal && !raw { blind_score(rows).unwrap_or(0.0) } else { 0.0 };
    let report = decay_report(rows, offset)?;
    write_json(&dir.join("fit.json"), &report)?;
    let series = [Series { label: "mean score", points: report.points.clone() }];
    write_svg(&dir.join("decay.svg"), &render::decay_plot(title, &series, report.fit.as_ref()), &[&report.manifest])?;
    match (&report.fit, &report.fit_error) {
        (Some(f), _) => println!(
            "a = {:.4}, lambda = {:.4}, R^2 = {:.4}, spearman = {:.3} (offset {:.2})",
            f.a, f.lambda, f.r_squared, report.spearman, offset
        ),
        (None, Some(e)) => println!("fit failed: {e}"),
        _ => {}
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<u8> {
    fs::create_dir_all(&a.out)?;
    let demand = a.scale.demand().unwrap_or_default();
    let config = a.scale.train_config();
    let corruption = CorruptionSpec::new(a.corruption.into(), a.p, agent_seed(a.seed, "corruption"))?;
    let imputation = match a.impute_q {
        Some(q) => ImputationSpec::artificial(q, agent_seed(a.seed, "imputation")),
        None => ImputationSpec::none(),
    };
    let out = agent::train(&demand, &config, &corruption, &imputation, a.seed)?;
    let hash = config.hash();
    agent::save_params(&a.out.join("params.bin"), &out.agent.online, a.seed, &hash)?;
    let mut curve = String::from("episode,return\n");
    for (i, r) in out.episode_returns.iter().enumerate() {
        curve.push_str(&format!("{},{r}\n", i + 1));
    }
    fs::write(a.out.join("curve.csv"), curve)?;
    let curves = [("training return".to_string(), out.episode_returns.clone())];
    write_svg(&a.out.join("curve.svg"), &render::training_curves_plot("training", &curves), &[&hash])?;

    #[derive(Serialize)]
    struct Summary {
        config_hash: String,
        eval_returns: Vec<f64>,
        eval_mean: f64,
        fixed_timing: Option<sim::FixedPlanSearch>,
    }
    let fixed = if a.baseline { Some(sim::optimize_fixed_plan(&demand, &[a.seed])?) } else { None };
    println!("greedy evaluation return: {:.1}", out.eval_mean);
    if let Some(f) = &fixed {
        println!("fixed-timing return: {:.1} (mean queue {:.1})", f.mean_return, f.mean_queue);
    }
    write_json(
        &a.out.join("summary.json"),
        &Summary { config_hash: hash, eval_returns: out.eval_returns, eval_mean: out.eval_mean, fixed_timing: fixed },
    )?;
    Ok(0)
}

fn agent_seed(seed: u64, label: &str) -> u64 {
    corruptlab::rng::derive(seed, label)
}

fn cmd_sweep(a: SweepArgs, kind: CorruptionKind, title: &str) -> anyhow::Result<u8> {
    let mut cfg = signal_config(kind, a.p.0, &a.common, a.scale);
    cfg.seeds = seed_list(a.common.seeds)?;
    cfg.validate()?;
    let report = sweep_and_report(&cfg)?;
    if report.rows.len() >= 2 {
        write_decay(&report.rows, &cfg.output_dir, title, false)?;
    }
    Ok(exit_for(&report))
}

fn cmd_heatmap(a: HeatmapArgs) -> anyhow::Result<u8> {
    let seeds = seed_list(a.common.seeds)?;
    let (task, kind) = match a.task {
        TaskArg::SignalRl => (Task::SignalRl, CorruptionKind::VehicleMissing),
        TaskArg::Pattern => (Task::Pattern, CorruptionKind::TokenMissing),
    };
    let make = |sub: &str, p: Vec<f64>, q: Vec<f64>, imputation: ImputationSpec| {
        let mut cfg = match task {
            Task::SignalRl => signal_config(kind, p, &a.common, a.scale),
            Task::Pattern => {
                let mut c = ExperimentConfig::new(task, CorruptionSpec { kind, p: 0.0, seed: 0 }, p, Vec::new());
                c.master_seed = a.common.master_seed;
                c
            }
        };
        cfg.q_grid = q;
        cfg.imputation = imputation;
        cfg.seeds = seeds.clone();
        cfg.output_dir = a.common.out.join(sub);
        cfg
    };
    let base_cfg = make("baseline", a.p.0.clone(), vec![0.0], ImputationSpec::none());
    // General imputation rebuilds the signal observation from the truth and
    // vehicle-missing leaves rewards alone, so the score cannot depend on p:
    // one column is run and replicated.
    let imputed_p = if task == Task::SignalRl { vec![a.p.0[0]] } else { a.p.0.clone() };
    let imp_cfg = make("imputed", imputed_p, a.q.0.clone(), ImputationSpec::artificial(0.0, 0));
    base_cfg.validate()?;
    imp_cfg.validate()?;

    let base = sweep_and_report(&base_cfg)?;
    let imp = sweep_and_report(&imp_cfg)?;
    let code = exit_for(&base).max(exit_for(&imp));
    let imputed_rows = if task == Task::SignalRl {
        eprintln!("note: imputed signal runs do not depend on p; replicated across the p grid");
        replicate_over_p(&imp.rows, &a.p.0)
    } else {
        imp.rows.clone()
    };
    let report = heatmap_report(&base.rows, &imputed_rows)?;
    write_heatmap_outputs(&report, &a.common.out, &format!("imputation advantage ({})", task.name()))?;
    Ok(code)
}

fn write_heatmap_outputs(r: &runner::HeatmapReport, dir: &Path, title: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let manifests = [r.baseline_manifest.as_str(), r.imputed_manifest.as_str()];
    write_json(&dir.join("heatmap.json"), r)?;
    let mut csv = format!("# manifest: {}\np,q,advantage,se\n", manifests.join(" "));
    for (i, &p) in r.grid.p_grid.iter().enumerate() {
        for (j, &q) in r.grid.q_grid.iter().enumerate() {
            csv.push_str(&format!("{p},{q},{},{}\n", r.grid.mean[i][j], r.grid.se[i][j]));
        }
    }
    fs::write(dir.join("heatmap.csv"), csv)?;
    let svg = render::heatmap_plot(title, &r.grid, r.contour.as_deref(), r.boundary.as_ref(), &r.bands);
    write_svg(&dir.join("heatmap.svg"), &svg, &manifests)?;
    match (&r.boundary, &r.boundary_error) {
        (Some(b), _) => println!(
            "boundary: {:?} {:?}, rmse {:.4}, signed area {:.4} -> {:?}",
            b.family, b.params, b.rmse, b.signed_area, b.classification
        ),
        (None, Some(e)) => println!("boundary: {e}"),
        _ => {}
    }
    Ok(())
}

fn cmd_quantity(a: QuantityArgs) -> anyhow::Result<u8> {
    let mut p = vec![0.0];
    p.extend(a.p.0.iter().copied().filter(|&x| x > 0.0));
    let mut cfg = ExperimentConfig::new(
        Task::Pattern,
        CorruptionSpec { kind: CorruptionKind::TokenMissing, p: 0.0, seed: 0 },
        p,
        seed_list(a.common.seeds)?,
    );
    cfg.size_grid = a.sizes.0;
    cfg.master_seed = a.common.master_seed;
    cfg.output_dir = a.common.out.clone();
    cfg.validate()?;
    let sweep = sweep_and_report(&cfg)?;
    let report = quantity_report(&sweep.rows)?;
    write_json(&cfg.output_dir.join("quantity.json"), &report)?;
    let svg = render::quantity_plot("score against dataset size", &report.rows, Some(report.benchmark));
    write_svg(&cfg.output_dir.join("quantity.svg"), &svg, &[&report.manifest])?;
    println!("clean benchmark {:.4} ± {:.4}", report.benchmark, report.benchmark_se);
    for row in &report.rows {
        println!("p = {}: required size {:?}", row.p, row.required);
    }
    Ok(exit_for(&sweep))
}

fn cmd_pattern(a: PatternArgs) -> anyhow::Result<u8> {
    let mut cfg = ExperimentConfig::new(
        Task::Pattern,
        CorruptionSpec { kind: CorruptionKind::TokenMissing, p: 0.0, seed: 0 },
        a.p.0.clone(),
        seed_list(a.common.seeds)?,
    );
    cfg.master_seed = a.common.master_seed;
    cfg.output_dir = a.common.out.clone();
    cfg.validate()?;
    let sweep = sweep_and_report(&cfg)?;
    write_decay(&sweep.rows, &cfg.output_dir, "pattern task", false)?;
    let spec = cfg.pattern_spec();
    let oracle = recovery_theory(&spec, &a.p.0, a.trials, cfg.master_seed)?;
    write_json(&cfg.output_dir.join("theory.json"), &oracle)?;
    println!("planted lambda {:.4}, Monte-Carlo recovery lambda {:.4}", oracle.planted_lambda, oracle.mc_fit.lambda);
    Ok(exit_for(&sweep))
}

fn load_rows(paths: &[PathBuf], force: bool) -> anyhow::Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_results(p)?);
    }
    if rows.is_empty() {
        bail!(Error::Config("no result rows".into()));
    }
    if force {
        for r in rows.iter_mut() {
            r.manifest = "mixed".into();
        }
    } else {
        single_manifest(&rows)?;
    }
    Ok(rows)
}

fn cmd_fit(a: FitArgs) -> anyhow::Result<u8> {
    let rows = load_rows(&a.results, a.force)?;
    let signal = rows[0].task == Task::SignalRl.name();
    let offset = if signal && !a.raw { blind_score(&rows).unwrap_or(0.0) } else { 0.0 };
    let report = decay_report(&rows, offset)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match a.out {
        Some(path) => fs::write(&path, text)?,
        None => print!("{text}"),
    }
    Ok(if report.fit.is_some() { 0 } else { EXIT_VALIDATION })
}

fn cmd_plot(a: PlotArgs) -> anyhow::Result<u8> {
    match a.kind {
        PlotKind::Decay => {
            let rows = load_rows(&a.inputs, a.force)?;
            let signal = rows[0].task == Task::SignalRl.name();
            let offset = if signal && !a.raw { blind_score(&rows).unwrap_or(0.0) } else { 0.0 };
            let r = decay_report(&rows, offset)?;
            let series = [Series { label: "mean score", points: r.points.clone() }];
            write_svg(&a.out, &render::decay_plot("decay", &series, r.fit.as_ref()), &[&r.manifest])?;
        }
        PlotKind::Heatmap | PlotKind::Boundary => {
            let text = fs::read_to_string(&a.inputs[0])?;
            let r: runner::HeatmapReport = serde_json::from_str(&text)?;
            let mut r = r;
            if matches!(a.kind, PlotKind::Heatmap) {
                r.boundary = None;
                r.bands.clear();
            }
            let svg = render::heatmap_plot(
                "imputation advantage",
                &r.grid,
                r.contour.as_deref(),
                r.boundary.as_ref(),
                &r.bands,
            );
            write_svg(&a.out, &svg, &[&r.baseline_manifest, &r.imputed_manifest])?;
        }
        PlotKind::Quantity => {
            let rows = load_rows(&a.inputs, a.force)?;
            let r = quantity_report(&rows)?;
            let svg = render::quantity_plot("score against dataset size", &r.rows, Some(r.benchmark));
            write_svg(&a.out, &svg, &[&r.manifest])?;
        }
        PlotKind::TrainingCurves => {
            let mut curves = Vec::new();
            for p in &a.inputs {
                let text = fs::read_to_string(p)?;
                let v: Vec<f64> = text.lines().skip(1).filter_map(|l| l.split(',').nth(1)?.parse().ok()).collect();
                curves.push((p.display().to_string(), v));
            }
            write_svg(&a.out, &render::training_curves_plot("training", &curves), &[])?;
        }
    }
    Ok(0)
}

fn cmd_gradcheck(a: GradcheckArgs) -> anyhow::Result<u8> {
    let t = std::time::Instant::now();
    let r = agent::dqn_gradcheck(&TrainConfig::default(), a.seed, a.batch, a.samples, a.step)?;
    for (name, e) in &r.per_tensor {
        println!("{name:>8}: {e:.3e}");
    }
    println!(
        "max relative error {:.3e} over {} parameters ({} with reduced step, {} on a kink) in {:.2?}",
        r.max_rel_error,
        r.checked,
        r.shrunk,
        r.at_kink,
        t.elapsed()
    );
    Ok(if r.max_rel_error < 1e-4 { 0 } else { 1 })
}

fn cmd_run(a: RunArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text).with_context(|| a.config.display().to_string())?;
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    let report = sweep_and_report(&cfg)?;
    Ok(exit_for(&report))
}

fn dispatch(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Train(a) => cmd_train(a),
        Command::SweepMissing(a) => cmd_sweep(a, CorruptionKind::VehicleMissing, "missing vehicles"),
        Command::SweepNoise(a) => cmd_sweep(a, CorruptionKind::CellNoise, "cell noise"),
        Command::SweepMask(a) => cmd_sweep(a, CorruptionKind::MaskRegion, "masked region"),
        Command::Heatmap(a) => cmd_heatmap(a),
        Command::Quantity(a) => cmd_quantity(a),
        Command::Pattern(a) => cmd_pattern(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Run(a) => cmd_run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
