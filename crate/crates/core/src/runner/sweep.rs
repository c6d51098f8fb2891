use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use crate::agent::{hex_digest, train};
use crate::error::{Error, Result};
use crate::pattern::{generate, train_eval};
use crate::rng;

pub const CSV_HEADER: &str = "task,p,q,size,seed,score,duration_s,manifest";
pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const WORKERS_ENV: &str = "CORRUPTLAB_WORKERS";
pub const TOOL_VERSION: &str = concat!("corruptlab ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub p: usize,
    pub q: usize,
    pub size: usize,
    pub seed: usize,
}

/// Seeds of one grid cell. `replicate` drives traffic, datasets, network
/// initialisation and exploration and is shared across `p` and `q`; the
/// corruption seed is shared across `q` and the imputation seed across `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub cell: u64,
    pub replicate: u64,
    pub corruption: u64,
    pub imputation: u64,
}

pub fn cell_seeds(config: &ExperimentConfig, c: CellIndex) -> CellSeeds {
    let m = config.master_seed;
    let (p, q, s, k) = (c.p as u64, c.q as u64, c.size as u64, c.seed as u64);
    CellSeeds {
        cell: rng::mix(&[m, p, q, s, k]),
        replicate: rng::mix(&[m, rng::label_hash("replicate"), s, config.seeds[c.seed]]),
        corruption: rng::mix(&[m, rng::label_hash("corruption"), p, s, k]),
        imputation: rng::mix(&[m, rng::label_hash("imputation"), q, s, k]),
    }
}

/// Cells in canonical order: `p`, then `q`, then size, then seed.
pub fn cells(config: &ExperimentConfig) -> Vec<CellIndex> {
    let mut out = Vec::new();
    for p in 0..config.p_grid.len() {
        for q in 0..config.q_grid.len() {
            for size in 0..config.size_grid.len() {
                for seed in 0..config.seeds.len() {
                    out.push(CellIndex { p, q, size, seed });
                }
            }
        }
    }
    out
}

/// SHA-256 of the canonical config without its output directory, plus the
/// tool version.
pub fn manifest_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output_dir = PathBuf::new();
    hex_digest(format!("{}\n{}", TOOL_VERSION, c.to_json()).as_bytes())
}

/// Trains and evaluates one cell, returning its score.
pub fn run_cell(config: &ExperimentConfig, c: CellIndex) -> Result<f64> {
    let seeds = cell_seeds(config, c);
    let size = config.size_grid[c.size];
    let mut corruption = config.corruption;
    corruption.p = config.p_grid[c.p];
    corruption.seed = seeds.corruption;
    let mut imputation = config.imputation;
    imputation.q = config.q_grid[c.q];
    imputation.seed = seeds.imputation;
    match config.task {
        Task::SignalRl => {
            let mut tc = config.train_config();
            tc.episodes = ((tc.episodes as f64 * size).round() as usize).max(1);
            let out = train(&config.demand_profile(), &tc, &corruption, &imputation, seeds.replicate)?;
            Ok(out.eval_mean)
        }
        Task::Pattern => {
            let ds = generate(&config.pattern_spec().scaled(size), seeds.replicate)?;
            train_eval(&ds, &corruption, &imputation, &config.pattern_train_config(), seeds.replicate)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: String,
    pub p: f64,
    pub q: f64,
    pub size: f64,
    pub seed: u64,
    pub score: f64,
    pub duration_s: f64,
    pub manifest: String,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.task, self.p, self.q, self.size, self.seed, self.score, self.duration_s, self.manifest
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 8 {
            return None;
        }
        Some(Self {
            task: f[0].to_string(),
            p: f[1].parse().ok()?,
            q: f[2].parse().ok()?,
            size: f[3].parse().ok()?,
            seed: f[4].parse().ok()?,
            score: f[5].parse().ok()?,
            duration_s: f[6].parse().ok()?,
            manifest: f[7].to_string(),
        })
    }
}

/// Reads a results CSV, ignoring a torn final line.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path)?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim_end() != CSV_HEADER {
                return Err(Error::Config(format!("{}: unexpected header {line:?}", path.display())));
            }
            continue;
        }
        if let Some(r) = ResultRow::parse(&line) {
            rows.push(r);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: CellIndex,
    pub seeds: CellSeeds,
    pub complete: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub config: ExperimentConfig,
    pub cells: Vec<CellRecord>,
    pub failures: Vec<(CellIndex, String)>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<(CellIndex, String)>,
    pub computed: usize,
    pub skipped: usize,
    pub results_path: PathBuf,
    pub manifest_hash: String,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Worker count: `CORRUPTLAB_WORKERS` if set, else available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cell_of(config: &ExperimentConfig, r: &ResultRow) -> Option<CellIndex> {
    let find = |grid: &[f64], x: f64| grid.iter().position(|&g| g == x);
    Some(CellIndex {
        p: find(&config.p_grid, r.p)?,
        q: find(&config.q_grid, r.q)?,
        size: find(&config.size_grid, r.size)?,
        seed: config.seeds.iter().position(|&s| s == r.seed)?,
    })
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(m)?)?;
    Ok(())
}

/// Runs every incomplete cell of `config` and leaves `results.csv` sorted in
/// canonical cell order. Cells already present under the same manifest hash
/// are skipped, so an interrupted sweep resumes where it stopped.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    run_sweep_with(config, worker_count(), None)
}

/// As [`run_sweep`], with an explicit worker count and an optional cap on
/// the number of cells computed in this call (for interruption tests).
pub fn run_sweep_with(config: &ExperimentConfig, workers: usize, limit: Option<usize>) -> Result<SweepReport> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let hash = manifest_hash(config);
    let results_path = dir.join(RESULTS_FILE);
    let all = cells(config);

    let mut done: BTreeMap<CellIndex, ResultRow> = BTreeMap::new();
    if results_path.exists() {
        for r in read_results(&results_path)? {
            if r.manifest != hash {
                return Err(Error::ManifestMismatch(format!(
                    "{} holds results of manifest {}, not {hash}",
                    results_path.display(),
                    r.manifest
                )));
            }
            if let Some(c) = cell_of(config, &r) {
                done.insert(c, r);
            }
        }
    }
    // Rewrite the surviving rows so that a torn line cannot precede new ones.
    {
        let mut f = File::create(&results_path)?;
        writeln!(f, "{CSV_HEADER}")?;
        for r in done.values() {
            writeln!(f, "{}", r.to_csv())?;
        }
    }

    let pending: Vec<CellIndex> = all.iter().copied().filter(|c| !done.contains_key(c)).collect();
    let pending: Vec<CellIndex> = match limit {
        Some(n) => pending.into_iter().take(n).collect(),
        None => pending,
    };
    let skipped = done.len();
    let mut manifest = RunManifest {
        config_hash: hash.clone(),
        tool_version: TOOL_VERSION.to_string(),
        started_unix: unix_now(),
        finished_unix: None,
        config: config.clone(),
        cells: all
            .iter()
            .map(|&c| CellRecord { index: c, seeds: cell_seeds(config, c), complete: done.contains_key(&c) })
            .collect(),
        failures: Vec::new(),
    };
    write_manifest(dir, &manifest)?;

    let mut out = OpenOptions::new().append(true).open(&results_path)?;
    let mut timings = OpenOptions::new().create(true).append(true).open(dir.join(TIMINGS_FILE))?;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(CellIndex, Result<f64>, f64)>();
    let mut failures = Vec::new();
    let mut computed = 0;

    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers.max(1).min(pending.len().max(1)) {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&c) = pending.get(k) else { break };
                let t = Instant::now();
                let res = run_cell(config, c);
                if tx.send((c, res, t.elapsed().as_secs_f64())).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (c, res, secs) in rx {
            match res {
                Ok(score) => {
                    let row = ResultRow {
                        task: config.task.name().to_string(),
                        p: config.p_grid[c.p],
                        q: config.q_grid[c.q],
                        size: config.size_grid[c.size],
                        seed: config.seeds[c.seed],
                        score,
                        duration_s: if config.record_durations { (secs * 1e3).round() / 1e3 } else { 0.0 },
                        manifest: hash.clone(),
                    };
                    writeln!(out, "{}", row.to_csv())?;
                    out.flush()?;
                    writeln!(timings, "{},{},{},{},{secs:.3}", c.p, c.q, c.size, c.seed)?;
                    done.insert(c, row);
                    computed += 1;
                }
                Err(e) => {
                    eprintln!("cell {c:?} failed: {e}");
                    failures.push((c, e.to_string()));
                }
            }
        }
        Ok(())
    })?;

    // Canonical order, independent of completion order.
    let mut f = File::create(&results_path)?;
    writeln!(f, "{CSV_HEADER}")?;
    for r in done.values() {
        writeln!(f, "{}", r.to_csv())?;
    }
    f.flush()?;

    for rec in &mut manifest.cells {
        rec.complete = done.contains_key(&rec.index);
    }
    manifest.failures = failures.clone();
    manifest.finished_unix = Some(unix_now());
    write_manifest(dir, &manifest)?;

    Ok(SweepReport {
        rows: done.into_values().collect(),
        failures,
        computed,
        skipped,
        results_path,
        manifest_hash: hash,
    })
}
