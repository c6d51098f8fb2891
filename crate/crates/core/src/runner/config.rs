use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::corruption::{CorruptionKind, CorruptionSpec};
use crate::error::{Error, Result};
use crate::imputation::{ImputationMethod, ImputationSpec};
use crate::pattern::{PatternSpec, PatternTrainConfig};
use crate::sim::DemandProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    SignalRl,
    Pattern,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SignalRl => "signal_rl",
            Task::Pattern => "pattern",
        }
    }
}

fn one() -> Vec<f64> {
    vec![1.0]
}

fn zero() -> Vec<f64> {
    vec![0.0]
}

/// A sweep over corruption ratio `p`, imputation noise `q`, dataset size and
/// seeds. `size` scales the number of training episodes (signal task) or the
/// number of samples and pattern rates (pattern task).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// `p` and `seed` are overwritten per cell.
    pub corruption: CorruptionSpec,
    /// `q` and `seed` are overwritten per cell.
    pub imputation: ImputationSpec,
    pub p_grid: Vec<f64>,
    #[serde(default = "zero")]
    pub q_grid: Vec<f64>,
    #[serde(default = "one")]
    pub size_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<DemandProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_train: Option<PatternTrainConfig>,
    /// Write wall-clock durations into the results CSV. Off by default so
    /// that repeated sweeps produce identical files.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub record_durations: bool,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ExperimentConfig {
    pub fn new(task: Task, corruption: CorruptionSpec, p_grid: Vec<f64>, seeds: Vec<u64>) -> Self {
        Self {
            task,
            corruption,
            imputation: ImputationSpec::none(),
            p_grid,
            q_grid: zero(),
            size_grid: one(),
            seeds,
            output_dir: PathBuf::from("results"),
            master_seed: 0,
            train: None,
            demand: None,
            pattern: None,
            pattern_train: None,
            record_durations: false,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(TrainConfig::desk)
    }

    pub fn demand_profile(&self) -> DemandProfile {
        self.demand.clone().unwrap_or_default()
    }

    pub fn pattern_spec(&self) -> PatternSpec {
        self.pattern.clone().unwrap_or_default()
    }

    pub fn pattern_train_config(&self) -> PatternTrainConfig {
        self.pattern_train.clone().unwrap_or_default()
    }

    /// Parses and validates; messages carry the line of the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => {
                let key = msg.split(':').next().unwrap_or("");
                match line_of(text, key) {
                    Some(l) => Error::Config(format!("line {l}: {msg}")),
                    None => Error::Config(msg),
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    /// Canonical pretty JSON; parsing it back yields an identical encoding.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        for (key, grid) in [("p_grid", &self.p_grid), ("q_grid", &self.q_grid)] {
            if grid.is_empty() {
                return err(key, "must not be empty".into());
            }
            if let Some(x) = grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return err(key, format!("value {x} outside [0, 1]"));
            }
        }
        if self.size_grid.is_empty() || self.size_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return err("size_grid", "sizes must be positive".into());
        }
        if self.seeds.is_empty() {
            return err("seeds", "must not be empty".into());
        }
        let kind = self.corruption.kind;
        let ok = match self.task {
            Task::SignalRl => kind.applies_to_signal(),
            Task::Pattern => kind.applies_to_tokens(),
        };
        if !ok {
            return err("corruption", format!("{kind:?} does not apply to task {}", self.task.name()));
        }
        if self.task == Task::Pattern && self.imputation.method == ImputationMethod::ContextFill {
            return err("imputation", "context fill applies to the signal task only".into());
        }
        if kind == CorruptionKind::None && self.p_grid.iter().any(|&p| p > 0.0) {
            return err("p_grid", "corruption kind none requires p = 0".into());
        }
        self.imputation.validate().map_err(|e| Error::Config(format!("imputation: {e}")))?;
        if let Some(t) = &self.train {
            t.validate().map_err(|e| Error::Config(format!("train: {e}")))?;
        }
        if let Some(d) = &self.demand {
            d.validate().map_err(|e| Error::Config(format!("demand: {e}")))?;
        }
        if let Some(s) = &self.pattern {
            s.validate().map_err(|e| Error::Config(format!("pattern: {e}")))?;
        }
        Ok(())
    }
}
