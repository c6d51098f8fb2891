//! Imputation strategies and the agent-visible view of the simulator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corruption::{self, CorruptionKind, CorruptionSpec, Token, MISSING};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::sim::{
    step_reward, DecisionOutcome, Intersection, Observation, Occupancy, CELLS_PER_LANE, LANES, OCCUPANCY_DIM,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMethod {
    None,
    #[serde(alias = "artificial_exact")]
    Artificial,
    ContextFill,
}

fn default_window() -> usize {
    2
}

fn default_threshold() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputationSpec {
    pub method: ImputationMethod,
    #[serde(default)]
    pub q: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ImputationSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl ImputationSpec {
    pub fn none() -> Self {
        Self { method: ImputationMethod::None, q: 0.0, window: 2, threshold: 3, seed: 0 }
    }

    pub fn artificial(q: f64, seed: u64) -> Self {
        Self { method: ImputationMethod::Artificial, q, seed, ..Self::none() }
    }

    pub fn context_fill(window: usize, threshold: usize) -> Self {
        Self { method: ImputationMethod::ContextFill, window, threshold, ..Self::none() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter(format!("imputation noise {} outside [0, 1]", self.q)));
        }
        if self.window == 0 || self.threshold == 0 || self.threshold > 2 * self.window {
            return Err(Error::InvalidParameter(format!(
                "context fill needs w >= 1 and 1 <= k <= 2w, got w={} k={}",
                self.window, self.threshold
            )));
        }
        Ok(())
    }
}

/// Fills every [`MISSING`] slot of `corrupted`: with probability `q` by a
/// token uniform over `0..vocab`, otherwise by the original token.
/// Two uniforms are consumed per missing slot.
pub fn impute_artificial_exact(
    corrupted: &[Token],
    original: &[Token],
    q: f64,
    vocab: u32,
    rng: &mut Stream,
) -> Result<Vec<Token>> {
    if corrupted.len() != original.len() {
        return Err(Error::Misaligned(corrupted.len(), original.len()));
    }
    Ok(corrupted
        .iter()
        .zip(original)
        .map(|(&c, &o)| {
            if c != MISSING {
                return c;
            }
            let noisy = rng.random::<f64>() < q;
            let random = rng.random_range(0..vocab);
            if noisy {
                random
            } else {
                o
            }
        })
        .collect())
}

/// General-imputation form of the artificial instrument for occupancy grids:
/// every cell is a candidate, and is restored from `original` with
/// probability `1 - q`, otherwise set to a fair coin.
pub fn impute_artificial_general(original: &Observation, q: f64, rng: &mut Stream) -> Observation {
    let mut out = *original;
    for idx in 0..OCCUPANCY_DIM {
        let noisy = rng.random::<f64>() < q;
        let bit = rng.random::<bool>();
        if noisy {
            out.occupancy.set(idx, bit);
        }
    }
    out
}

/// Single-pass neighbourhood fill of one lane: a zero becomes one when at
/// least `k` of its up-to-`2w` lane neighbours are one. Near the lane ends the
/// threshold scales to `ceil(k * available / 2w)`.
pub fn context_fill_lane(cells: &[bool], w: usize, k: usize) -> Vec<bool> {
    let n = cells.len();
    (0..n)
        .map(|i| {
            if cells[i] {
                return true;
            }
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            let available = hi - lo;
            if available == 0 {
                return false;
            }
            let occupied = (lo..=hi).filter(|&j| j != i && cells[j]).count();
            let need = (k * available).div_ceil(2 * w);
            occupied >= need.max(1)
        })
        .collect()
}

pub fn impute_context_fill(obs: &Observation, w: usize, k: usize) -> Observation {
    let mut occ = Occupancy::default();
    for lane in 0..LANES {
        let cells: Vec<bool> = (0..CELLS_PER_LANE).map(|c| obs.occupancy.get_cell(lane, c)).collect();
        for (c, v) in context_fill_lane(&cells, w, k).into_iter().enumerate() {
            occ.set_cell(lane, c, v);
        }
    }
    Observation { occupancy: occ, ..*obs }
}

/// What the learning agent sees of an [`Intersection`]: corruption followed
/// by imputation, applied to observations and rewards. The simulator itself
/// is only read.
#[derive(Clone, Debug)]
pub struct SignalView {
    pub corruption: CorruptionSpec,
    pub imputation: ImputationSpec,
    noise: Stream,
    impute: Stream,
}

impl SignalView {
    pub fn new(corruption: CorruptionSpec, imputation: ImputationSpec) -> Result<Self> {
        corruption.validate()?;
        imputation.validate()?;
        if !corruption.kind.applies_to_signal() {
            return Err(Error::InvalidParameter(format!("{:?} does not apply to the signal task", corruption.kind)));
        }
        Ok(Self {
            noise: rng::stream(corruption.seed, "cell-noise"),
            impute: rng::stream(imputation.seed, "impute"),
            corruption,
            imputation,
        })
    }

    pub fn clean() -> Self {
        Self::new(CorruptionSpec::none(), ImputationSpec::none()).expect("clean view is valid")
    }

    /// Re-seeds the random streams, e.g. for a new episode.
    pub fn reseed(&mut self, episode_seed: u64) {
        self.noise = rng::stream(rng::mix(&[self.corruption.seed, episode_seed]), "cell-noise");
        self.impute = rng::stream(rng::mix(&[self.imputation.seed, episode_seed]), "impute");
    }

    pub fn observe(&mut self, env: &Intersection) -> Observation {
        let truth = env.observe();
        let p = self.corruption.p;
        let corrupted = match self.corruption.kind {
            CorruptionKind::VehicleMissing => corruption::apply_vehicle_missing(env),
            CorruptionKind::CellNoise => corruption::apply_cell_noise(&truth, 0.0, p, &mut self.noise).0,
            CorruptionKind::MaskRegion => corruption::apply_mask_region(&truth, p),
            CorruptionKind::None | CorruptionKind::TokenMissing => truth,
        };
        match self.imputation.method {
            ImputationMethod::None => corrupted,
            ImputationMethod::Artificial => impute_artificial_general(&truth, self.imputation.q, &mut self.impute),
            ImputationMethod::ContextFill => {
                impute_context_fill(&corrupted, self.imputation.window, self.imputation.threshold)
            }
        }
    }

    /// Agent-visible reward of a decision: the sum of its per-second rewards,
    /// each replaced by noise under cell-noise corruption.
    pub fn reward(&mut self, outcome: &DecisionOutcome) -> f64 {
        if self.corruption.kind != CorruptionKind::CellNoise {
            return outcome.reward;
        }
        let p = self.corruption.p;
        outcome
            .queues
            .iter()
            .map(|&q| {
                let hit = self.noise.random::<f64>() < p;
                let r = self.noise.random_range(-1.0..=1.0);
                if hit {
                    r
                } else {
                    step_reward(q)
                }
            })
            .sum()
    }
}
