//! Corruption processes. They act on what the learner sees (observations,
//! rewards, token sequences); simulator state is never touched.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sim::{Equipage, Observation, CELLS_PER_LANE, LANES};

pub type Token = u32;

/// Sentinel marking a missing token.
pub const MISSING: Token = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    None,
    VehicleMissing,
    CellNoise,
    MaskRegion,
    TokenMissing,
}

impl CorruptionKind {
    pub fn applies_to_signal(self) -> bool {
        matches!(self, Self::None | Self::VehicleMissing | Self::CellNoise | Self::MaskRegion)
    }

    pub fn applies_to_tokens(self) -> bool {
        matches!(self, Self::None | Self::TokenMissing)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn none() -> Self {
        Self { kind: CorruptionKind::None, p: 0.0, seed: 0 }
    }

    pub fn new(kind: CorruptionKind, p: f64, seed: u64) -> Result<Self> {
        let s = Self { kind, p, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!("corruption ratio {} outside [0, 1]", self.p)));
        }
        Ok(())
    }

    /// Equipage model for the simulator: under vehicle-missing each vehicle
    /// is detectable with probability `1 - p`.
    pub fn equipage(&self, seed: u64) -> Equipage {
        match self.kind {
            CorruptionKind::VehicleMissing => Equipage::new(1.0 - self.p, seed),
            _ => Equipage::new(1.0, seed),
        }
    }
}

/// Observation seen by roadside sensing when only equipped vehicles are
/// detectable. Phase fields are exact.
pub fn apply_vehicle_missing(env: &crate::sim::Intersection) -> Observation {
    env.observe_detected()
}

/// Replaces each occupancy cell by a fair coin with probability `p`, and the
/// reward by a uniform draw on [-1, 1] with probability `p`.
///
/// Two uniforms are consumed per cell and two for the reward whatever `p` is,
/// so runs at different ratios share their random numbers.
pub fn apply_cell_noise(obs: &Observation, reward: f64, p: f64, rng: &mut Stream) -> (Observation, f64) {
    let mut out = *obs;
    for idx in 0..LANES * CELLS_PER_LANE {
        let hit = rng.random::<f64>() < p;
        let bit = rng.random::<bool>();
        if hit {
            out.occupancy.set(idx, bit);
        }
    }
    let hit = rng.random::<f64>() < p;
    let r = rng.random_range(-1.0..=1.0);
    (out, if hit { r } else { reward })
}

/// First masked cell index for ratio `p`: cells `ceil((1-p)*80)..80` are hidden.
pub fn mask_cutoff(p: f64) -> usize {
    let x = (1.0 - p.clamp(0.0, 1.0)) * CELLS_PER_LANE as f64;
    // Guard against 0.7*80 = 55.999...
    ((x - 1e-9).ceil().max(0.0) as usize).min(CELLS_PER_LANE)
}

/// Hides the farthest `400 p` meters of every lane.
pub fn apply_mask_region(obs: &Observation, p: f64) -> Observation {
    let cutoff = mask_cutoff(p);
    let mut out = *obs;
    for lane in 0..LANES {
        for cell in cutoff..CELLS_PER_LANE {
            out.occupancy.set_cell(lane, cell, false);
        }
    }
    out
}

/// Replaces each token by [`MISSING`] with probability `p`. One uniform is
/// consumed per token.
pub fn apply_token_missing(tokens: &[Token], p: f64, rng: &mut Stream) -> Vec<Token> {
    tokens.iter().map(|&t| if rng.random::<f64>() < p { MISSING } else { t }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sim::{Occupancy, PhaseAction};

    fn sample_obs() -> Observation {
        let mut occ = Occupancy::default();
        for i in (0..960).step_by(7) {
            occ.set(i, true);
        }
        Observation::new(occ, PhaseAction::NsLeft, 42)
    }

    #[test]
    fn mask_cutoffs() {
        assert_eq!(mask_cutoff(0.0), 80);
        assert_eq!(mask_cutoff(1.0), 0);
        assert_eq!(mask_cutoff(0.3), 56);
        assert_eq!(mask_cutoff(0.5), 40);
        assert_eq!(mask_cutoff(0.001), 80);
        assert_eq!(mask_cutoff(0.01), 80);
        assert_eq!(mask_cutoff(0.0126), 79);
    }

    #[test]
    fn mask_p03_zeroes_cells_56_to_79() {
        let mut occ = Occupancy::default();
        for i in 0..960 {
            occ.set(i, true);
        }
        let obs = Observation::new(occ, PhaseAction::EwLeft, 0);
        let m = apply_mask_region(&obs, 0.3);
        for lane in 0..LANES {
            for cell in 0..80 {
                assert_eq!(m.occupancy.get_cell(lane, cell), cell < 56);
            }
        }
    }

    #[test]
    fn zero_ratio_is_identity() {
        let obs = sample_obs();
        let mut r = rng::stream(1, "noise");
        assert_eq!(apply_cell_noise(&obs, 0.25, 0.0, &mut r), (obs, 0.25));
        assert_eq!(apply_mask_region(&obs, 0.0), obs);
        let toks = vec![1, 2, 3, 4];
        assert_eq!(apply_token_missing(&toks, 0.0, &mut r), toks);
    }

    #[test]
    fn full_ratio() {
        let obs = sample_obs();
        assert_eq!(apply_mask_region(&obs, 1.0).occupancy.count(), 0);
        let mut r = rng::stream(1, "tok");
        assert!(apply_token_missing(&[5; 20], 1.0, &mut r).iter().all(|&t| t == MISSING));
        let (noisy, rew) = apply_cell_noise(&obs, 0.25, 1.0, &mut r);
        assert_eq!(noisy.phase, obs.phase);
        assert_eq!(noisy.phase_duration, obs.phase_duration);
        assert!((-1.0..=1.0).contains(&rew));
    }

    #[test]
    fn spec_json_shape() {
        let s: CorruptionSpec = serde_json::from_str(r#"{"kind": "cell_noise", "p": 0.2, "seed": 7}"#).unwrap();
        assert_eq!(s, CorruptionSpec { kind: CorruptionKind::CellNoise, p: 0.2, seed: 7 });
        assert!(CorruptionSpec::new(CorruptionKind::MaskRegion, 1.5, 0).is_err());
    }
}
