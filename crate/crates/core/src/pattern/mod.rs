//! Synthetic pattern-recognition task.
//!
//! Each of `M` patterns is a fixed g-gram of pattern-only tokens with a class
//! bit. Pattern `i` is planted `Poisson(λ_i)` times across the training set;
//! a sample's label is the parity of the class bits of the patterns it holds.
//! Test samples hold exactly one pattern each, so a classifier that never saw
//! a pattern scores at chance on it and the normalised score tracks the
//! fraction of recovered patterns.

mod io;
mod model;

pub use io::{read_dataset, write_dataset};
pub use model::{featurize, train_eval, PatternTrainConfig, TestInputs};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corruption::{self, Token, MISSING};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub vocab_size: u32,
    pub n_patterns: usize,
    pub pattern_length: usize,
    /// Expected clean occurrences of every pattern across the training set.
    pub rate: f64,
    /// Per-pattern rates overriding `rate` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    /// Background text is drawn uniformly from this many tokens following
    /// the pattern tokens; the rest of the vocabulary never occurs in clean data.
    pub background_vocab: u32,
    pub sample_length: usize,
    pub n_samples: usize,
    /// Test samples generated per pattern.
    pub test_per_pattern: usize,
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self {
            vocab_size: 8192,
            n_patterns: 256,
            pattern_length: 1,
            rate: 4.0,
            rates: None,
            background_vocab: 8,
            sample_length: 16,
            n_samples: 1000,
            test_per_pattern: 4,
        }
    }
}

impl PatternSpec {
    pub fn rate_of(&self, i: usize) -> f64 {
        self.rates.as_ref().map_or(self.rate, |r| r[i])
    }

    /// First token id available to background text.
    pub fn background_start(&self) -> u32 {
        (self.n_patterns * self.pattern_length) as u32
    }

    /// The dataset enlarged by `factor`: more samples at the same per-sample
    /// pattern frequency, so every rate scales too.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.n_samples = ((self.n_samples as f64) * factor).round() as usize;
        s.rate *= factor;
        s.rates = self.rates.as_ref().map(|r| r.iter().map(|x| x * factor).collect());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.pattern_length == 0 || self.n_patterns == 0 {
            return bad("pattern_length and n_patterns must be positive".into());
        }
        if self.sample_length < self.pattern_length {
            return bad("samples must be at least one pattern long".into());
        }
        if self.background_vocab == 0 || self.background_start() + self.background_vocab > self.vocab_size {
            return bad(format!(
                "vocabulary {} cannot hold {} pattern and {} background tokens",
                self.vocab_size,
                self.background_start(),
                self.background_vocab
            ));
        }
        if let Some(r) = &self.rates {
            if r.len() != self.n_patterns {
                return bad(format!("{} rates for {} patterns", r.len(), self.n_patterns));
            }
        }
        if (0..self.n_patterns).any(|i| !(self.rate_of(i) >= 0.0)) {
            return bad("pattern rates must be non-negative".into());
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        Ok(())
    }

    /// Tokens of pattern `i`.
    pub fn pattern_tokens(&self, i: usize) -> Vec<Token> {
        let g = self.pattern_length;
        ((i * g) as u32..((i + 1) * g) as u32).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plant {
    pub pattern: usize,
    pub sample: usize,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tokens: Vec<Token>,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternDataset {
    pub spec: PatternSpec,
    pub class_bits: Vec<u8>,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Every planted training occurrence.
    pub manifest: Vec<Plant>,
}

impl PatternDataset {
    /// Planted occurrence count of each pattern.
    pub fn plant_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.spec.n_patterns];
        for p in &self.manifest {
            c[p.pattern] += 1;
        }
        c
    }

    /// Training labels recomputed from the manifest and class bits.
    pub fn labels_from_manifest(&self) -> Vec<u8> {
        label_rule(self.train.len(), &self.manifest, &self.class_bits)
    }
}

fn label_rule(n: usize, manifest: &[Plant], class_bits: &[u8]) -> Vec<u8> {
    let mut present: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in manifest {
        if !present[p.sample].contains(&p.pattern) {
            present[p.sample].push(p.pattern);
        }
    }
    present.iter().map(|ps| ps.iter().fold(0u8, |acc, &i| acc ^ class_bits[i])).collect()
}

/// Uniform non-overlapping start positions for `k` g-grams in a length-`len`
/// sample.
fn place<R: Rng>(k: usize, g: usize, len: usize, rng: &mut R) -> Vec<usize> {
    let free = len - k * (g - 1);
    let mut starts = rand::seq::index::sample(rng, free, k).into_vec();
    starts.sort_unstable();
    starts.iter().enumerate().map(|(j, &s)| s + j * (g - 1)).collect()
}

fn background<R: Rng>(spec: &PatternSpec, rng: &mut R) -> Vec<Token> {
    let lo = spec.background_start();
    (0..spec.sample_length).map(|_| rng.random_range(lo..lo + spec.background_vocab)).collect()
}

pub fn generate(spec: &PatternSpec, seed: u64) -> Result<PatternDataset> {
    spec.validate()?;
    let g = spec.pattern_length;
    let mut rng = rng::stream(seed, "pattern-dataset");

    let mut class_bits: Vec<u8> = (0..spec.n_patterns).map(|i| (i % 2) as u8).collect();
    class_bits.shuffle(&mut rng);

    let mut plants_of: Vec<usize> = Vec::new();
    for i in 0..spec.n_patterns {
        let lambda = spec.rate_of(i);
        let k = if lambda > 0.0 {
            Poisson::new(lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(&mut rng) as usize
        } else {
            0
        };
        plants_of.extend(std::iter::repeat_n(i, k));
    }
    plants_of.shuffle(&mut rng);

    let n = spec.n_samples;
    let per_sample = spec.sample_length / g;
    if plants_of.len() > n * per_sample {
        return Err(Error::InfeasiblePacking(format!(
            "{} occurrences do not fit in {n} samples of {per_sample} slots",
            plants_of.len()
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut in_sample: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, &pat) in plants_of.iter().enumerate() {
        in_sample[order[j % n]].push(pat);
    }

    let mut train = Vec::with_capacity(n);
    let mut manifest = Vec::with_capacity(plants_of.len());
    for (s, pats) in in_sample.iter().enumerate() {
        let mut tokens = background(spec, &mut rng);
        for (&pos, &pat) in place(pats.len(), g, spec.sample_length, &mut rng).iter().zip(pats) {
            tokens[pos..pos + g].copy_from_slice(&spec.pattern_tokens(pat));
            manifest.push(Plant { pattern: pat, sample: s, position: pos });
        }
        train.push(Sample { tokens, label: 0 });
    }
    for (s, l) in train.iter_mut().zip(label_rule(n, &manifest, &class_bits)) {
        s.label = l;
    }

    let mut test = Vec::with_capacity(spec.n_patterns * spec.test_per_pattern);
    for i in 0..spec.n_patterns {
        for _ in 0..spec.test_per_pattern {
            let mut tokens = background(spec, &mut rng);
            let pos = rng.random_range(0..=spec.sample_length - g);
            tokens[pos..pos + g].copy_from_slice(&spec.pattern_tokens(i));
            test.push(Sample { tokens, label: class_bits[i] });
        }
    }
    Ok(PatternDataset { spec: spec.clone(), class_bits, train, test, manifest })
}

/// Probability that a pattern with rate `λ` keeps at least one intact
/// occurrence when each token goes missing with probability `p`:
/// `1 - exp(-λ (1-p)^g)`.
pub fn analytic_recovery(lambda: f64, p: f64, g: usize) -> f64 {
    let survive = (1.0 - p).powi(g as i32);
    1.0 - (-lambda * survive).exp()
}

/// Empirical per-pattern recovery frequency under token-missing corruption of
/// the planted occurrences, over `trials` independent corruptions.
pub fn mc_recovery_oracle(dataset: &PatternDataset, p: f64, trials: usize, rng: &mut Stream) -> Vec<f64> {
    let g = dataset.spec.pattern_length;
    let mut hits = vec![0usize; dataset.spec.n_patterns];
    let mut by_pattern: Vec<usize> = vec![0; dataset.spec.n_patterns];
    for pl in &dataset.manifest {
        by_pattern[pl.pattern] += 1;
    }
    for _ in 0..trials.max(1) {
        for (i, &k) in by_pattern.iter().enumerate() {
            let survived = (0..k).any(|_| (0..g).all(|_| rng.random::<f64>() >= p));
            if survived {
                hits[i] += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / trials.max(1) as f64).collect()
}

/// Applies token-missing corruption to every training sample.
pub fn corrupt_train(dataset: &PatternDataset, p: f64, rng: &mut Stream) -> Vec<Vec<Token>> {
    dataset.train.iter().map(|s| corruption::apply_token_missing(&s.tokens, p, rng)).collect()
}

/// True if any token is the missing sentinel.
pub fn has_missing(tokens: &[Token]) -> bool {
    tokens.contains(&MISSING)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        assert_eq!(analytic_recovery(3.0, 1.0, 1), 0.0);
        assert!((analytic_recovery(3.517, 0.0, 1) - 0.970_3).abs() < 1e-4);
        assert!((analytic_recovery(7.493, 0.5, 1) - 0.976_4).abs() < 1e-4);
        // g = 2 at p = 0.5: survival 1/4
        assert!((analytic_recovery(4.0, 0.5, 2) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_gives_no_plants_and_constant_labels() {
        let spec = PatternSpec { rate: 0.0, n_samples: 50, ..PatternSpec::default() };
        let d = generate(&spec, 1).unwrap();
        assert!(d.manifest.is_empty());
        assert!(d.train.iter().all(|s| s.label == 0));
    }

    #[test]
    fn labels_replay_from_manifest() {
        let spec =
            PatternSpec { rate: 12.0, n_samples: 300, n_patterns: 40, pattern_length: 2, ..PatternSpec::default() };
        let d = generate(&spec, 3).unwrap();
        let labels: Vec<u8> = d.train.iter().map(|s| s.label).collect();
        assert_eq!(d.labels_from_manifest(), labels);
        for pl in &d.manifest {
            assert_eq!(&d.train[pl.sample].tokens[pl.position..pl.position + 2], &spec.pattern_tokens(pl.pattern)[..]);
        }
    }

    #[test]
    fn infeasible_packing_rejected() {
        let spec = PatternSpec {
            rate: 50.0,
            n_samples: 10,
            n_patterns: 10,
            sample_length: 4,
            pattern_length: 2,
            ..PatternSpec::default()
        };
        assert!(matches!(generate(&spec, 0), Err(Error::InfeasiblePacking(_))));
    }

    #[test]
    fn oracle_extremes() {
        let d = generate(&PatternSpec { n_samples: 400, ..PatternSpec::default() }, 5).unwrap();
        let mut r = rng::stream(0, "oracle");
        let counts = d.plant_counts();
        let full = mc_recovery_oracle(&d, 0.0, 3, &mut r);
        for (f, c) in full.iter().zip(&counts) {
            assert_eq!(*f, if *c > 0 { 1.0 } else { 0.0 });
        }
        assert!(mc_recovery_oracle(&d, 1.0, 3, &mut r).iter().all(|&f| f == 0.0));
    }
}
