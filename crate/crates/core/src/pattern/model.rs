use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{corrupt_train, PatternDataset};
use crate::corruption::{self, CorruptionKind, CorruptionSpec, Token, MISSING};
use crate::error::{Error, Result};
use crate::imputation::{impute_artificial_exact, ImputationMethod, ImputationSpec};
use crate::nn::{argmax, softmax_xent, Cache, Grads, Mlp, MlpShape, Optimizer, OptimizerKind};
use crate::rng;

/// Which inputs the held-out split is scored on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestInputs {
    Clean,
    Corrupted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternTrainConfig {
    pub feature_dim: usize,
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub test_inputs: TestInputs,
}

impl Default for PatternTrainConfig {
    fn default() -> Self {
        Self {
            feature_dim: 8192,
            hidden: [64, 16],
            epochs: 5,
            batch: 32,
            lr: 1e-2,
            optimizer: OptimizerKind::Adam,
            test_inputs: TestInputs::Clean,
        }
    }
}

const HASH_MUL: u64 = 0x9E37_79B9_7F4A_7C15;

/// Hashed bag of g-grams (binary presence). Windows containing a missing
/// token contribute nothing. For `g = 1` and `feature_dim` a power of two no
/// smaller than the vocabulary, the hash is collision-free.
pub fn featurize(tokens: &[Token], g: usize, feature_dim: usize) -> Vec<(u32, f32)> {
    let mut idx: Vec<u32> = tokens
        .windows(g)
        .filter(|w| !w.contains(&MISSING))
        .map(|w| {
            let key = w.iter().fold(0u64, |h, &t| h.wrapping_mul(0x100_0000_01B3).wrapping_add(t as u64 + 1));
            (key.wrapping_mul(HASH_MUL) % feature_dim as u64) as u32
        })
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx.into_iter().map(|i| (i, 1.0)).collect()
}

/// Corrupts and optionally imputes the training inputs, trains the classifier
/// and returns the normalised test score `2 (accuracy - 1/2)`.
pub fn train_eval(
    dataset: &PatternDataset,
    corruption: &CorruptionSpec,
    imputation: &ImputationSpec,
    config: &PatternTrainConfig,
    seed: u64,
) -> Result<f64> {
    corruption.validate()?;
    imputation.validate()?;
    if !corruption.kind.applies_to_tokens() {
        return Err(Error::InvalidParameter(format!("{:?} does not apply to token data", corruption.kind)));
    }
    let p = if corruption.kind == CorruptionKind::TokenMissing { corruption.p } else { 0.0 };
    let spec = &dataset.spec;
    let mut corrupt_rng = rng::stream(corruption.seed, "token-missing");
    let mut impute_rng = rng::stream(imputation.seed, "token-impute");

    let corrupted = corrupt_train(dataset, p, &mut corrupt_rng);
    let inputs: Vec<Vec<Token>> = match imputation.method {
        ImputationMethod::None => corrupted,
        ImputationMethod::Artificial => corrupted
            .iter()
            .zip(&dataset.train)
            .map(|(c, s)| impute_artificial_exact(c, &s.tokens, imputation.q, spec.vocab_size, &mut impute_rng))
            .collect::<Result<_>>()?,
        ImputationMethod::ContextFill => {
            return Err(Error::InvalidParameter("context fill applies to occupancy grids only".into()))
        }
    };

    let g = spec.pattern_length;
    let d = config.feature_dim;
    let features: Vec<Vec<(u32, f32)>> = inputs.iter().map(|t| featurize(t, g, d)).collect();
    let labels: Vec<usize> = dataset.train.iter().map(|s| s.label as usize).collect();

    let shape =
        MlpShape { input: d, hidden1: config.hidden[0], hidden2: config.hidden[1], output: 2, layer_norm: false };
    let mut net: Mlp<f32> = Mlp::new(shape, &mut rng::stream(seed, "pattern-init"));
    let mut opt = Optimizer::new(config.optimizer, shape.param_count(), None);
    let mut grads = Grads::new(shape);
    let mut cache = Cache::new(&shape);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut shuffle = rng::stream(seed, "pattern-shuffle");
    let mut d_out = [0.0f32; 2];

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(config.batch.max(1)) {
            grads.zero();
            let scale = 1.0 / chunk.len() as f32;
            for &i in chunk {
                net.forward_cached(&features[i], &mut cache)?;
                softmax_xent(&cache.out, labels[i], &mut d_out);
                d_out.iter_mut().for_each(|x| *x *= scale);
                net.backward(&features[i], &cache, &d_out, &mut grads);
            }
            opt.step(&mut net, &mut grads, config.lr as f32);
        }
    }

    let mut test_rng = rng::stream(corruption.seed, "token-missing-test");
    let mut correct = 0usize;
    for s in &dataset.test {
        let tokens = match config.test_inputs {
            TestInputs::Clean => s.tokens.clone(),
            TestInputs::Corrupted => corruption::apply_token_missing(&s.tokens, p, &mut test_rng),
        };
        net.forward_cached(&featurize(&tokens, g, d), &mut cache)?;
        if argmax(&cache.out) == s.label as usize {
            correct += 1;
        }
    }
    let acc = correct as f64 / dataset.test.len().max(1) as f64;
    Ok(2.0 * (acc - 0.5))
}
