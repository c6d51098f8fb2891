//! Double DQN agent over the signal-control observation.

mod check;
mod io;
mod replay;
mod train;

pub use check::{dqn_gradcheck, sample_transitions};
pub use io::{load_params, save_params, ParamsHeader};
pub use replay::{ReplayBuffer, Transition};
pub use train::{evaluate_policy, train, TrainOutcome};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{argmax, huber, huber_grad, Cache, Grads, Mlp, MlpShape, Optimizer, OptimizerKind, Real};
use crate::rng::Stream;
use crate::sim::{Observation, PhaseAction, OBS_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch: usize,
    pub gamma: f64,
    pub target_update: usize,
    pub eps_init: f64,
    pub eps_final: f64,
    pub lr_init: f64,
    pub lr_final: f64,
    /// Fraction of training over which epsilon and lr decay linearly.
    pub decay_fraction: f64,
    pub buffer_size: usize,
    pub hidden: [usize; 2],
    pub layer_norm: bool,
    pub grad_clip: f64,
    pub optimizer: OptimizerKind,
    /// Transitions collected before the first update.
    pub learning_starts: usize,
    /// Decisions between consecutive updates.
    pub update_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 50,
            batch: 256,
            gamma: 0.98,
            target_update: 10,
            eps_init: 1.0,
            eps_final: 0.01,
            lr_init: 1e-3,
            lr_final: 1e-4,
            decay_fraction: 0.8,
            buffer_size: 10_000,
            hidden: [256, 48],
            layer_norm: true,
            grad_clip: 10.0,
            optimizer: OptimizerKind::Sgd,
            learning_starts: 500,
            update_every: 1,
            eval_episodes: 5,
        }
    }
}

impl TrainConfig {
    /// Short-budget settings used by the sweeps: Adam, small batches and a
    /// short warm-up so an agent trains in well under a minute.
    pub fn desk() -> Self {
        Self { episodes: 15, batch: 32, optimizer: OptimizerKind::Adam, learning_starts: 200, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.eps_final > self.eps_init || self.lr_final > self.lr_init {
            return bad("schedules must be non-increasing");
        }
        if !(0.0..=1.0).contains(&self.eps_init) || !(0.0..=1.0).contains(&self.eps_final) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.decay_fraction > 0.0 && self.decay_fraction <= 1.0) {
            return bad("decay_fraction must lie in (0, 1]");
        }
        if self.episodes == 0 || self.batch == 0 || self.buffer_size == 0 || self.target_update == 0 {
            return bad("episodes, batch, buffer_size and target_update must be positive");
        }
        if self.update_every == 0 || self.hidden.contains(&0) {
            return bad("update_every and hidden sizes must be positive");
        }
        Ok(())
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape {
            input: OBS_DIM,
            hidden1: self.hidden[0],
            hidden2: self.hidden[1],
            output: PhaseAction::COUNT,
            layer_norm: self.layer_norm,
        }
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&json)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Linear interpolation from `init` to `fin` over the first `decay_fraction`
/// of training, constant afterwards.
pub fn schedule_value(init: f64, fin: f64, progress: f64, decay_fraction: f64) -> f64 {
    let frac = (progress / decay_fraction).clamp(0.0, 1.0);
    init + (fin - init) * frac
}

#[derive(Clone, Debug)]
pub struct DqnAgent {
    pub online: Mlp<f32>,
    pub target: Mlp<f32>,
    pub gamma: f64,
    pub target_update: usize,
    optimizer: Optimizer<f32>,
    grads: Grads<f32>,
    count: usize,
    caches: [Cache<f32>; 3],
}

/// Per-sample quantities of a double-DQN update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdTarget {
    pub q_sa: f64,
    pub next_action: usize,
    pub target: f64,
}

impl DqnAgent {
    pub fn new(config: &TrainConfig, rng: &mut Stream) -> Self {
        let online = Mlp::new(config.shape(), rng);
        Self::from_network(online, config)
    }

    pub fn from_network(online: Mlp<f32>, config: &TrainConfig) -> Self {
        let shape = online.shape;
        Self {
            target: online.clone(),
            optimizer: Optimizer::new(config.optimizer, shape.param_count(), Some(config.grad_clip as f32)),
            grads: Grads::new(shape),
            online,
            gamma: config.gamma,
            target_update: config.target_update,
            count: 0,
            caches: [Cache::new(&shape), Cache::new(&shape), Cache::new(&shape)],
        }
    }

    /// Number of updates performed so far.
    pub fn update_count(&self) -> usize {
        self.count
    }

    pub fn q_values(&self, obs: &Observation) -> Vec<f32> {
        self.online.forward(&obs.sparse()).expect("observation fits the network")
    }

    pub fn greedy_action(&self, obs: &Observation) -> usize {
        argmax(&self.q_values(obs))
    }

    /// Epsilon-greedy action. One uniform is always drawn; a second only when
    /// exploring.
    pub fn select_action(&self, obs: &Observation, eps: f64, rng: &mut Stream) -> usize {
        if rng.random::<f64>() < eps {
            rng.random_range(0..PhaseAction::COUNT)
        } else {
            self.greedy_action(obs)
        }
    }

    /// Double-DQN target for one transition using the current networks.
    pub fn td_target(&mut self, t: &Transition) -> Result<TdTarget> {
        let [c_s, c_next, c_tgt] = &mut self.caches;
        self.online.forward_cached(&t.state.sparse(), c_s)?;
        let next = t.next_state.sparse();
        self.online.forward_cached(&next, c_next)?;
        let next_action = argmax(&c_next.out);
        self.target.forward_cached(&next, c_tgt)?;
        let bootstrap = if t.done { 0.0 } else { self.gamma * c_tgt.out[next_action] as f64 };
        Ok(TdTarget { q_sa: c_s.out[t.action as usize] as f64, next_action, target: t.reward as f64 + bootstrap })
    }

    /// Accumulates the mean Huber loss gradient of `batch` into the internal
    /// buffers and returns the loss. Parameters are not modified.
    fn accumulate(&mut self, batch: &[&Transition]) -> Result<f64> {
        let targets = batch.iter().map(|t| self.td_target(t).map(|td| td.target)).collect::<Result<Vec<_>>>()?;
        huber_td_gradient(&self.online, batch, &targets, &mut self.grads, &mut self.caches[0])
    }

    /// One optimizer step on the mean Huber TD loss of `batch`. The target
    /// network is refreshed when the update counter is a multiple of
    /// `target_update`, after which the counter advances.
    pub fn update(&mut self, batch: &[&Transition], lr: f64) -> Result<f64> {
        let loss = self.accumulate(batch)?;
        self.optimizer.step(&mut self.online, &mut self.grads, lr as f32);
        if self.count.is_multiple_of(self.target_update) {
            self.target.clone_from(&self.online);
        }
        self.count += 1;
        Ok(loss)
    }

    /// Gradient of the mean Huber TD loss (for verification).
    pub fn loss_gradient(&mut self, batch: &[&Transition]) -> Result<(f64, Grads<f32>)> {
        let loss = self.accumulate(batch)?;
        Ok((loss, self.grads.clone()))
    }
}

/// Mean Huber loss of `Q(s, a) - target` over `batch` with the targets held
/// fixed; its gradient with respect to `online` is written to `grads`.
pub fn huber_td_gradient<T: Real>(
    online: &Mlp<T>,
    batch: &[&Transition],
    targets: &[f64],
    grads: &mut Grads<T>,
    cache: &mut Cache<T>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if targets.len() != batch.len() {
        return Err(Error::Misaligned(batch.len(), targets.len()));
    }
    grads.zero();
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut d_out = vec![T::zero(); online.shape.output];
    for (t, &y) in batch.iter().zip(targets) {
        let state: Vec<(u32, T)> = t.state.sparse().into_iter().map(|(i, v)| (i, T::lit(v as f64))).collect();
        online.forward_cached(&state, cache)?;
        let a = t.action as usize;
        let residual = cache.out[a].to_f64().unwrap_or(f64::NAN) - y;
        loss += huber(residual);
        d_out.iter_mut().for_each(|d| *d = T::zero());
        d_out[a] = T::lit(huber_grad(residual) / n);
        online.backward(&state, cache, &d_out, grads);
    }
    Ok(loss / n)
}

/// Mean Huber TD loss with fixed targets (no gradient).
pub fn huber_td_loss<T: Real>(online: &Mlp<T>, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let state: Vec<(u32, T)> = t.state.sparse().into_iter().map(|(i, v)| (i, T::lit(v as f64))).collect();
        let q = online.forward(&state)?;
        loss += huber(q[t.action as usize].to_f64().unwrap_or(f64::NAN) - y);
    }
    Ok(loss / batch.len().max(1) as f64)
}
