use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;

use super::{huber_td_gradient, huber_td_loss, TrainConfig, Transition};
use crate::error::Result;
use crate::nn::{argmax, finite_diff_check, Cache, GradCheckReport, Grads, Mlp};
use crate::rng;
use crate::sim::{DemandProfile, Intersection, PhaseAction};

/// Transitions from a randomly driven intersection, after `warmup`
/// decisions so that queues have formed.
pub fn sample_transitions(seed: u64, warmup: usize, count: usize) -> Result<Vec<Transition>> {
    let mut env = Intersection::new(DemandProfile::default(), seed)?;
    let mut pick = rng::stream(seed, "gradcheck-actions");
    let mut out = Vec::with_capacity(count);
    let mut obs = env.observe();
    let mut k = 0;
    while out.len() < count && !env.is_done() {
        let action = pick.random_range(0..PhaseAction::COUNT);
        let res = env.decision_step(PhaseAction::ALL[action])?;
        let next = env.observe();
        if k >= warmup {
            out.push(Transition {
                state: obs,
                action: action as u8,
                reward: res.reward as f32,
                next_state: next,
                done: res.done,
            });
        }
        obs = next;
        k += 1;
    }
    Ok(out)
}

/// Finite-difference check of the double-DQN Huber loss gradient in double
/// precision on the architecture of `config`, with targets from a separate
/// target network held fixed.
pub fn dqn_gradcheck(config: &TrainConfig, seed: u64, batch: usize, samples: usize, h: f64) -> Result<GradCheckReport> {
    let shape = config.shape();
    let mut init = rng::stream(seed, "gradcheck-init");
    let mut online: Mlp<f64> = Mlp::new(shape, &mut init);
    for g in online.ln_gain.iter_mut() {
        *g += init.random_range(-0.2..0.2);
    }
    for b in online.ln_bias.iter_mut() {
        *b += init.random_range(-0.2..0.2);
    }
    let target: Mlp<f64> = Mlp::new(shape, &mut init);

    let transitions = sample_transitions(seed, 100, batch)?;
    let refs: Vec<&Transition> = transitions.iter().collect();
    let targets: Vec<f64> = transitions
        .iter()
        .map(|t| -> Result<f64> {
            if t.done {
                return Ok(t.reward as f64);
            }
            let next: Vec<(u32, f64)> = t.next_state.sparse().into_iter().map(|(i, v)| (i, v as f64)).collect();
            let a = argmax(&online.forward(&next)?);
            Ok(t.reward as f64 + config.gamma * target.forward(&next)?[a])
        })
        .collect::<Result<_>>()?;

    let mut grads = Grads::new(shape);
    let mut cache = Cache::new(&shape);
    huber_td_gradient(&online, &refs, &targets, &mut grads, &mut cache)?;
    let loss = |net: &Mlp<f64>| {
        let value = huber_td_loss(net, &refs, &targets).expect("inputs fit the network");
        (value, region(net, &refs, &targets))
    };
    Ok(finite_diff_check(&online, &grads, loss, samples, h, &mut rng::stream(seed, "gradcheck-pick")))
}

/// Signature of the piecewise-smooth region of the loss: ReLU activity and
/// Huber branch of every sample.
fn region(net: &Mlp<f64>, batch: &[&Transition], targets: &[f64]) -> u64 {
    let mut hasher = DefaultHasher::new();
    let mut cache = Cache::new(&net.shape);
    for (t, &y) in batch.iter().zip(targets) {
        let state: Vec<(u32, f64)> = t.state.sparse().into_iter().map(|(i, v)| (i, v as f64)).collect();
        net.forward_cached(&state, &mut cache).expect("inputs fit the network");
        cache.active_units().for_each(|a| a.hash(&mut hasher));
        ((cache.out[t.action as usize] - y).abs() <= 1.0).hash(&mut hasher);
    }
    hasher.finish()
}
