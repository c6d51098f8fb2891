use super::{schedule_value, DqnAgent, ReplayBuffer, TrainConfig, Transition};
use crate::corruption::CorruptionSpec;
use crate::error::Result;
use crate::imputation::{ImputationSpec, SignalView};
use crate::rng;
use crate::sim::{DemandProfile, EpisodeRecorder, Intersection, PhaseAction, DECISION_SECONDS};

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub agent: DqnAgent,
    /// True episode return of every training episode.
    pub episode_returns: Vec<f64>,
    /// True return of each greedy evaluation episode.
    pub eval_returns: Vec<f64>,
    pub eval_mean: f64,
}

fn episode_env(
    demand: &DemandProfile,
    corruption: &CorruptionSpec,
    seed: u64,
    label: &str,
    ep: usize,
) -> Result<Intersection> {
    let traffic = rng::mix(&[seed, rng::label_hash(label), ep as u64]);
    let equip = rng::mix(&[corruption.seed, rng::label_hash(label), ep as u64]);
    Intersection::with_equipage(demand.clone(), traffic, corruption.equipage(equip))
}

/// Trains a double-DQN agent. Corruption and imputation act on what the agent
/// sees; returns are always measured on the simulator's true queues.
///
/// `seed` fixes traffic, network initialisation and exploration; the
/// corruption and imputation seeds fix their own noise.
pub fn train(
    demand: &DemandProfile,
    config: &TrainConfig,
    corruption: &CorruptionSpec,
    imputation: &ImputationSpec,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut view = SignalView::new(*corruption, *imputation)?;
    let mut init_rng = rng::stream(seed, "init");
    let mut explore = rng::stream(seed, "explore");
    let mut sampler = rng::stream(seed, "replay");
    let mut agent = DqnAgent::new(config, &mut init_rng);
    let mut buffer = ReplayBuffer::new(config.buffer_size);

    let decisions = demand.horizon / DECISION_SECONDS;
    let total_steps = (config.episodes * decisions) as f64;
    let mut step = 0usize;
    let mut episode_returns = Vec::with_capacity(config.episodes);

    for ep in 0..config.episodes {
        let mut env = episode_env(demand, corruption, seed, "train", ep)?;
        view.reseed(rng::mix(&[1, ep as u64]));
        let mut rec = EpisodeRecorder::default();
        let mut obs = view.observe(&env);
        while !env.is_done() {
            let progress = step as f64 / total_steps;
            let eps = schedule_value(config.eps_init, config.eps_final, progress, config.decay_fraction);
            let lr = schedule_value(config.lr_init, config.lr_final, progress, config.decay_fraction);
            let action = agent.select_action(&obs, eps, &mut explore);
            let phase = PhaseAction::ALL[action];
            let out = env.decision_step(phase)?;
            rec.record(phase, &out);
            let reward = view.reward(&out);
            let next = view.observe(&env);
            buffer.push(Transition {
                state: obs,
                action: action as u8,
                reward: reward as f32,
                next_state: next,
                done: out.done,
            });
            obs = next;
            step += 1;
            if buffer.len() >= config.learning_starts.max(1) && step.is_multiple_of(config.update_every) {
                let batch = buffer.sample(config.batch, &mut sampler);
                agent.update(&batch, lr)?;
            }
        }
        episode_returns.push(rec.finish().episode_return);
    }

    let eval_returns = evaluate_policy(&agent, demand, corruption, imputation, seed, config.eval_episodes)?;
    let eval_mean = eval_returns.iter().sum::<f64>() / eval_returns.len().max(1) as f64;
    Ok(TrainOutcome { agent, episode_returns, eval_returns, eval_mean })
}

/// Greedy returns over `episodes` fresh episodes seen through the same
/// corruption and imputation.
pub fn evaluate_policy(
    agent: &DqnAgent,
    demand: &DemandProfile,
    corruption: &CorruptionSpec,
    imputation: &ImputationSpec,
    seed: u64,
    episodes: usize,
) -> Result<Vec<f64>> {
    let mut view = SignalView::new(*corruption, *imputation)?;
    let mut out = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut env = episode_env(demand, corruption, seed, "eval", ep)?;
        view.reseed(rng::mix(&[2, ep as u64]));
        let mut rec = EpisodeRecorder::default();
        while !env.is_done() {
            let obs = view.observe(&env);
            let phase = PhaseAction::ALL[agent.greedy_action(&obs)];
            let res = env.decision_step(phase)?;
            rec.record(phase, &res);
        }
        out.push(rec.finish().episode_return);
    }
    Ok(out)
}
