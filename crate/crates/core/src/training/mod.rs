//! Supervised pretraining, actor-critic fine-tuning, checkpoints and the
//! synthetic Markov dataset.

mod config;
mod synth;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shotwright_nn::{Adam, Checkpoint, Section, Tape};

pub use config::TrainConfig;
pub use synth::{generate_markov_dataset, transition_maps, MarkovConfig, TransitionMaps};

use crate::attributes::{AttributeVector, Episode, HORIZON, NUM_ATTRIBUTES};
use crate::error::{Result, ShotError};
use crate::policy::{
    actor_loss_var, critic_loss_var, initial_state, rollout_batch, supervised_loss_var, ActionRule, ActorConfig,
    ActorNetwork, CriticConfig, CriticNetwork,
};
use crate::representation::{advance_context, ContextState};

/// Random streams derived from the config seed, one per consumer.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum SeedStream {
    Init = 0,
    Pretrain = 1,
    Rl = 2,
    Representation = 3,
    Evaluation = 4,
}

pub fn seeded_rng(seed: u64, stream: SeedStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// A fresh actor and critic with default architectures, initialized from `seed`.
pub fn init_networks(seed: u64) -> Result<(ActorNetwork, CriticNetwork)> {
    let mut rng = seeded_rng(seed, SeedStream::Init);
    let actor = ActorNetwork::new(ActorConfig::default(), &mut rng)?;
    let critic = CriticNetwork::new(CriticConfig::default(), &mut rng)?;
    Ok((actor, critic))
}

/// `(state, target)` pairs: the first step of every episode, plus steps
/// 1..4 reached by advancing with ground truth when `teacher_forcing` is set.
pub fn supervised_samples(episodes: &[Episode], teacher_forcing: bool) -> (Vec<ContextState>, Vec<AttributeVector>) {
    let steps = if teacher_forcing { HORIZON } else { 1 };
    let mut states = Vec::with_capacity(episodes.len() * steps);
    let mut targets = Vec::with_capacity(episodes.len() * steps);
    for ep in episodes {
        let mut state = initial_state(ep);
        for t in 0..steps {
            if t > 0 {
                state = advance_context(&state, &ep.targets[t - 1].attributes);
            }
            states.push(state.clone());
            targets.push(ep.targets[t].attributes);
        }
    }
    (states, targets)
}

fn ensure_finite(store: &shotwright_nn::ParamStore, what: &str, at: usize) -> Result<()> {
    if store.all_finite() {
        Ok(())
    } else {
        Err(ShotError::Diverged(format!("{what} parameters became non-finite at step {at}")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PretrainLog {
    /// Mean summed cross-entropy over the eight heads, per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minimizes the summed per-head cross-entropy of the actor on the
/// episodes' first targets (and later ones under teacher forcing).
pub fn pretrain_supervised(actor: &mut ActorNetwork, episodes: &[Episode], config: &TrainConfig) -> Result<PretrainLog> {
    config.validate()?;
    if episodes.is_empty() {
        return Err(ShotError::Empty("pretraining dataset"));
    }
    let (states, targets) = supervised_samples(episodes, config.teacher_forcing);
    let mut rng = seeded_rng(config.seed, SeedStream::Pretrain);
    let adam = Adam::new(config.actor_lr);
    let mut order: Vec<usize> = (0..states.len()).collect();
    let mut log = PretrainLog::default();
    let mut updates = 0;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch_states: Vec<ContextState> = chunk.iter().map(|&i| states[i].clone()).collect();
            let batch_targets: Vec<AttributeVector> = chunk.iter().map(|&i| targets[i]).collect();
            let mut tape = Tape::new();
            let loss = supervised_loss_var(actor, &mut tape, actor.store(), &batch_states, &batch_targets)?;
            total += tape.value(loss).item() * chunk.len() as f64;
            tape.backward(loss, actor.store_mut())?;
            adam.step(actor.store_mut());
            updates += 1;
            ensure_finite(actor.store(), "actor", updates)?;
        }
        log.epoch_losses.push(total / states.len() as f64);
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlIteration {
    /// Mean reward per step, per channel.
    pub mean_reward: [f64; NUM_ATTRIBUTES],
    /// Mean over episodes of the summed reward across steps and channels.
    pub mean_total_reward: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RlLog {
    pub iterations: Vec<RlIteration>,
}

/// Actor-critic fine-tuning. Each iteration samples a batch of episodes,
/// rolls them out with sampled actions, computes advantages with the
/// current critic, then takes one critic step and one actor step.
pub fn train_rl(
    actor: &mut ActorNetwork,
    critic: &mut CriticNetwork,
    episodes: &[Episode],
    config: &TrainConfig,
) -> Result<RlLog> {
    config.validate()?;
    if episodes.is_empty() {
        return Err(ShotError::Empty("RL dataset"));
    }
    let mut rng = seeded_rng(config.seed, SeedStream::Rl);
    let actor_adam = Adam::new(config.actor_lr);
    let critic_adam = Adam::new(config.critic_lr);
    let mut log = RlLog::default();
    for it in 0..config.rl_iterations {
        let batch: Vec<Episode> = (0..config.batch_size)
            .map(|_| episodes[rng.random_range(0..episodes.len())].clone())
            .collect();
        let trajectories = rollout_batch(&*actor, Some(&*critic), &batch, ActionRule::Sample, &mut rng)?;
        let advantages: Vec<[f64; NUM_ATTRIBUTES]> =
            trajectories.iter().flat_map(|t| t.advantages(config.gamma)).collect();

        let mut tape = Tape::new();
        let closs = critic_loss_var(critic, &mut tape, critic.store(), &trajectories, config.gamma)?;
        let critic_loss = tape.value(closs).item();
        tape.backward(closs, critic.store_mut())?;
        critic_adam.step(critic.store_mut());
        ensure_finite(critic.store(), "critic", it)?;

        let mut tape = Tape::new();
        let aloss = actor_loss_var(actor, &mut tape, actor.store(), &trajectories, &advantages)?;
        let actor_loss = tape.value(aloss).item();
        tape.backward(aloss, actor.store_mut())?;
        actor_adam.step(actor.store_mut());
        ensure_finite(actor.store(), "actor", it)?;

        let mut mean_reward = [0.0; NUM_ATTRIBUTES];
        let mut total = 0.0;
        for tr in &trajectories {
            for (m, t) in mean_reward.iter_mut().zip(tr.total_reward()) {
                *m += t;
                total += t;
            }
        }
        let steps = (trajectories.len() * HORIZON) as f64;
        log.iterations.push(RlIteration {
            mean_reward: mean_reward.map(|m| m / steps),
            mean_total_reward: total / trajectories.len() as f64,
            critic_loss,
            actor_loss,
        });
    }
    Ok(log)
}

pub fn checkpoint_of(actor: &ActorNetwork, critic: &CriticNetwork) -> Checkpoint {
    Checkpoint {
        sections: vec![
            Section::from_store("actor", actor.config().to_meta(), actor.store()),
            Section::from_store("critic", critic.config().to_meta(), critic.store()),
        ],
    }
}

pub fn save_checkpoint(actor: &ActorNetwork, critic: &CriticNetwork, path: impl AsRef<Path>) -> Result<()> {
    Ok(checkpoint_of(actor, critic).save(path)?)
}

fn meta_usize(section: &Section, key: &str) -> Result<usize> {
    section
        .meta(key)
        .ok_or_else(|| ShotError::InvalidArgument(format!("checkpoint section `{}` lacks `{key}`", section.name)))?
        .parse()
        .map_err(|e| ShotError::InvalidArgument(format!("bad `{key}` in checkpoint: {e}")))
}

/// Rebuilds both networks from the architecture recorded in the checkpoint.
pub fn networks_from_checkpoint(ckpt: &Checkpoint) -> Result<(ActorNetwork, CriticNetwork)> {
    let a = ckpt.section("actor")?;
    let c = ckpt.section("critic")?;
    let actor_config = ActorConfig {
        d_model: meta_usize(a, "d_model")?,
        blocks: meta_usize(a, "blocks")?,
        heads: meta_usize(a, "heads")?,
        ff_width: meta_usize(a, "ff_width")?,
    };
    let critic_config = CriticConfig::from_meta(c.meta("hidden").unwrap_or(""))?;
    // Initial values are overwritten by the checkpoint.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut actor = ActorNetwork::new(actor_config, &mut rng)?;
    let mut critic = CriticNetwork::new(critic_config, &mut rng)?;
    a.load_into(actor.store_mut())?;
    c.load_into(critic.store_mut())?;
    Ok((actor, critic))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ActorNetwork, CriticNetwork)> {
    networks_from_checkpoint(&Checkpoint::load(path)?)
}

/// Loads parameters into existing networks, failing on any shape mismatch.
pub fn load_checkpoint_into(actor: &mut ActorNetwork, critic: &mut CriticNetwork, path: impl AsRef<Path>) -> Result<()> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.section("actor")?.load_into(actor.store_mut())?;
    ckpt.section("critic")?.load_into(critic.store_mut())?;
    Ok(())
}
