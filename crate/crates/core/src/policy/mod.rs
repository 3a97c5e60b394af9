//! Actor and critic networks, action selection, rewards, advantages and the
//! two training losses.

mod actor;
mod critic;
mod rollout;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use shotwright_nn::{ParamStore, Tape, Tensor, Var};

pub use actor::{actor_forward, ActorConfig, ActorNetwork};
pub use critic::{critic_input, CriticConfig, CriticNetwork, CRITIC_INPUT_DIM};
pub use rollout::{initial_state, rollout, rollout_batch, ActionRule, Trajectory};

use crate::attributes::{AttributeVector, CLASS_COUNTS, NUM_ATTRIBUTES};
use crate::error::{Result, ShotError};
use crate::representation::{AttributeDistribution, ContextState};

/// Anything that maps context states to per-attribute class probabilities.
pub trait ShotPolicy {
    fn distributions(&self, states: &[ContextState]) -> Result<Vec<AttributeDistribution>>;
}

impl<T: ShotPolicy + ?Sized> ShotPolicy for &T {
    fn distributions(&self, states: &[ContextState]) -> Result<Vec<AttributeDistribution>> {
        (**self).distributions(states)
    }
}

impl ShotPolicy for ActorNetwork {
    fn distributions(&self, states: &[ContextState]) -> Result<Vec<AttributeDistribution>> {
        self.forward(states)
    }
}

/// Uniform probabilities regardless of the state.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy;

impl ShotPolicy for UniformPolicy {
    fn distributions(&self, states: &[ContextState]) -> Result<Vec<AttributeDistribution>> {
        Ok(vec![AttributeDistribution::uniform(); states.len()])
    }
}

/// Draws each attribute independently from its block; returns the log-probability
/// of each drawn class.
pub fn sample_action<R: Rng + ?Sized>(
    dist: &AttributeDistribution,
    rng: &mut R,
) -> (AttributeVector, [f64; NUM_ATTRIBUTES]) {
    let mut classes = [0; NUM_ATTRIBUTES];
    let mut log_probs = [0.0; NUM_ATTRIBUTES];
    for i in 0..NUM_ATTRIBUTES {
        let block = dist.block(i);
        let index = WeightedIndex::new(block).expect("simplex block has positive mass");
        let k = index.sample(rng);
        classes[i] = k;
        log_probs[i] = block[k].ln();
    }
    (AttributeVector::new(classes).expect("sampled class in range"), log_probs)
}

/// Per-block argmax, ties toward the lowest class index.
pub fn greedy_action(dist: &AttributeDistribution) -> AttributeVector {
    dist.argmax()
}

/// +1 where the predicted class matches the truth, -1 elsewhere.
pub fn reward(predicted: &AttributeVector, truth: &AttributeVector) -> [f64; NUM_ATTRIBUTES] {
    std::array::from_fn(|i| if predicted.get(i) == truth.get(i) { 1.0 } else { -1.0 })
}

/// Channel-wise advantages `A_t = sum_k gamma^k delta_{t+k}` with
/// `delta_t = r_t + gamma V_{t+1} - V_t` and `V_T = terminal_value`,
/// evaluated by the backward recursion `A_t = delta_t + gamma A_{t+1}`.
pub fn advantages<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    rewards: &[A],
    values: &[B],
    terminal_value: &[f64],
    gamma: f64,
) -> Result<Vec<Vec<f64>>> {
    if rewards.len() != values.len() {
        return Err(ShotError::InvalidArgument(format!(
            "{} rewards but {} values",
            rewards.len(),
            values.len()
        )));
    }
    let channels = terminal_value.len();
    if rewards.iter().any(|r| r.as_ref().len() != channels) || values.iter().any(|v| v.as_ref().len() != channels) {
        return Err(ShotError::InvalidArgument(format!("every step needs {channels} channels")));
    }
    let steps = rewards.len();
    let mut out = vec![vec![0.0; channels]; steps];
    let mut next_adv = vec![0.0; channels];
    for t in (0..steps).rev() {
        let next_value = if t + 1 < steps { values[t + 1].as_ref() } else { terminal_value };
        let (r, v) = (rewards[t].as_ref(), values[t].as_ref());
        for c in 0..channels {
            let delta = r[c] + gamma * next_value[c] - v[c];
            out[t][c] = delta + gamma * next_adv[c];
        }
        next_adv.clone_from(&out[t]);
    }
    Ok(out)
}

/// Half the sum of squared advantages over all steps and channels.
pub fn critic_loss<A: AsRef<[f64]>>(advantages: &[A]) -> f64 {
    0.5 * advantages
        .iter()
        .flat_map(|a| a.as_ref().iter())
        .map(|a| a * a)
        .sum::<f64>()
}

/// `sum_t sum_i -log_prob[t][i] * A[t][i]` with advantages held constant.
pub fn actor_loss<A: AsRef<[f64]>, B: AsRef<[f64]>>(log_probs: &[A], advantages: &[B]) -> f64 {
    log_probs
        .iter()
        .zip(advantages)
        .flat_map(|(l, a)| l.as_ref().iter().zip(a.as_ref()))
        .map(|(l, a)| -l * a)
        .sum()
}

/// Batch critic loss on a tape: the mean over trajectories of
/// `0.5 * sum (G_t - V_t)^2`, where `G_t` is the discounted return-to-go
/// bootstrapped with `V_T`. With the critic's values this equals
/// [`critic_loss`] of the recursive advantages.
pub fn critic_loss_var(
    critic: &CriticNetwork,
    tape: &mut Tape,
    store: &ParamStore,
    trajectories: &[Trajectory],
    gamma: f64,
) -> Result<Var> {
    if trajectories.is_empty() {
        return Err(ShotError::Empty("trajectory batch"));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for tr in trajectories {
        for (s, a) in tr.states.iter().zip(&tr.actions) {
            inputs.push(critic_input(s, a));
        }
        targets.extend(tr.bootstrapped_returns(gamma));
    }
    let values = critic.values_var(tape, store, &inputs)?;
    let loss = tape.half_squared_error(values, &Tensor::from_rows(&targets)?)?;
    Ok(tape.scale(loss, 1.0 / trajectories.len() as f64))
}

/// Batch actor loss on a tape: the mean over trajectories of
/// `sum_t sum_i -log pi(a_t,i | E_t) * A_t,i`. `advantages` holds one row
/// per step of every trajectory, in order, and is treated as a constant.
pub fn actor_loss_var(
    actor: &ActorNetwork,
    tape: &mut Tape,
    store: &ParamStore,
    trajectories: &[Trajectory],
    advantages: &[[f64; NUM_ATTRIBUTES]],
) -> Result<Var> {
    if trajectories.is_empty() {
        return Err(ShotError::Empty("trajectory batch"));
    }
    let states: Vec<ContextState> = trajectories.iter().flat_map(|t| t.states.iter().cloned()).collect();
    let actions: Vec<AttributeVector> = trajectories.iter().flat_map(|t| t.actions.iter().copied()).collect();
    if advantages.len() != states.len() {
        return Err(ShotError::InvalidArgument(format!(
            "{} advantage rows for {} steps",
            advantages.len(),
            states.len()
        )));
    }
    let batch = trajectories.len() as f64;
    let heads = actor.logits(tape, store, &states)?;
    let mut terms = Vec::with_capacity(NUM_ATTRIBUTES);
    for (i, head) in heads.into_iter().enumerate() {
        let targets: Vec<usize> = actions.iter().map(|a| a.get(i)).collect();
        let weights: Vec<f64> = advantages.iter().map(|a| a[i] / batch).collect();
        terms.push(tape.weighted_nll(head, &targets, &weights)?);
    }
    Ok(tape.sum(&terms)?)
}

/// Sum over heads of the mean cross-entropy against `targets`.
pub fn supervised_loss_var(
    actor: &ActorNetwork,
    tape: &mut Tape,
    store: &ParamStore,
    states: &[ContextState],
    targets: &[AttributeVector],
) -> Result<Var> {
    if states.len() != targets.len() {
        return Err(ShotError::LengthMismatch {
            left: states.len(),
            right: targets.len(),
        });
    }
    let heads = actor.logits(tape, store, states)?;
    let mut terms = Vec::with_capacity(NUM_ATTRIBUTES);
    for (i, head) in heads.into_iter().enumerate() {
        let t: Vec<usize> = targets.iter().map(|a| a.get(i)).collect();
        terms.push(tape.cross_entropy(head, &t)?);
    }
    Ok(tape.sum(&terms)?)
}

/// Expected per-channel reward of a uniform guess: `2 / C_i - 1`.
pub fn chance_reward() -> [f64; NUM_ATTRIBUTES] {
    std::array::from_fn(|i| 2.0 / CLASS_COUNTS[i] as f64 - 1.0)
}
