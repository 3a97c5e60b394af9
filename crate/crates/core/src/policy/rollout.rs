//! Episode rollouts: predict, score against the true next shot, advance the context.

use rand::Rng;

use super::{critic_input, greedy_action, reward, sample_action, CriticNetwork, ShotPolicy};
use crate::attributes::{AttributeVector, Episode, HORIZON, NUM_ATTRIBUTES};
use crate::error::Result;
use crate::representation::{advance_context, build_context, ContextState};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ContextState>,
    pub actions: Vec<AttributeVector>,
    pub log_probs: Vec<[f64; NUM_ATTRIBUTES]>,
    pub rewards: Vec<[f64; NUM_ATTRIBUTES]>,
    /// Critic values of each (state, action); zeros when rolled out without a critic.
    pub values: Vec<[f64; NUM_ATTRIBUTES]>,
    pub terminal_value: [f64; NUM_ATTRIBUTES],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Per-channel sum of rewards.
    pub fn total_reward(&self) -> [f64; NUM_ATTRIBUTES] {
        let mut total = [0.0; NUM_ATTRIBUTES];
        for r in &self.rewards {
            for (t, v) in total.iter_mut().zip(r) {
                *t += v;
            }
        }
        total
    }

    /// Per-channel `sum_t gamma^t r_t`.
    pub fn discounted_return(&self, gamma: f64) -> [f64; NUM_ATTRIBUTES] {
        self.bootstrapped_returns_with(gamma, [0.0; NUM_ATTRIBUTES])
            .first()
            .copied()
            .unwrap_or([0.0; NUM_ATTRIBUTES])
    }

    /// `G_t = sum_{k>=t} gamma^{k-t} r_k + gamma^{T-t} V_T` for every step.
    pub fn bootstrapped_returns(&self, gamma: f64) -> Vec<[f64; NUM_ATTRIBUTES]> {
        self.bootstrapped_returns_with(gamma, self.terminal_value)
    }

    fn bootstrapped_returns_with(&self, gamma: f64, terminal: [f64; NUM_ATTRIBUTES]) -> Vec<[f64; NUM_ATTRIBUTES]> {
        let mut out = vec![[0.0; NUM_ATTRIBUTES]; self.rewards.len()];
        let mut next = terminal;
        for t in (0..self.rewards.len()).rev() {
            for c in 0..NUM_ATTRIBUTES {
                out[t][c] = self.rewards[t][c] + gamma * next[c];
            }
            next = out[t];
        }
        out
    }

    pub fn advantages(&self, gamma: f64) -> Vec<[f64; NUM_ATTRIBUTES]> {
        super::advantages(&self.rewards, &self.values, &self.terminal_value, gamma)
            .expect("trajectory fields share one length")
            .into_iter()
            .map(|a| std::array::from_fn(|c| a[c]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionRule {
    Sample,
    Greedy,
}

/// The context built from the episode's four context shots.
pub fn initial_state(episode: &Episode) -> ContextState {
    let shots: Vec<_> = episode.context.iter().map(|s| s.representation()).collect();
    build_context(&shots).expect("episodes hold a full context")
}

/// Rolls out every episode for the full horizon, batching network calls
/// across episodes. Random draws are taken episode by episode within each
/// step, so results depend only on the seed and the batch order.
pub fn rollout_batch<P, R>(
    policy: &P,
    critic: Option<&CriticNetwork>,
    episodes: &[Episode],
    rule: ActionRule,
    rng: &mut R,
) -> Result<Vec<Trajectory>>
where
    P: ShotPolicy + ?Sized,
    R: Rng + ?Sized,
{
    let mut trajectories: Vec<Trajectory> = episodes
        .iter()
        .map(|_| Trajectory {
            states: Vec::with_capacity(HORIZON),
            actions: Vec::with_capacity(HORIZON),
            log_probs: Vec::with_capacity(HORIZON),
            rewards: Vec::with_capacity(HORIZON),
            values: Vec::with_capacity(HORIZON),
            terminal_value: [0.0; NUM_ATTRIBUTES],
        })
        .collect();
    if episodes.is_empty() {
        return Ok(trajectories);
    }
    let mut states: Vec<ContextState> = episodes.iter().map(initial_state).collect();
    for step in 0..HORIZON {
        let dists = policy.distributions(&states)?;
        let mut actions = Vec::with_capacity(episodes.len());
        for ((tr, dist), ep) in trajectories.iter_mut().zip(&dists).zip(episodes) {
            let (action, log_probs) = match rule {
                ActionRule::Sample => sample_action(dist, rng),
                ActionRule::Greedy => {
                    let a = greedy_action(dist);
                    let lp = std::array::from_fn(|i| dist.block(i)[a.get(i)].ln());
                    (a, lp)
                }
            };
            tr.log_probs.push(log_probs);
            tr.rewards.push(reward(&action, &ep.targets[step].attributes));
            tr.actions.push(action);
            actions.push(action);
        }
        let values = match critic {
            Some(c) => {
                let inputs: Vec<Vec<f64>> = states.iter().zip(&actions).map(|(s, a)| critic_input(s, a)).collect();
                c.values(&inputs)?
            }
            None => vec![[0.0; NUM_ATTRIBUTES]; episodes.len()],
        };
        let next: Vec<ContextState> = states.iter().zip(&actions).map(|(s, a)| advance_context(s, a)).collect();
        for ((tr, state), value) in trajectories.iter_mut().zip(states).zip(values) {
            tr.states.push(state);
            tr.values.push(value);
        }
        states = next;
    }
    Ok(trajectories)
}

/// Samples one episode.
pub fn rollout<P, R>(policy: &P, critic: Option<&CriticNetwork>, episode: &Episode, rng: &mut R) -> Result<Trajectory>
where
    P: ShotPolicy + ?Sized,
    R: Rng + ?Sized,
{
    Ok(rollout_batch(policy, critic, std::slice::from_ref(episode), ActionRule::Sample, rng)?.remove(0))
}
