//! MLP actor-critic that imitates a heuristic editor's view sequence.
//!
//! The actor sees the scene features at `t` together with a one-hot of its
//! own previous view. Training warm-starts with behaviour cloning on the
//! ground-truth history, then runs actor-critic updates on windows rolled
//! out from the ground-truth history at a random start time.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shotwright_nn::{softmax_in_place, Adam, Mlp, ParamStore, Tape, Tensor, Var};

use super::scene::{LectureScene, ViewHistory, FEATURE_DIM, NUM_CAMERAS};
use super::{imitation_reward, ViewSequence};
use crate::error::{Result, ShotError};
use crate::policy::advantages;
use crate::representation::argmax;

pub const ACTOR_STATE_DIM: usize = FEATURE_DIM + NUM_CAMERAS;
const CRITIC_INPUT_DIM: usize = ACTOR_STATE_DIM + NUM_CAMERAS;

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastConfig {
    pub hidden: Vec<usize>,
    pub pretrain_epochs: usize,
    pub rl_iterations: usize,
    /// Steps per rollout window.
    pub window: usize,
    pub batch_size: usize,
    /// Actor learning rate while behaviour cloning.
    pub actor_lr: f64,
    /// Actor learning rate during the reinforcement phase.
    pub rl_actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for BroadcastConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            pretrain_epochs: 150,
            rl_iterations: 200,
            window: 32,
            batch_size: 32,
            actor_lr: 1e-3,
            rl_actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.9,
            seed: 0,
        }
    }
}

/// Scene features followed by a one-hot of the previous view (zeros before the first).
pub fn actor_state(scene: &LectureScene, t: usize, history: &ViewHistory) -> Vec<f64> {
    let mut s = scene.features(t, history).to_vec();
    let mut prev = [0.0; NUM_CAMERAS];
    if let Some(v) = history.current {
        prev[v] = 1.0;
    }
    s.extend_from_slice(&prev);
    s
}

fn mlp_widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

#[derive(Debug, Clone)]
pub struct BroadcastActor {
    mlp: Mlp,
    store: ParamStore,
}

impl BroadcastActor {
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "actor", &mlp_widths(ACTOR_STATE_DIM, hidden, NUM_CAMERAS), rng)?;
        Ok(Self { mlp, store })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, states: &[Vec<f64>]) -> Result<Var> {
        let x = tape.constant(Tensor::from_rows(states)?);
        Ok(self.mlp.forward(tape, store, x)?)
    }

    pub fn probabilities(&self, states: &[Vec<f64>]) -> Result<Vec<[f64; NUM_CAMERAS]>> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, &self.store, states)?;
        let t = tape.value(logits);
        Ok((0..states.len())
            .map(|r| {
                let mut p: [f64; NUM_CAMERAS] = std::array::from_fn(|c| t.row(r)[c]);
                softmax_in_place(&mut p);
                p
            })
            .collect())
    }

    /// Greedy view sequence over the whole scene, driven by its own history.
    pub fn edit(&self, scene: &LectureScene) -> Result<ViewSequence> {
        let mut history = ViewHistory::default();
        let mut views = Vec::with_capacity(scene.len());
        for t in 0..scene.len() {
            let p = self.probabilities(&[actor_state(scene, t, &history)])?;
            let v = argmax(&p[0]);
            history.push(v);
            views.push(v);
        }
        ViewSequence::new(views)
    }
}

#[derive(Debug, Clone)]
pub struct BroadcastCritic {
    mlp: Mlp,
    store: ParamStore,
}

impl BroadcastCritic {
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "critic", &mlp_widths(CRITIC_INPUT_DIM, hidden, 1), rng)?;
        Ok(Self { mlp, store })
    }

    fn values_var(&self, tape: &mut Tape, inputs: &[Vec<f64>]) -> Result<Var> {
        let x = tape.constant(Tensor::from_rows(inputs)?);
        Ok(self.mlp.forward(tape, &self.store, x)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BroadcastLog {
    pub pretrain_losses: Vec<f64>,
    /// Mean per-step imitation reward of each RL batch.
    pub rl_mean_reward: Vec<f64>,
}

fn check_finite(store: &ParamStore, what: &str) -> Result<()> {
    if store.all_finite() {
        Ok(())
    } else {
        Err(ShotError::Diverged(format!("broadcast {what} parameters became non-finite")))
    }
}

/// Learns to reproduce `truth` on `scene`.
pub fn train_broadcast_actor(
    scene: &LectureScene,
    truth: &ViewSequence,
    config: &BroadcastConfig,
) -> Result<(BroadcastActor, BroadcastLog)> {
    if scene.len() != truth.len() {
        return Err(ShotError::LengthMismatch {
            left: scene.len(),
            right: truth.len(),
        });
    }
    if scene.is_empty() || config.batch_size == 0 || config.window == 0 {
        return Err(ShotError::InvalidArgument("empty scene, batch or window".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut actor = BroadcastActor::new(&config.hidden, &mut rng)?;
    let mut critic = BroadcastCritic::new(&config.hidden, &mut rng)?;
    let actor_adam = Adam::new(config.actor_lr);
    let rl_actor_adam = Adam::new(config.rl_actor_lr);
    let critic_adam = Adam::new(config.critic_lr);
    let views = truth.views();
    let mut log = BroadcastLog::default();

    let states: Vec<Vec<f64>> = (0..scene.len())
        .map(|t| actor_state(scene, t, &ViewHistory::of_prefix(views, t)))
        .collect();
    let mut order: Vec<usize> = (0..scene.len()).collect();
    for _ in 0..config.pretrain_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&t| states[t].clone()).collect();
            let targets: Vec<usize> = chunk.iter().map(|&t| views[t]).collect();
            let mut tape = Tape::new();
            let logits = actor.logits(&mut tape, &actor.store, &batch)?;
            let loss = tape.cross_entropy(logits, &targets)?;
            total += tape.value(loss).item() * chunk.len() as f64;
            tape.backward(loss, &mut actor.store)?;
            actor_adam.step(&mut actor.store);
        }
        check_finite(&actor.store, "actor")?;
        log.pretrain_losses.push(total / scene.len() as f64);
    }

    let window = config.window.min(scene.len());
    for _ in 0..config.rl_iterations {
        let starts: Vec<usize> = (0..config.batch_size)
            .map(|_| rng.random_range(0..=scene.len() - window))
            .collect();
        let mut histories: Vec<ViewHistory> = starts.iter().map(|&t0| ViewHistory::of_prefix(views, t0)).collect();
        let mut step_states = Vec::with_capacity(window * starts.len());
        let mut actions = Vec::with_capacity(window * starts.len());
        let mut rewards = vec![Vec::with_capacity(window); starts.len()];
        for k in 0..window {
            let batch: Vec<Vec<f64>> = starts
                .iter()
                .zip(&histories)
                .map(|(&t0, h)| actor_state(scene, t0 + k, h))
                .collect();
            let probs = actor.probabilities(&batch)?;
            for (b, p) in probs.iter().enumerate() {
                let a = WeightedIndex::new(p).expect("softmax has positive mass").sample(&mut rng);
                rewards[b].push([imitation_reward(a, views[starts[b] + k])]);
                histories[b].push(a);
                actions.push(a);
            }
            step_states.extend(batch);
        }
        // Rows are step-major; regroup per window for the advantage recursion.
        let row = |b: usize, k: usize| k * starts.len() + b;
        let critic_inputs: Vec<Vec<f64>> = step_states
            .iter()
            .zip(&actions)
            .map(|(s, &a)| {
                let mut x = s.clone();
                let mut one_hot = [0.0; NUM_CAMERAS];
                one_hot[a] = 1.0;
                x.extend_from_slice(&one_hot);
                x
            })
            .collect();
        let mut tape = Tape::new();
        let values_var = critic.values_var(&mut tape, &critic_inputs)?;
        let values = tape.value(values_var).data().to_vec();
        let mut adv = vec![0.0; actions.len()];
        let mut returns = vec![0.0; actions.len()];
        for (b, r) in rewards.iter().enumerate() {
            let v: Vec<[f64; 1]> = (0..window).map(|k| [values[row(b, k)]]).collect();
            let a = advantages(r, &v, &[0.0], config.gamma)?;
            for k in 0..window {
                adv[row(b, k)] = a[k][0];
                returns[row(b, k)] = a[k][0] + v[k][0];
            }
        }
        let batch = starts.len() as f64;
        let target = Tensor::new(vec![returns.len(), 1], returns)?;
        let closs = tape.half_squared_error(values_var, &target)?;
        let closs = tape.scale(closs, 1.0 / batch);
        tape.backward(closs, &mut critic.store)?;
        critic_adam.step(&mut critic.store);
        check_finite(&critic.store, "critic")?;

        let mut tape = Tape::new();
        let logits = actor.logits(&mut tape, &actor.store, &step_states)?;
        let weights: Vec<f64> = adv.iter().map(|a| a / batch).collect();
        let aloss = tape.weighted_nll(logits, &actions, &weights)?;
        tape.backward(aloss, &mut actor.store)?;
        rl_actor_adam.step(&mut actor.store);
        check_finite(&actor.store, "actor")?;

        let total: f64 = rewards.iter().flatten().map(|r| r[0]).sum();
        log.rl_mean_reward.push(total / actions.len() as f64);
    }
    Ok((actor, log))
}
