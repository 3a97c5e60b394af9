//! Accuracy, retrieval and reward metrics, and the evaluation report.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attributes::{AttributeTaxonomy, AttributeVector, Episode, Shot, HORIZON, NUM_ATTRIBUTES};
use crate::error::{Result, ShotError};
use crate::policy::{greedy_action, initial_state, reward, sample_action, ShotPolicy, Trajectory};
use crate::representation::{advance_context, ContextState};

/// States per network call when predicting for large evaluation sets.
const PREDICT_CHUNK: usize = 512;

/// Turns context states into attribute predictions.
pub trait Predictor {
    fn predict(&mut self, states: &[ContextState]) -> Result<Vec<AttributeVector>>;
}

/// Per-block argmax of a policy's output.
pub struct GreedyPredictor<P>(pub P);

impl<P: ShotPolicy + Sync> Predictor for GreedyPredictor<P> {
    fn predict(&mut self, states: &[ContextState]) -> Result<Vec<AttributeVector>> {
        let policy = &self.0;
        let chunks: Vec<Vec<AttributeVector>> = states
            .par_chunks(PREDICT_CHUNK)
            .map(|c| Ok(policy.distributions(c)?.iter().map(greedy_action).collect()))
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }
}

/// Draws predictions from a policy's output.
pub struct SamplingPredictor<P, R> {
    pub policy: P,
    pub rng: R,
}

impl<P: ShotPolicy, R: Rng> Predictor for SamplingPredictor<P, R> {
    fn predict(&mut self, states: &[ContextState]) -> Result<Vec<AttributeVector>> {
        let mut out = Vec::with_capacity(states.len());
        for chunk in states.chunks(PREDICT_CHUNK) {
            let dists = self.policy.distributions(chunk)?;
            out.extend(dists.iter().map(|d| sample_action(d, &mut self.rng).0));
        }
        Ok(out)
    }
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(ShotError::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(ShotError::Empty("prediction list"));
    }
    Ok(())
}

pub fn per_attribute_accuracy(predictions: &[AttributeVector], truths: &[AttributeVector]) -> Result<[f64; NUM_ATTRIBUTES]> {
    check_lengths(predictions.len(), truths.len())?;
    let mut hits = [0usize; NUM_ATTRIBUTES];
    for (p, t) in predictions.iter().zip(truths) {
        for (i, h) in hits.iter_mut().enumerate() {
            *h += usize::from(p.get(i) == t.get(i));
        }
    }
    Ok(hits.map(|h| h as f64 / predictions.len() as f64))
}

/// Fraction of samples with all eight attributes correct.
pub fn overall_accuracy(predictions: &[AttributeVector], truths: &[AttributeVector]) -> Result<f64> {
    check_lengths(predictions.len(), truths.len())?;
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Fraction of samples where both consecutive predictions are fully correct.
pub fn two_shot_accuracy(
    first: (&[AttributeVector], &[AttributeVector]),
    second: (&[AttributeVector], &[AttributeVector]),
) -> Result<f64> {
    check_lengths(first.0.len(), first.1.len())?;
    check_lengths(second.0.len(), second.1.len())?;
    check_lengths(first.0.len(), second.0.len())?;
    let hits = (0..first.0.len())
        .filter(|&k| first.0[k] == first.1[k] && second.0[k] == second.1[k])
        .count();
    Ok(hits as f64 / first.0.len() as f64)
}

/// Index of the candidate closest to `query` in Hamming distance over the
/// attributes, ties toward the lowest index.
pub fn retrieve_shot(query: &AttributeVector, candidates: &[Shot]) -> Result<usize> {
    candidates
        .iter()
        .enumerate()
        .min_by_key(|(k, s)| (query.hamming(&s.attributes), *k))
        .map(|(k, _)| k)
        .ok_or(ShotError::Empty("candidate list"))
}

/// Outcome of the two consecutive retrievals for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalOutcome {
    pub first: bool,
    pub both: bool,
}

/// Retrieves among the episode's targets presented in an order drawn from
/// `rng`. A retrieval succeeds when the retrieved shot carries the
/// ground-truth shot's attributes. After a success the second query runs
/// over the four shots not yet retrieved.
pub fn retrieve_pair<R: Rng + ?Sized>(
    episode: &Episode,
    first_query: &AttributeVector,
    second_query: &AttributeVector,
    rng: &mut R,
) -> RetrievalOutcome {
    let mut order: Vec<usize> = (0..HORIZON).collect();
    order.shuffle(rng);
    let pool: Vec<Shot> = order.iter().map(|&k| episode.targets[k].clone()).collect();
    let picked = retrieve_shot(first_query, &pool).expect("five candidates");
    let first = pool[picked].attributes == episode.targets[0].attributes;
    if !first {
        return RetrievalOutcome { first, both: false };
    }
    let rest: Vec<Shot> = pool.iter().enumerate().filter(|(k, _)| *k != picked).map(|(_, s)| s.clone()).collect();
    let second = retrieve_shot(second_query, &rest).expect("four candidates");
    RetrievalOutcome {
        first,
        both: rest[second].attributes == episode.targets[1].attributes,
    }
}

/// First-step states and the second-step states reached by appending the
/// ground-truth first target.
fn two_step_states(episodes: &[Episode]) -> (Vec<ContextState>, Vec<ContextState>) {
    let first: Vec<ContextState> = episodes.par_iter().map(initial_state).collect();
    let second = first
        .par_iter()
        .zip(episodes)
        .map(|(s, ep)| advance_context(s, &ep.targets[0].attributes))
        .collect();
    (first, second)
}

fn retrieval_outcomes<P: Predictor + ?Sized, R: Rng + ?Sized>(
    episodes: &[Episode],
    predictor: &mut P,
    rng: &mut R,
) -> Result<Vec<RetrievalOutcome>> {
    if episodes.is_empty() {
        return Err(ShotError::Empty("episode list"));
    }
    let (s1, s2) = two_step_states(episodes);
    let p1 = predictor.predict(&s1)?;
    let p2 = predictor.predict(&s2)?;
    Ok(episodes
        .iter()
        .zip(p1.iter().zip(&p2))
        .map(|(ep, (a, b))| retrieve_pair(ep, a, b, rng))
        .collect())
}

/// Fraction of episodes whose first retrieval hits the next ground-truth shot.
pub fn rank1<P: Predictor + ?Sized, R: Rng + ?Sized>(episodes: &[Episode], predictor: &mut P, rng: &mut R) -> Result<f64> {
    let out = retrieval_outcomes(episodes, predictor, rng)?;
    Ok(out.iter().filter(|o| o.first).count() as f64 / out.len() as f64)
}

/// Fraction of episodes where both consecutive retrievals hit.
pub fn two_shot_rank1<P: Predictor + ?Sized, R: Rng + ?Sized>(
    episodes: &[Episode],
    predictor: &mut P,
    rng: &mut R,
) -> Result<f64> {
    let out = retrieval_outcomes(episodes, predictor, rng)?;
    Ok(out.iter().filter(|o| o.both).count() as f64 / out.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardSummary {
    /// Mean ±1 reward per step, per channel.
    pub per_channel: [f64; NUM_ATTRIBUTES],
    /// Mean over episodes of the reward summed over steps and channels.
    pub total: f64,
}

pub fn mean_episode_reward(trajectories: &[Trajectory]) -> Result<RewardSummary> {
    if trajectories.is_empty() {
        return Err(ShotError::Empty("trajectory list"));
    }
    let mut sums = [0.0; NUM_ATTRIBUTES];
    let mut steps = 0usize;
    for tr in trajectories {
        for (s, t) in sums.iter_mut().zip(tr.total_reward()) {
            *s += t;
        }
        steps += tr.len();
    }
    Ok(RewardSummary {
        per_channel: sums.map(|s| s / steps.max(1) as f64),
        total: sums.iter().sum::<f64>() / trajectories.len() as f64,
    })
}

/// Rolls each episode out for the full horizon with `predictor`, advancing
/// the context with its own predictions, and records the rewards.
pub fn predictor_trajectories<P: Predictor + ?Sized>(episodes: &[Episode], predictor: &mut P) -> Result<Vec<Trajectory>> {
    let mut states: Vec<ContextState> = episodes.par_iter().map(initial_state).collect();
    let mut out: Vec<Trajectory> = episodes
        .iter()
        .map(|_| Trajectory {
            states: Vec::new(),
            actions: Vec::new(),
            log_probs: Vec::new(),
            rewards: Vec::new(),
            values: Vec::new(),
            terminal_value: [0.0; NUM_ATTRIBUTES],
        })
        .collect();
    for step in 0..HORIZON {
        let actions = predictor.predict(&states)?;
        let next: Vec<ContextState> = states.par_iter().zip(&actions).map(|(s, a)| advance_context(s, a)).collect();
        for ((tr, ep), a) in out.iter_mut().zip(episodes).zip(&actions) {
            tr.rewards.push(reward(a, &ep.targets[step].attributes));
            tr.actions.push(*a);
            tr.log_probs.push([0.0; NUM_ATTRIBUTES]);
            tr.values.push([0.0; NUM_ATTRIBUTES]);
        }
        for (tr, s) in out.iter_mut().zip(std::mem::replace(&mut states, next)) {
            tr.states.push(s);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub per_attribute: [f64; NUM_ATTRIBUTES],
    pub one_acc: f64,
    pub two_acc: f64,
    pub rank1: f64,
    pub two_rank1: f64,
    pub reward: RewardSummary,
}

/// Computes every metric from one set of predictions. Candidate orders for
/// retrieval come from `rng`.
pub fn evaluate<P: Predictor + ?Sized, R: Rng + ?Sized>(
    episodes: &[Episode],
    predictor: &mut P,
    rng: &mut R,
) -> Result<EvalReport> {
    if episodes.is_empty() {
        return Err(ShotError::Empty("episode list"));
    }
    let (s1, s2) = two_step_states(episodes);
    let p1 = predictor.predict(&s1)?;
    let p2 = predictor.predict(&s2)?;
    let t1: Vec<AttributeVector> = episodes.iter().map(|e| e.targets[0].attributes).collect();
    let t2: Vec<AttributeVector> = episodes.iter().map(|e| e.targets[1].attributes).collect();
    let outcomes: Vec<RetrievalOutcome> = episodes
        .iter()
        .zip(p1.iter().zip(&p2))
        .map(|(ep, (a, b))| retrieve_pair(ep, a, b, rng))
        .collect();
    let n = episodes.len() as f64;
    let trajectories = predictor_trajectories(episodes, predictor)?;
    let report = EvalReport {
        episodes: episodes.len(),
        per_attribute: per_attribute_accuracy(&p1, &t1)?,
        one_acc: overall_accuracy(&p1, &t1)?,
        two_acc: two_shot_accuracy((&p1, &t1), (&p2, &t2))?,
        rank1: outcomes.iter().filter(|o| o.first).count() as f64 / n,
        two_rank1: outcomes.iter().filter(|o| o.both).count() as f64 / n,
        reward: mean_episode_reward(&trajectories)?,
    };
    report.check_finite()?;
    Ok(report)
}

impl EvalReport {
    fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_attribute
            .iter()
            .chain(&self.reward.per_channel)
            .copied()
            .chain([self.one_acc, self.two_acc, self.rank1, self.two_rank1, self.reward.total])
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.all_values().all(f64::is_finite) {
            Ok(())
        } else {
            Err(ShotError::Diverged("evaluation produced a non-finite metric".into()))
        }
    }

    /// Flat `key = value` lines.
    pub fn to_kv_text(&self, taxonomy: &AttributeTaxonomy) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "episodes = {}", self.episodes);
        for (i, a) in self.per_attribute.iter().enumerate() {
            let _ = writeln!(out, "acc.{} = {a}", taxonomy.attribute_name(i));
        }
        let _ = writeln!(out, "one_acc = {}", self.one_acc);
        let _ = writeln!(out, "two_acc = {}", self.two_acc);
        let _ = writeln!(out, "rank1 = {}", self.rank1);
        let _ = writeln!(out, "two_rank1 = {}", self.two_rank1);
        for (i, r) in self.reward.per_channel.iter().enumerate() {
            let _ = writeln!(out, "reward.{} = {r}", taxonomy.attribute_name(i));
        }
        let _ = writeln!(out, "reward.total = {}", self.reward.total);
        out
    }

    /// One JSON object on a single line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn table_header(taxonomy: &AttributeTaxonomy) -> String {
        let mut cols = vec!["method".to_string()];
        cols.extend(taxonomy.attributes().iter().map(|a| format!("Acc[{}]", a.name)));
        cols.extend(["1-Acc", "2-Acc", "rank1", "2-rank1", "reward"].map(String::from));
        cols.join(" | ")
    }

    /// Rates as percentages with one decimal, reward total with two.
    pub fn table_row(&self, label: &str) -> String {
        let mut cols = vec![label.to_string()];
        cols.extend(self.per_attribute.iter().map(|a| format!("{:.1}", 100.0 * a)));
        cols.extend([self.one_acc, self.two_acc, self.rank1, self.two_rank1].map(|v| format!("{:.1}", 100.0 * v)));
        cols.push(format!("{:.2}", self.reward.total));
        cols.join(" | ")
    }

    pub fn csv_header(taxonomy: &AttributeTaxonomy) -> String {
        let mut cols = vec!["label".to_string(), "episodes".to_string()];
        cols.extend(taxonomy.attributes().iter().map(|a| format!("acc_{}", a.name)));
        cols.extend(["one_acc", "two_acc", "rank1", "two_rank1", "reward_total"].map(String::from));
        cols.join(",")
    }

    pub fn csv_row(&self, label: &str) -> String {
        let mut cols = vec![label.to_string(), self.episodes.to_string()];
        cols.extend(self.per_attribute.iter().map(|a| a.to_string()));
        cols.extend([self.one_acc, self.two_acc, self.rank1, self.two_rank1, self.reward.total].map(|v| v.to_string()));
        cols.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn av(c: [usize; 8]) -> AttributeVector {
        AttributeVector::new(c).unwrap()
    }

    fn shot(c: [usize; 8]) -> Shot {
        Shot {
            shot_id: String::new(),
            scene_id: String::new(),
            attributes: av(c),
            distribution: None,
        }
    }

    #[test]
    fn accuracy_examples() {
        let a = av([1, 2, 0, 3, 4, 5, 6, 0]);
        let b = av([0, 0, 1, 0, 0, 0, 0, 1]);
        assert_eq!(per_attribute_accuracy(&[a, b], &[a, b]).unwrap(), [1.0; 8]);
        assert_eq!(per_attribute_accuracy(&[a, b], &[a, a]).unwrap(), [0.5; 8]);
        assert_eq!(overall_accuracy(&[a], &[a]).unwrap(), 1.0);
        let mut one_off = *a.classes();
        one_off[3] = 0;
        assert_eq!(overall_accuracy(&[av(one_off)], &[a]).unwrap(), 0.0);
        assert!(per_attribute_accuracy(&[a], &[a, b]).is_err());
        assert!(overall_accuracy(&[a, b], &[a]).is_err());
    }

    #[test]
    fn two_shot_examples() {
        let a = av([1, 2, 0, 3, 4, 5, 6, 0]);
        let b = av([0, 0, 1, 0, 0, 0, 0, 1]);
        assert_eq!(two_shot_accuracy((&[a], &[a]), (&[b], &[b])).unwrap(), 1.0);
        assert_eq!(two_shot_accuracy((&[a], &[a]), (&[a], &[b])).unwrap(), 0.0);
        assert!(two_shot_accuracy((&[a], &[a]), (&[a, a], &[b, b])).is_err());
    }

    #[test]
    fn retrieval_examples() {
        let c = vec![shot([0; 8]), shot([1; 8]), shot([2, 2, 2, 2, 2, 2, 2, 2]), shot([1; 8])];
        assert_eq!(retrieve_shot(&av([2; 8]), &c).unwrap(), 2);
        assert_eq!(retrieve_shot(&av([1; 8]), &c).unwrap(), 1);
        let close = shot([1, 0, 0, 0, 0, 0, 0, 0]);
        let far = shot([1, 1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(retrieve_shot(&av([0; 8]), &[far.clone(), close.clone()]).unwrap(), 1);
        assert!(retrieve_shot(&av([0; 8]), &[]).is_err());
    }

    #[test]
    fn reward_summary_extremes() {
        let tr = |r: f64| Trajectory {
            states: vec![],
            actions: vec![],
            log_probs: vec![],
            rewards: vec![[r; 8]; 5],
            values: vec![],
            terminal_value: [0.0; 8],
        };
        assert_eq!(mean_episode_reward(&[tr(1.0), tr(1.0)]).unwrap().total, 40.0);
        assert_eq!(mean_episode_reward(&[tr(-1.0)]).unwrap().total, -40.0);
        assert!(mean_episode_reward(&[]).is_err());
    }
}
