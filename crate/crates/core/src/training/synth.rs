//! Synthetic scenes whose shots follow a first-order Markov chain over
//! attribute vectors.
//!
//! Each attribute has a fixed successor map: a single cycle through all of
//! its classes in a seed-dependent order. With probability `determinism`
//! an attribute moves to its successor class, otherwise it is redrawn
//! uniformly. Attributes transition independently.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attributes::{AttributeVector, Scene, Shot, CLASS_COUNTS, NUM_ATTRIBUTES};
use crate::error::{Result, ShotError};
use crate::representation::synth_distribution;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovConfig {
    pub scenes: usize,
    pub shots_per_scene: usize,
    /// Probability that an attribute follows its successor map.
    pub determinism: f64,
    pub seed: u64,
    /// Attach synthetic distributions at this concentration.
    pub concentration: Option<f64>,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        Self {
            scenes: 100,
            shots_per_scene: 12,
            determinism: 1.0,
            seed: 0,
            concentration: None,
        }
    }
}

/// Successor class of every class, per attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMaps {
    successors: Vec<Vec<usize>>,
}

impl TransitionMaps {
    /// One full cycle per attribute, in an order drawn from `rng`.
    pub fn cyclic<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let successors = CLASS_COUNTS
            .iter()
            .map(|&c| {
                let mut order: Vec<usize> = (0..c).collect();
                order.shuffle(rng);
                let mut next = vec![0; c];
                for k in 0..c {
                    next[order[k]] = order[(k + 1) % c];
                }
                next
            })
            .collect();
        Self { successors }
    }

    pub fn successor(&self, attribute: usize, class: usize) -> usize {
        self.successors[attribute][class]
    }

    /// The deterministic next shot.
    pub fn apply(&self, v: &AttributeVector) -> AttributeVector {
        AttributeVector::new(std::array::from_fn(|i| self.successor(i, v.get(i)))).expect("successor stays in range")
    }
}

fn uniform_vector<R: Rng + ?Sized>(rng: &mut R) -> AttributeVector {
    AttributeVector::new(std::array::from_fn(|i| rng.random_range(0..CLASS_COUNTS[i]))).expect("in range")
}

/// The successor maps used by [`generate_markov_dataset`] for `seed`.
pub fn transition_maps(seed: u64) -> TransitionMaps {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    TransitionMaps::cyclic(&mut rng)
}

pub fn generate_markov_dataset(config: &MarkovConfig) -> Result<Vec<Scene>> {
    if !(0.0..=1.0).contains(&config.determinism) {
        return Err(ShotError::InvalidArgument(format!(
            "determinism must lie in [0, 1], got {}",
            config.determinism
        )));
    }
    if let Some(c) = config.concentration {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ShotError::InvalidArgument(format!("concentration must be positive, got {c}")));
        }
    }
    let maps = transition_maps(config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let mut scenes = Vec::with_capacity(config.scenes);
    for s in 0..config.scenes {
        let scene_id = format!("scene{s:05}");
        let mut shots = Vec::with_capacity(config.shots_per_scene);
        let mut current = uniform_vector(&mut rng);
        for j in 0..config.shots_per_scene {
            if j > 0 {
                let classes: [usize; NUM_ATTRIBUTES] = std::array::from_fn(|i| {
                    if rng.random::<f64>() < config.determinism {
                        maps.successor(i, current.get(i))
                    } else {
                        rng.random_range(0..CLASS_COUNTS[i])
                    }
                });
                current = AttributeVector::new(classes)?;
            }
            let distribution = match config.concentration {
                Some(c) => Some(synth_distribution(&current, c, &mut rng)?),
                None => None,
            };
            shots.push(Shot {
                shot_id: format!("shot{j:04}"),
                scene_id: scene_id.clone(),
                attributes: current,
                distribution,
            });
        }
        scenes.push(Scene { scene_id, shots });
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{sample_all_episodes, HORIZON};
    use std::collections::HashSet;

    #[test]
    fn maps_are_single_cycles() {
        let maps = transition_maps(3);
        for (i, &c) in CLASS_COUNTS.iter().enumerate() {
            let mut k = 0;
            let mut seen = HashSet::new();
            for _ in 0..c {
                assert!(seen.insert(k));
                k = maps.successor(i, k);
            }
            assert_eq!(k, 0, "attribute {i} is not one cycle");
        }
    }

    #[test]
    fn deterministic_chain_follows_maps() {
        let config = MarkovConfig {
            scenes: 5,
            shots_per_scene: 20,
            seed: 4,
            ..MarkovConfig::default()
        };
        let scenes = generate_markov_dataset(&config).unwrap();
        let maps = transition_maps(4);
        for scene in &scenes {
            for w in scene.shots.windows(2) {
                assert_eq!(maps.apply(&w[0].attributes), w[1].attributes);
            }
        }
        // Every episode has five distinct targets.
        for ep in sample_all_episodes(&scenes, 1) {
            let distinct: HashSet<_> = ep.targets.iter().map(|s| s.attributes).collect();
            assert_eq!(distinct.len(), HORIZON);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let config = MarkovConfig {
            determinism: 0.5,
            concentration: Some(1.0),
            ..MarkovConfig::default()
        };
        assert_eq!(generate_markov_dataset(&config).unwrap(), generate_markov_dataset(&config).unwrap());
        let other = MarkovConfig { seed: 1, ..config.clone() };
        assert_ne!(generate_markov_dataset(&config).unwrap(), generate_markov_dataset(&other).unwrap());
    }

    #[test]
    fn partial_determinism_rate() {
        let config = MarkovConfig {
            scenes: 200,
            shots_per_scene: 50,
            determinism: 0.6,
            seed: 8,
            concentration: None,
        };
        let maps = transition_maps(8);
        let scenes = generate_markov_dataset(&config).unwrap();
        let (mut follow, mut total) = (0usize, 0usize);
        for scene in &scenes {
            for w in scene.shots.windows(2) {
                follow += (0..8)
                    .filter(|&i| maps.successor(i, w[0].attributes.get(i)) == w[1].attributes.get(i))
                    .count();
                total += 8;
            }
        }
        // P(successor) = p + (1 - p) / C_i, averaged over attributes.
        let want: f64 = CLASS_COUNTS.iter().map(|&c| 0.6 + 0.4 / c as f64).sum::<f64>() / 8.0;
        let rate = follow as f64 / total as f64;
        assert!((rate - want).abs() < 0.01, "{rate} vs {want}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = MarkovConfig {
            determinism: 1.5,
            ..MarkovConfig::default()
        };
        assert!(generate_markov_dataset(&bad).is_err());
        let bad = MarkovConfig {
            concentration: Some(0.0),
            ..MarkovConfig::default()
        };
        assert!(generate_markov_dataset(&bad).is_err());
    }
}
