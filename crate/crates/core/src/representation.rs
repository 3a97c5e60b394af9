//! Per-shot attribute distributions and the four-shot context window.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use shotwright_nn::softmax_in_place;

use crate::attributes::{
    AttributeVector, Scene, BLOCK_OFFSETS, CLASS_COUNTS, CONTEXT_DIM, CONTEXT_LEN, DISTRIBUTION_DIM, NUM_ATTRIBUTES,
};
use crate::error::{Result, ShotError};
use crate::training::{seeded_rng, SeedStream};

/// Allowed deviation of a block sum from one.
pub const BLOCK_SUM_TOLERANCE: f64 = 1e-6;

/// 51 probabilities, one simplex block per attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDistribution {
    values: Vec<f64>,
}

impl AttributeDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != DISTRIBUTION_DIM {
            return Err(ShotError::Distribution(format!(
                "expected {DISTRIBUTION_DIM} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ShotError::Distribution(format!("entry {v} is negative or non-finite")));
        }
        for i in 0..NUM_ATTRIBUTES {
            let sum: f64 = values[BLOCK_OFFSETS[i]..BLOCK_OFFSETS[i] + CLASS_COUNTS[i]].iter().sum();
            if (sum - 1.0).abs() > BLOCK_SUM_TOLERANCE {
                return Err(ShotError::Distribution(format!("block {i} sums to {sum}")));
            }
        }
        Ok(Self { values })
    }

    /// Uniform probabilities in every block.
    pub fn uniform() -> Self {
        let mut values = vec![0.0; DISTRIBUTION_DIM];
        for i in 0..NUM_ATTRIBUTES {
            let c = CLASS_COUNTS[i];
            values[BLOCK_OFFSETS[i]..BLOCK_OFFSETS[i] + c].fill(1.0 / c as f64);
        }
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn block(&self, attribute: usize) -> &[f64] {
        let start = BLOCK_OFFSETS[attribute];
        &self.values[start..start + CLASS_COUNTS[attribute]]
    }

    /// Per-block argmax, ties toward the lowest class index.
    pub fn argmax(&self) -> AttributeVector {
        AttributeVector::new(std::array::from_fn(|i| argmax(self.block(i)))).expect("argmax stays in range")
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

pub fn one_hot_encode(attrs: &AttributeVector) -> AttributeDistribution {
    let mut values = vec![0.0; DISTRIBUTION_DIM];
    for (i, &c) in attrs.classes().iter().enumerate() {
        values[BLOCK_OFFSETS[i] + c] = 1.0;
    }
    AttributeDistribution { values }
}

/// Raw similarity scores for one attribute, one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityBlock {
    pub scores: Vec<f64>,
}

/// Per-block softmax of similarity scores.
pub fn distribution_from_similarities(blocks: &[SimilarityBlock]) -> Result<AttributeDistribution> {
    if blocks.len() != NUM_ATTRIBUTES {
        return Err(ShotError::Distribution(format!(
            "expected {NUM_ATTRIBUTES} similarity blocks, got {}",
            blocks.len()
        )));
    }
    let mut values = Vec::with_capacity(DISTRIBUTION_DIM);
    for (i, block) in blocks.iter().enumerate() {
        if block.scores.len() != CLASS_COUNTS[i] {
            return Err(ShotError::Distribution(format!(
                "block {i} needs {} scores, got {}",
                CLASS_COUNTS[i],
                block.scores.len()
            )));
        }
        if block.scores.iter().any(|s| !s.is_finite()) {
            return Err(ShotError::Distribution(format!("block {i} has a non-finite score")));
        }
        let mut probs = block.scores.clone();
        softmax_in_place(&mut probs);
        values.extend(probs);
    }
    AttributeDistribution::new(values)
}

/// Simulated zero-shot output: standard normal noise on every score plus
/// `concentration` on the true class, then per-block softmax.
pub fn synth_distribution<R: Rng + ?Sized>(
    attrs: &AttributeVector,
    concentration: f64,
    rng: &mut R,
) -> Result<AttributeDistribution> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(ShotError::InvalidArgument(format!(
            "concentration must be positive and finite, got {concentration}"
        )));
    }
    let blocks: Vec<SimilarityBlock> = (0..NUM_ATTRIBUTES)
        .map(|i| {
            let scores = (0..CLASS_COUNTS[i])
                .map(|k| {
                    let noise: f64 = rng.sample(StandardNormal);
                    noise + if k == attrs.get(i) { concentration } else { 0.0 }
                })
                .collect();
            SimilarityBlock { scores }
        })
        .collect();
    distribution_from_similarities(&blocks)
}

/// Four shot representations in temporal order, plus their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextState {
    shots: Vec<AttributeDistribution>,
    flat: Vec<f64>,
}

impl ContextState {
    pub fn shots(&self) -> &[AttributeDistribution] {
        &self.shots
    }

    /// The 204-dim concatenation.
    pub fn flat(&self) -> &[f64] {
        &self.flat
    }
}

pub fn build_context(shots: &[AttributeDistribution]) -> Result<ContextState> {
    if shots.len() != CONTEXT_LEN {
        return Err(ShotError::InvalidArgument(format!(
            "a context holds {CONTEXT_LEN} shots, got {}",
            shots.len()
        )));
    }
    let mut flat = Vec::with_capacity(CONTEXT_DIM);
    for s in shots {
        flat.extend_from_slice(s.values());
    }
    Ok(ContextState {
        shots: shots.to_vec(),
        flat,
    })
}

/// Drops the oldest shot and appends the one-hot encoding of `action`.
pub fn advance_context(state: &ContextState, action: &AttributeVector) -> ContextState {
    let mut shots = state.shots[1..].to_vec();
    shots.push(one_hot_encode(action));
    build_context(&shots).expect("window length is preserved")
}

/// How shots are represented in the context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReprMode {
    /// Distributions stored in the dataset file; one-hot where absent.
    Stored,
    /// One-hot ground truth.
    OneHot,
    /// Synthetic noisy distributions at the given concentration.
    Synthetic { concentration: f64 },
}

impl ReprMode {
    pub fn name(&self) -> &'static str {
        match self {
            ReprMode::Stored => "stored",
            ReprMode::OneHot => "onehot",
            ReprMode::Synthetic { .. } => "synthetic",
        }
    }

    pub fn concentration(&self) -> Option<f64> {
        match self {
            ReprMode::Synthetic { concentration } => Some(*concentration),
            _ => None,
        }
    }

    /// Builds a mode from its name; `synthetic` requires a concentration.
    pub fn from_parts(name: &str, concentration: Option<f64>) -> Result<Self> {
        match (name, concentration) {
            ("stored", _) => Ok(ReprMode::Stored),
            ("onehot", _) => Ok(ReprMode::OneHot),
            ("synthetic", Some(c)) if c > 0.0 && c.is_finite() => Ok(ReprMode::Synthetic { concentration: c }),
            ("synthetic", Some(c)) => Err(ShotError::Config(format!("concentration must be positive, got {c}"))),
            ("synthetic", None) => Err(ShotError::Config("synthetic representation needs a concentration".into())),
            (other, _) => Err(ShotError::Config(format!(
                "unknown representation `{other}` (expected stored, onehot or synthetic)"
            ))),
        }
    }
}

impl fmt::Display for ReprMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReprMode::Synthetic { concentration } => write!(f, "synthetic:{concentration}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ReprMode {
    type Err = ShotError;

    /// Accepts `stored`, `onehot` or `synthetic:<concentration>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((name, c)) => {
                let c = c
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| ShotError::Config(format!("bad concentration `{c}`: {e}")))?;
                Self::from_parts(name.trim(), Some(c))
            }
            None => Self::from_parts(s.trim(), None),
        }
    }
}

/// Rewrites every shot's distribution according to `mode`. Synthetic
/// distributions are drawn from the representation stream of `seed`, in
/// scene order.
pub fn apply_representation(scenes: &[Scene], mode: ReprMode, seed: u64) -> Result<Vec<Scene>> {
    let mut rng = seeded_rng(seed, SeedStream::Representation);
    let mut out = scenes.to_vec();
    for scene in &mut out {
        for shot in &mut scene.shots {
            match mode {
                ReprMode::Stored => {}
                ReprMode::OneHot => shot.distribution = None,
                ReprMode::Synthetic { concentration } => {
                    shot.distribution = Some(synth_distribution(&shot.attributes, concentration, &mut rng)?)
                }
            }
        }
    }
    Ok(out)
}
