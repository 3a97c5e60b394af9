//! Event-driven lecture broadcasting: synthetic scenes, a parameterized
//! heuristic editor whose output defines a style, an imitation learner and
//! sequence-style metrics.

mod learner;
mod scene;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

pub use learner::{
    actor_state, train_broadcast_actor, BroadcastActor, BroadcastConfig, BroadcastCritic, BroadcastLog, ACTOR_STATE_DIM,
};
pub use scene::{
    generate_scene, FeatureVector, LectureScene, ViewHistory, ADJACENCY, CAMERA_LABELS, FEATURE_DIM, NUM_CAMERAS,
    SCENE_HEADER, SWITCH_HORIZON,
};

use crate::error::{Result, ShotError};
use crate::representation::argmax;

/// The style parameters of the heuristic editor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleParams {
    pub event_weights: [f64; NUM_CAMERAS],
    pub transition_weight: f64,
    pub switch_penalty: f64,
    pub min_shot_length: usize,
    pub bias: [f64; NUM_CAMERAS],
}

/// Named style presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StylePreset {
    /// Quick cuts that follow slide changes.
    Slides,
    /// Board close-ups and the teacher, medium-length shots.
    Board,
    /// Opens wide, never cuts back on its own, and holds shots for at least 30 steps.
    LongTakes,
    /// Camera 0 throughout.
    Constant,
}

impl StylePreset {
    pub const ALL: [StylePreset; 4] = [Self::Slides, Self::Board, Self::LongTakes, Self::Constant];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Slides => "slides",
            Self::Board => "board",
            Self::LongTakes => "long-takes",
            Self::Constant => "constant",
        }
    }

    pub fn params(&self) -> StyleParams {
        match self {
            Self::Slides => StyleParams {
                event_weights: [2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 2.5],
                transition_weight: 0.3,
                switch_penalty: 0.2,
                min_shot_length: 4,
                bias: [0.0, 0.0, 0.0, 0.0, 0.0, 0.8, 0.0],
            },
            Self::Board => StyleParams {
                event_weights: [0.0, 2.5, 2.5, 0.0, 0.0, 0.0, 0.0],
                transition_weight: 0.3,
                switch_penalty: 0.2,
                min_shot_length: 8,
                bias: [0.0, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0],
            },
            Self::LongTakes => StyleParams {
                event_weights: [2.5, 2.5, 2.5, 0.0, 0.0, 0.0, 0.0],
                transition_weight: 0.3,
                switch_penalty: 0.2,
                min_shot_length: 30,
                bias: [0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0],
            },
            Self::Constant => StyleParams {
                event_weights: [0.0; NUM_CAMERAS],
                transition_weight: 0.0,
                switch_penalty: 0.0,
                min_shot_length: 1,
                bias: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            },
        }
    }
}

impl fmt::Display for StylePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StylePreset {
    type Err = ShotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slides" | "w1" => Ok(Self::Slides),
            "board" | "w2" => Ok(Self::Board),
            "long-takes" | "w3" => Ok(Self::LongTakes),
            "constant" => Ok(Self::Constant),
            other => Err(ShotError::InvalidArgument(format!(
                "unknown style `{other}` (expected slides, board, long-takes or constant)"
            ))),
        }
    }
}

/// A camera index per time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewSequence {
    views: Vec<usize>,
}

impl ViewSequence {
    pub fn new(views: Vec<usize>) -> Result<Self> {
        if let Some(v) = views.iter().find(|&&v| v >= NUM_CAMERAS) {
            return Err(ShotError::InvalidArgument(format!("view {v} is not a camera index")));
        }
        Ok(Self { views })
    }

    pub fn views(&self) -> &[usize] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// One view per line.
    pub fn to_text(&self) -> String {
        self.views.iter().map(|v| format!("{v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let views = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<usize>().map_err(|e| ShotError::Parse {
                    line: i + 1,
                    message: format!("bad view `{l}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(views)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Heuristic scores of every camera at `t` given the current view.
pub fn heuristic_scores(
    scene: &LectureScene,
    t: usize,
    history: &ViewHistory,
    omega: &StyleParams,
) -> [f64; NUM_CAMERAS] {
    let f = scene.features(t, history);
    std::array::from_fn(|c| {
        let penalty = match history.current {
            Some(cur) if cur != c => omega.switch_penalty,
            _ => 0.0,
        };
        omega.event_weights[c] * f.event[c] + omega.transition_weight * f.transition[c] + omega.bias[c] - penalty
    })
}

/// Picks the best-scoring camera at each step, but leaves the current view
/// only once it has been shown for `min_shot_length` steps. Ties go to the
/// lower camera index.
pub fn heuristic_edit(scene: &LectureScene, omega: &StyleParams) -> Result<ViewSequence> {
    if omega.min_shot_length == 0 {
        return Err(ShotError::InvalidArgument("minimum shot length must be at least 1".into()));
    }
    let mut history = ViewHistory::default();
    let mut views = Vec::with_capacity(scene.len());
    for t in 0..scene.len() {
        let best = argmax(&heuristic_scores(scene, t, &history, omega));
        let view = match history.current {
            Some(cur) if best != cur && history.run_length < omega.min_shot_length => cur,
            _ => best,
        };
        history.push(view);
        views.push(view);
    }
    ViewSequence::new(views)
}

/// +1 on a match, -1 otherwise.
pub fn imitation_reward(predicted: usize, truth: usize) -> f64 {
    if predicted == truth {
        1.0
    } else {
        -1.0
    }
}

/// Fraction of time steps showing the same view.
pub fn overlap_ratio(predicted: &ViewSequence, truth: &ViewSequence) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(ShotError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(ShotError::Empty("view sequence"));
    }
    let same = predicted.views.iter().zip(&truth.views).filter(|(a, b)| a == b).count();
    Ok(same as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleMetrics {
    /// Mean run length.
    pub l_avg: f64,
    /// Longest run.
    pub l_max: usize,
    /// Number of cuts.
    pub n_sw: usize,
}

pub fn style_metrics(sequence: &ViewSequence) -> Result<StyleMetrics> {
    if sequence.is_empty() {
        return Err(ShotError::Empty("view sequence"));
    }
    let mut runs = Vec::new();
    let mut run = 1;
    for w in sequence.views.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            runs.push(run);
            run = 1;
        }
    }
    runs.push(run);
    Ok(StyleMetrics {
        l_avg: sequence.len() as f64 / runs.len() as f64,
        l_max: runs.iter().copied().max().unwrap_or(0),
        n_sw: runs.len() - 1,
    })
}
