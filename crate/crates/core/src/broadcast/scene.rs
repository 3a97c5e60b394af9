//! Synthetic lecture scenes: per-camera event salience over time, and the
//! features a view selector observes given its own switching history.
//!
//! Scene files:
//!
//! ```text
//! shotwright-scene v1
//! cameras 7
//! length <T>
//! adjacency
//! <7 rows of 7 values>
//! events
//! <T rows of 7 values>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ShotError};

pub const NUM_CAMERAS: usize = 7;
pub const FEATURE_DIM: usize = 2 * NUM_CAMERAS + 1;
/// Shot length at which the switch feature saturates.
pub const SWITCH_HORIZON: usize = 64;
pub const SCENE_HEADER: &str = "shotwright-scene v1";

/// Camera roles. They only shape the event templates.
pub const CAMERA_LABELS: [&str; NUM_CAMERAS] = [
    "slide close-up",
    "left board close-up",
    "right board close-up",
    "teacher medium shot",
    "teacher close-up",
    "long shot",
    "student shot",
];

/// Admissibility of cutting from the row camera to the column camera.
pub const ADJACENCY: [[f64; NUM_CAMERAS]; NUM_CAMERAS] = [
    [1.0, 0.5, 0.5, 0.8, 0.5, 0.8, 0.2],
    [0.5, 1.0, 0.8, 0.8, 0.5, 0.8, 0.2],
    [0.5, 0.8, 1.0, 0.8, 0.5, 0.8, 0.2],
    [0.8, 0.8, 0.8, 1.0, 0.8, 0.8, 0.5],
    [0.5, 0.5, 0.5, 0.8, 1.0, 0.5, 0.5],
    [0.8, 0.8, 0.8, 0.8, 0.5, 1.0, 0.8],
    [0.2, 0.2, 0.2, 0.5, 0.5, 0.8, 1.0],
];

/// (camera choices, shortest duration, longest duration, relative frequency)
const EVENT_TEMPLATES: [(&[usize], usize, usize, f64); 4] = [
    // slide change
    (&[0], 8, 20, 0.3),
    // board writing
    (&[1, 2], 15, 40, 0.3),
    // teacher gesture
    (&[3, 4], 8, 30, 0.25),
    // student question
    (&[6], 8, 15, 0.15),
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Event salience per camera.
    pub event: [f64; NUM_CAMERAS],
    /// Admissibility per camera given the previous view.
    pub transition: [f64; NUM_CAMERAS],
    /// Time on the current view, `min(run / 64, 1)`.
    pub switch: f64,
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(FEATURE_DIM);
        v.extend_from_slice(&self.event);
        v.extend_from_slice(&self.transition);
        v.push(self.switch);
        v
    }
}

/// The view on screen and how many steps it has been shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ViewHistory {
    pub current: Option<usize>,
    pub run_length: usize,
}

impl ViewHistory {
    pub fn push(&mut self, view: usize) {
        if self.current == Some(view) {
            self.run_length += 1;
        } else {
            self.current = Some(view);
            self.run_length = 1;
        }
    }

    /// History after showing `views[..t]`.
    pub fn of_prefix(views: &[usize], t: usize) -> Self {
        let mut h = Self::default();
        if t == 0 {
            return h;
        }
        let last = views[t - 1];
        h.current = Some(last);
        h.run_length = views[..t].iter().rev().take_while(|&&v| v == last).count();
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LectureScene {
    pub adjacency: [[f64; NUM_CAMERAS]; NUM_CAMERAS],
    /// Event salience per camera for every time step.
    pub events: Vec<[f64; NUM_CAMERAS]>,
}

impl LectureScene {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Features at `t` for a selector with the given history. Before the
    /// first view every camera is admissible.
    pub fn features(&self, t: usize, history: &ViewHistory) -> FeatureVector {
        let transition = match history.current {
            Some(v) => self.adjacency[v],
            None => [1.0; NUM_CAMERAS],
        };
        FeatureVector {
            event: self.events[t],
            transition,
            switch: (history.run_length as f64 / SWITCH_HORIZON as f64).min(1.0),
        }
    }

    pub fn to_text(&self) -> String {
        let row = |r: &[f64]| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = format!("{SCENE_HEADER}\ncameras {NUM_CAMERAS}\nlength {}\nadjacency\n", self.len());
        for r in &self.adjacency {
            let _ = writeln!(out, "{}", row(r));
        }
        out.push_str("events\n");
        for r in &self.events {
            let _ = writeln!(out, "{}", row(r));
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| ShotError::Parse {
                line: 0,
                message: format!("truncated scene file: expected {what}"),
            })
        };
        let err = |line: usize, message: String| ShotError::Parse { line, message };
        let (no, header) = next("header")?;
        if header != SCENE_HEADER {
            return Err(err(no, format!("expected header `{SCENE_HEADER}`, found `{header}`")));
        }
        let (no, cams) = next("camera count")?;
        if cams != format!("cameras {NUM_CAMERAS}") {
            return Err(err(no, format!("expected `cameras {NUM_CAMERAS}`, found `{cams}`")));
        }
        let (no, length) = next("length")?;
        let length: usize = length
            .strip_prefix("length ")
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| err(no, format!("expected `length <T>`, found `{length}`")))?;
        let parse_row = |no: usize, line: &str| -> Result<[f64; NUM_CAMERAS]> {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(no, format!("bad value: {e}")))?;
            if vals.len() != NUM_CAMERAS || vals.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(err(no, format!("expected {NUM_CAMERAS} values in [0, 1]")));
            }
            Ok(std::array::from_fn(|c| vals[c]))
        };
        let (no, tag) = next("adjacency")?;
        if tag != "adjacency" {
            return Err(err(no, format!("expected `adjacency`, found `{tag}`")));
        }
        let mut adjacency = [[0.0; NUM_CAMERAS]; NUM_CAMERAS];
        for row in &mut adjacency {
            let (no, line) = next("adjacency row")?;
            *row = parse_row(no, line)?;
        }
        let (no, tag) = next("events")?;
        if tag != "events" {
            return Err(err(no, format!("expected `events`, found `{tag}`")));
        }
        let mut events = Vec::with_capacity(length);
        for _ in 0..length {
            let (no, line) = next("event row")?;
            events.push(parse_row(no, line)?);
        }
        let (no, tag) = next("end")?;
        if tag != "end" {
            return Err(err(no, format!("expected `end`, found `{tag}`")));
        }
        Ok(Self { adjacency, events })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Piecewise-constant single-camera events. While idle, an event starts
/// with probability `event_rate` at each step; at rate 1 events run back
/// to back. Salience is drawn from [0.6, 1].
pub fn generate_scene(seed: u64, length: usize, event_rate: f64) -> Result<LectureScene> {
    if length == 0 {
        return Err(ShotError::InvalidArgument("scene length must be positive".into()));
    }
    if !(0.0..=1.0).contains(&event_rate) {
        return Err(ShotError::InvalidArgument(format!("event rate must lie in [0, 1], got {event_rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_weight: f64 = EVENT_TEMPLATES.iter().map(|t| t.3).sum();
    let mut events = Vec::with_capacity(length);
    while events.len() < length {
        if event_rate == 0.0 || rng.random::<f64>() >= event_rate {
            events.push([0.0; NUM_CAMERAS]);
            continue;
        }
        let mut pick = rng.random::<f64>() * total_weight;
        let template = EVENT_TEMPLATES
            .iter()
            .find(|t| {
                pick -= t.3;
                pick < 0.0
            })
            .unwrap_or(&EVENT_TEMPLATES[EVENT_TEMPLATES.len() - 1]);
        let camera = template.0[rng.random_range(0..template.0.len())];
        let duration = rng.random_range(template.1..=template.2);
        let salience = rng.random_range(0.6..=1.0);
        let mut row = [0.0; NUM_CAMERAS];
        row[camera] = salience;
        for _ in 0..duration.min(length - events.len()) {
            events.push(row);
        }
    }
    Ok(LectureScene {
        adjacency: ADJACENCY,
        events,
    })
}
