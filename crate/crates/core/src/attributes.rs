//! Attribute taxonomy, shot records, episode sampling and the dataset file format.
//!
//! Dataset files are line-oriented:
//!
//! ```text
//! shotwright-dataset v1
//! <scene_id>\t<shot_id>\t<c1>,...,<c8>[\t<51 comma-separated decimals>]
//! ```
//!
//! Shots keep file order within a scene; scenes keep the order in which
//! their id first appears. Lines starting with `#` and blank lines are skipped.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, ShotError};
use crate::representation::AttributeDistribution;

pub const NUM_ATTRIBUTES: usize = 8;
/// Class count per attribute, in storage order.
pub const CLASS_COUNTS: [usize; NUM_ATTRIBUTES] = [7, 6, 3, 6, 6, 9, 8, 6];
/// Start of each attribute's block inside a 51-dim distribution.
pub const BLOCK_OFFSETS: [usize; NUM_ATTRIBUTES] = [0, 7, 13, 16, 22, 28, 37, 45];
pub const DISTRIBUTION_DIM: usize = 51;
/// Shots of history the editor conditions on.
pub const CONTEXT_LEN: usize = 4;
/// Shots predicted per episode.
pub const HORIZON: usize = 5;
pub const EPISODE_LEN: usize = CONTEXT_LEN + HORIZON;
pub const CONTEXT_DIM: usize = CONTEXT_LEN * DISTRIBUTION_DIM;

pub const DATASET_HEADER: &str = "shotwright-dataset v1";
pub const TAXONOMY_HEADER: &str = "shotwright-taxonomy v1";

const DEFAULT_ATTRIBUTES: [(&str, &[&str]); NUM_ATTRIBUTES] = [
    ("number_of_people", &["none", "one", "two", "three", "four", "five", "crowd"]),
    ("shot_angle", &["aerial", "eye level", "high angle", "low angle", "overhead", "dutch angle"]),
    ("shot_location", &["exterior", "interior", "mixed"]),
    ("shot_motion", &["locked", "handheld", "pan", "tilt", "zoom", "tracking"]),
    ("shot_size", &["extreme wide", "wide", "medium", "medium close-up", "close-up", "extreme close-up"]),
    (
        "shot_subject",
        &["human", "face", "body part", "group", "animal", "object", "text", "location", "vehicle"],
    ),
    (
        "shot_type",
        &["single", "two shot", "three shot", "group shot", "over the shoulder", "insert", "establishing", "point of view"],
    ),
    ("sound_source", &["dialogue", "voiceover", "music", "ambient", "effects", "silence"]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub class_names: Vec<String>,
}

impl Attribute {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }
}

/// The eight attribute families. Names are configuration; counts are fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTaxonomy {
    attributes: Vec<Attribute>,
}

impl Default for AttributeTaxonomy {
    fn default() -> Self {
        Self {
            attributes: DEFAULT_ATTRIBUTES
                .iter()
                .map(|(name, classes)| Attribute {
                    name: name.to_string(),
                    class_names: classes.iter().map(|c| c.to_string()).collect(),
                })
                .collect(),
        }
    }
}

impl AttributeTaxonomy {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.len() != NUM_ATTRIBUTES {
            return Err(ShotError::InvalidArgument(format!(
                "taxonomy needs {NUM_ATTRIBUTES} attributes, got {}",
                attributes.len()
            )));
        }
        for (attr, &count) in attributes.iter().zip(&CLASS_COUNTS) {
            if attr.name.trim().is_empty() {
                return Err(ShotError::InvalidArgument("empty attribute name".into()));
            }
            if attr.class_count() != count {
                return Err(ShotError::InvalidArgument(format!(
                    "attribute `{}` must have {count} classes, got {}",
                    attr.name,
                    attr.class_count()
                )));
            }
            let mut seen = HashSet::new();
            for class in &attr.class_names {
                if class.trim().is_empty() || !seen.insert(class.as_str()) {
                    return Err(ShotError::InvalidArgument(format!(
                        "attribute `{}` has an empty or duplicate class name `{class}`",
                        attr.name
                    )));
                }
            }
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute_name(&self, index: usize) -> &str {
        &self.attributes[index].name
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h.trim() == TAXONOMY_HEADER => {}
            Some((no, h)) => {
                return Err(ShotError::Parse {
                    line: no + 1,
                    message: format!("expected header `{TAXONOMY_HEADER}`, found `{h}`"),
                })
            }
            None => {
                return Err(ShotError::Parse {
                    line: 1,
                    message: "empty taxonomy file".into(),
                })
            }
        }
        let mut attributes = Vec::new();
        for (no, line) in lines {
            let (name, classes) = line.split_once('\t').ok_or_else(|| ShotError::Parse {
                line: no + 1,
                message: "expected `<attribute>\\t<class>,<class>,...`".into(),
            })?;
            attributes.push(Attribute {
                name: name.trim().to_string(),
                class_names: classes.split(',').map(|c| c.trim().to_string()).collect(),
            });
        }
        Self::new(attributes)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{TAXONOMY_HEADER}\n");
        for a in &self.attributes {
            let _ = writeln!(out, "{}\t{}", a.name, a.class_names.join(","));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// One class index per attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttributeVector([usize; NUM_ATTRIBUTES]);

impl AttributeVector {
    pub fn new(classes: [usize; NUM_ATTRIBUTES]) -> Result<Self> {
        for (i, (&c, &count)) in classes.iter().zip(&CLASS_COUNTS).enumerate() {
            if c >= count {
                return Err(ShotError::AttributeOutOfRange {
                    attribute: DEFAULT_ATTRIBUTES[i].0.to_string(),
                    value: c,
                    classes: count,
                });
            }
        }
        Ok(Self(classes))
    }

    pub fn classes(&self) -> &[usize; NUM_ATTRIBUTES] {
        &self.0
    }

    pub fn get(&self, attribute: usize) -> usize {
        self.0[attribute]
    }

    /// Number of attributes on which the two vectors disagree.
    pub fn hamming(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn to_csv(&self) -> String {
        self.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub shot_id: String,
    pub scene_id: String,
    pub attributes: AttributeVector,
    /// Precomputed representation, e.g. from a vision-language model.
    pub distribution: Option<AttributeDistribution>,
}

impl Shot {
    /// The stored distribution, or the one-hot encoding of the attributes.
    pub fn representation(&self) -> AttributeDistribution {
        self.distribution
            .clone()
            .unwrap_or_else(|| crate::representation::one_hot_encode(&self.attributes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub shots: Vec<Shot>,
}

/// Nine consecutive shots: four of context followed by five targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub context: [Shot; CONTEXT_LEN],
    pub targets: [Shot; HORIZON],
}

impl Episode {
    pub fn from_window(window: &[Shot]) -> Result<Self> {
        if window.len() != EPISODE_LEN {
            return Err(ShotError::InvalidArgument(format!(
                "an episode needs {EPISODE_LEN} shots, got {}",
                window.len()
            )));
        }
        Ok(Self {
            context: std::array::from_fn(|i| window[i].clone()),
            targets: std::array::from_fn(|i| window[CONTEXT_LEN + i].clone()),
        })
    }

    pub fn shots(&self) -> impl Iterator<Item = &Shot> {
        self.context.iter().chain(self.targets.iter())
    }
}

/// Windows of nine consecutive shots starting at `0, stride, 2 * stride, ..`.
/// Scenes shorter than nine shots yield nothing.
///
/// # Panics
/// If `stride` is zero.
pub fn sample_episodes(scene: &Scene, stride: usize) -> Vec<Episode> {
    assert!(stride > 0, "episode stride must be positive");
    if scene.shots.len() < EPISODE_LEN {
        return Vec::new();
    }
    (0..=scene.shots.len() - EPISODE_LEN)
        .step_by(stride)
        .map(|start| Episode::from_window(&scene.shots[start..start + EPISODE_LEN]).expect("window length"))
        .collect()
}

pub fn sample_all_episodes(scenes: &[Scene], stride: usize) -> Vec<Episode> {
    scenes.iter().flat_map(|s| sample_episodes(s, stride)).collect()
}

fn parse_shot_line(line: &str, lineno: usize, taxonomy: &AttributeTaxonomy) -> Result<Shot> {
    let parse_err = |message: String| ShotError::Parse { line: lineno, message };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 && fields.len() != 4 {
        return Err(parse_err(format!("expected 3 or 4 tab-separated fields, got {}", fields.len())));
    }
    let (scene_id, shot_id) = (fields[0].trim(), fields[1].trim());
    if scene_id.is_empty() || shot_id.is_empty() {
        return Err(parse_err("empty scene or shot id".into()));
    }
    let classes: Vec<usize> = fields[2]
        .split(',')
        .map(|c| c.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(format!("bad class index list `{}`: {e}", fields[2])))?;
    if classes.len() != NUM_ATTRIBUTES {
        return Err(parse_err(format!("expected {NUM_ATTRIBUTES} class indices, got {}", classes.len())));
    }
    for (i, &c) in classes.iter().enumerate() {
        if c >= CLASS_COUNTS[i] {
            return Err(ShotError::Parse {
                line: lineno,
                message: ShotError::AttributeOutOfRange {
                    attribute: taxonomy.attribute_name(i).to_string(),
                    value: c,
                    classes: CLASS_COUNTS[i],
                }
                .to_string(),
            });
        }
    }
    let attributes = AttributeVector::new(std::array::from_fn(|i| classes[i]))?;
    let distribution = match fields.get(3) {
        None => None,
        Some(raw) => {
            let values: Vec<f64> = raw
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(format!("bad distribution value: {e}")))?;
            Some(AttributeDistribution::new(values).map_err(|e| parse_err(e.to_string()))?)
        }
    };
    Ok(Shot {
        shot_id: shot_id.to_string(),
        scene_id: scene_id.to_string(),
        attributes,
        distribution,
    })
}

/// Parses dataset text, validating class indices against `taxonomy`.
pub fn parse_dataset(text: &str, taxonomy: &AttributeTaxonomy) -> Result<Vec<Scene>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == DATASET_HEADER => {}
        Some((_, h)) => {
            return Err(ShotError::Parse {
                line: 1,
                message: format!("expected header `{DATASET_HEADER}`, found `{h}`"),
            })
        }
        None => {
            return Err(ShotError::Parse {
                line: 1,
                message: "empty dataset file".into(),
            })
        }
    }
    let mut scenes: Vec<Scene> = Vec::new();
    let mut seen_ids: Vec<HashSet<String>> = Vec::new();
    for (no, line) in lines {
        let lineno = no + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let shot = parse_shot_line(line.trim_end_matches('\r'), lineno, taxonomy)?;
        let idx = match scenes.iter().position(|s| s.scene_id == shot.scene_id) {
            Some(i) => i,
            None => {
                scenes.push(Scene {
                    scene_id: shot.scene_id.clone(),
                    shots: Vec::new(),
                });
                seen_ids.push(HashSet::new());
                scenes.len() - 1
            }
        };
        if !seen_ids[idx].insert(shot.shot_id.clone()) {
            return Err(ShotError::Parse {
                line: lineno,
                message: format!("duplicate shot id `{}` in scene `{}`", shot.shot_id, shot.scene_id),
            });
        }
        scenes[idx].shots.push(shot);
    }
    Ok(scenes)
}

pub fn load_dataset(path: impl AsRef<Path>, taxonomy: &AttributeTaxonomy) -> Result<Vec<Scene>> {
    parse_dataset(&std::fs::read_to_string(path)?, taxonomy)
}

pub fn dataset_to_text(scenes: &[Scene]) -> String {
    let mut out = format!("{DATASET_HEADER}\n");
    for scene in scenes {
        for shot in &scene.shots {
            let _ = write!(out, "{}\t{}\t{}", scene.scene_id, shot.shot_id, shot.attributes.to_csv());
            if let Some(d) = &shot.distribution {
                let values: Vec<String> = d.values().iter().map(|v| v.to_string()).collect();
                let _ = write!(out, "\t{}", values.join(","));
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_dataset(path: impl AsRef<Path>, scenes: &[Scene]) -> Result<()> {
    std::fs::write(path, dataset_to_text(scenes))?;
    Ok(())
}
