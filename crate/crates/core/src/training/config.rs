//! Training configuration and its `key = value` file format.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Result, ShotError};
use crate::representation::ReprMode;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Supervised pretraining epochs.
    pub epochs: usize,
    pub rl_iterations: usize,
    pub seed: u64,
    pub repr: ReprMode,
    /// Also train steps 1..4 of each episode, advancing with ground truth.
    pub teacher_forcing: bool,
    /// Offset between consecutive training episodes within a scene.
    pub stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            gamma: 0.95,
            batch_size: 32,
            epochs: 50,
            rl_iterations: 200,
            seed: 0,
            repr: ReprMode::OneHot,
            teacher_forcing: true,
            stride: 1,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| ShotError::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ShotError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("actor_lr", self.actor_lr)?;
        positive("critic_lr", self.critic_lr)?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(ShotError::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(ShotError::Config("batch_size must be positive".into()));
        }
        if self.stride == 0 {
            return Err(ShotError::Config("stride must be positive".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "repr" | "concentration" => self.apply_pairs(&[(key.to_string(), value.to_string())]),
            _ => self.set_scalar(key, value),
        }
    }

    fn set_scalar(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "actor_lr" => self.actor_lr = parse_value(key, value)?,
            "critic_lr" => self.critic_lr = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "rl_iterations" => self.rl_iterations = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "teacher_forcing" => self.teacher_forcing = parse_value(key, value)?,
            "stride" => self.stride = parse_value(key, value)?,
            other => return Err(ShotError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ShotError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let mut config = Self::default();
        config.apply_pairs(&pairs)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies settings so that `concentration` may appear before or after
    /// `repr`. A concentration is ignored unless the mode is synthetic.
    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let concentration = pairs.iter().rev().find(|(k, _)| k == "concentration");
        for (key, value) in pairs.iter().filter(|(k, _)| k != "concentration" && k != "repr") {
            self.set_scalar(key, value)?;
        }
        let concentration = concentration
            .map(|(k, v)| parse_value::<f64>(k, v))
            .transpose()?
            .or(self.repr.concentration());
        if let Some((_, repr)) = pairs.iter().rev().find(|(k, _)| k == "repr") {
            self.repr = ReprMode::from_parts(repr, concentration)?;
        } else if let (Some(c), ReprMode::Synthetic { .. }) = (concentration, self.repr) {
            self.repr = ReprMode::Synthetic { concentration: c };
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every field as `key -> value`, in the config file syntax.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("actor_lr".into(), self.actor_lr.to_string());
        m.insert("critic_lr".into(), self.critic_lr.to_string());
        m.insert("gamma".into(), self.gamma.to_string());
        m.insert("batch_size".into(), self.batch_size.to_string());
        m.insert("epochs".into(), self.epochs.to_string());
        m.insert("rl_iterations".into(), self.rl_iterations.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("repr".into(), self.repr.name().into());
        if let Some(c) = self.repr.concentration() {
            m.insert("concentration".into(), c.to_string());
        }
        m.insert("teacher_forcing".into(), self.teacher_forcing.to_string());
        m.insert("stride".into(), self.stride.to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
