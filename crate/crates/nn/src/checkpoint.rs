//! Versioned checkpoint files.
//!
//! ```text
//! shotwright-ckpt v1
//! section <name> [key=value ...]
//! param <name> <d0>x<d1>...
//! <16 hex digits per f64, space separated>
//! end
//! ```
//!
//! Values are written as their IEEE-754 bit patterns so a save/load cycle
//! reproduces every parameter exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{NnError, Result};
use crate::param::ParamStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_HEADER: &str = "shotwright-ckpt v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub value: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn from_store(name: &str, meta: Vec<(String, String)>, store: &ParamStore) -> Self {
        Self {
            name: name.to_string(),
            meta,
            entries: store
                .iter()
                .map(|p| Entry {
                    name: p.name.clone(),
                    value: p.value.clone(),
                })
                .collect(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Copies entry values into the matching parameters of `store`. Every
    /// parameter must be present with an identical shape.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        for p in store.iter() {
            let entry = self
                .entries
                .iter()
                .find(|e| e.name == p.name)
                .ok_or_else(|| NnError::Checkpoint(format!("section `{}` lacks parameter `{}`", self.name, p.name)))?;
            if entry.value.shape() != p.shape() {
                return Err(NnError::CheckpointShape {
                    name: p.name.clone(),
                    expected: p.shape().to_vec(),
                    found: entry.value.shape().to_vec(),
                });
            }
        }
        if self.entries.len() != store.len() {
            return Err(NnError::Checkpoint(format!(
                "section `{}` has {} parameters, model has {}",
                self.name,
                self.entries.len(),
                store.len()
            )));
        }
        for p in store.iter_mut() {
            let entry = self.entries.iter().find(|e| e.name == p.name).expect("checked above");
            p.value = entry.value.clone();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub sections: Vec<Section>,
}

impl Checkpoint {
    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing section `{name}`")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_HEADER);
        out.push('\n');
        for s in &self.sections {
            out.push_str("section ");
            out.push_str(&s.name);
            for (k, v) in &s.meta {
                let _ = write!(out, " {k}={v}");
            }
            out.push('\n');
            for e in &s.entries {
                let dims: Vec<String> = e.value.shape().iter().map(|d| d.to_string()).collect();
                let _ = writeln!(out, "param {} {}", e.name, dims.join("x"));
                let words: Vec<String> = e.value.data().iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                out.push_str(&words.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == CHECKPOINT_HEADER => {}
            Some((_, h)) => {
                return Err(NnError::Checkpoint(format!(
                    "unsupported version header `{h}`, expected `{CHECKPOINT_HEADER}`"
                )))
            }
            None => return Err(NnError::Checkpoint("empty file, missing version header".into())),
        }
        let mut ckpt = Checkpoint::default();
        let mut finished = false;
        while let Some((no, line)) = lines.next() {
            let lineno = no + 1;
            if line == "end" {
                finished = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("section ") {
                let mut parts = rest.split(' ');
                let name = parts.next().unwrap_or_default().to_string();
                let meta = parts
                    .map(|kv| {
                        kv.split_once('=')
                            .map(|(k, v)| (k.to_string(), v.to_string()))
                            .ok_or_else(|| NnError::Checkpoint(format!("line {lineno}: bad metadata `{kv}`")))
                    })
                    .collect::<Result<_>>()?;
                ckpt.sections.push(Section {
                    name,
                    meta,
                    entries: Vec::new(),
                });
            } else if let Some(rest) = line.strip_prefix("param ") {
                let (name, dims) = rest
                    .split_once(' ')
                    .ok_or_else(|| NnError::Checkpoint(format!("line {lineno}: missing shape")))?;
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| NnError::Checkpoint(format!("line {lineno}: bad shape `{dims}`")))?;
                let (_, values) = lines
                    .next()
                    .ok_or_else(|| NnError::Checkpoint(format!("truncated after line {lineno}")))?;
                let data = values
                    .split(' ')
                    .filter(|w| !w.is_empty())
                    .map(|w| u64::from_str_radix(w, 16).map(f64::from_bits))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| NnError::Checkpoint(format!("line {}: bad value word", lineno + 1)))?;
                let value = Tensor::new(shape, data)
                    .map_err(|e| NnError::Checkpoint(format!("parameter `{name}`: {e}")))?;
                let section = ckpt
                    .sections
                    .last_mut()
                    .ok_or_else(|| NnError::Checkpoint(format!("line {lineno}: parameter outside a section")))?;
                section.entries.push(Entry {
                    name: name.to_string(),
                    value,
                });
            } else {
                return Err(NnError::Checkpoint(format!("line {lineno}: unexpected `{line}`")));
            }
        }
        if !finished {
            return Err(NnError::Checkpoint("truncated file, missing `end` marker".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
