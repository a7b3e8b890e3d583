use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::Strictness;
use crate::error::{json_error_offset, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    User,
    System,
}

/// Slot name to the list of acceptable values, in file order.
pub type SlotValues = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    #[serde(default = "none_intent")]
    pub active_intent: String,
    #[serde(default)]
    pub requested_slots: Vec<String>,
    #[serde(default)]
    pub slot_values: SlotValues,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

fn none_intent() -> String {
    "NONE".to_string()
}

impl DialogueState {
    /// Values annotated for `slot`, skipping anything that is not a string.
    pub fn values(&self, slot: &str) -> Vec<&str> {
        match self.slot_values.get(slot) {
            Some(Value::Array(vs)) => vs.iter().filter_map(Value::as_str).collect(),
            Some(Value::String(s)) => vec![s.as_str()],
            _ => Vec::new(),
        }
    }

    /// Slots with at least one value, in annotation order.
    pub fn active_slots(&self) -> impl Iterator<Item = (&str, Vec<&str>)> {
        self.slot_values
            .keys()
            .map(|k| (k.as_str(), self.values(k)))
            .filter(|(_, v)| !v.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<DialogueState>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub utterance: String,
    #[serde(default)]
    pub frames: Vec<Frame>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    #[serde(default)]
    pub services: Vec<String>,
    pub turns: Vec<Turn>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Dialogue {
    /// Indices (into `turns`) of the user turns.
    pub fn user_turns(&self) -> impl Iterator<Item = (usize, &Turn)> {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.speaker == Speaker::User)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Speaker::User } else { Speaker::System };
            if turn.speaker != expected {
                out.push(format!(
                    "turn {i} spoken by {:?}, expected {:?} (turns must alternate starting with USER)",
                    turn.speaker, expected
                ));
                break;
            }
        }
        for (i, turn) in self.turns.iter().enumerate() {
            for frame in &turn.frames {
                if !self.services.contains(&frame.service) {
                    out.push(format!(
                        "turn {i} has a frame for {:?}, which is not among the dialogue services",
                        frame.service
                    ));
                }
            }
        }
        out
    }
}

fn check(dialogues: &[Dialogue], strictness: Strictness) -> Result<()> {
    for d in dialogues {
        let problems = d.violations();
        if problems.is_empty() {
            continue;
        }
        match strictness {
            Strictness::Strict => {
                return Err(Error::validation(
                    format!("dialogue {}", d.dialogue_id),
                    problems.join("; "),
                ))
            }
            Strictness::Lenient => {
                for p in problems {
                    log::warn!("dialogue {}: {p}", d.dialogue_id);
                }
            }
        }
    }
    Ok(())
}

pub fn parse_dialogues(text: &str, path: &Path, strictness: Strictness) -> Result<Vec<Dialogue>> {
    let dialogues: Vec<Dialogue> = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: json_error_offset(text, &e),
        message: e.to_string(),
    })?;
    check(&dialogues, strictness)?;
    Ok(dialogues)
}

/// The `dialogues_*.json` files of an SGD split directory, sorted by name.
pub fn dialogue_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("dialogues_") && name.ends_with(".json") {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every dialogue file in `dir`. Files are parsed in parallel; the
/// result is ordered by file name, then by position within each file.
pub fn load_dialogues(dir: impl AsRef<Path>, strictness: Strictness) -> Result<Vec<Dialogue>> {
    let files = dialogue_files(dir.as_ref())?;
    let per_file: Vec<Vec<Dialogue>> = files
        .par_iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_dialogues(&text, path, strictness)
        })
        .collect::<Result<_>>()?;
    Ok(per_file.into_iter().flatten().collect())
}
