use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::Strictness;
use crate::error::{json_error_offset, Error, Result};

/// One service API from an SGD-style `schema.json`.
///
/// Fields not modelled here are kept in `extra` so that re-serialized
/// schemas keep everything the source file carried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub service_name: String,
    #[serde(rename = "description")]
    pub service_description: String,
    #[serde(default)]
    pub slots: Vec<SlotDef>,
    #[serde(default)]
    pub intents: Vec<IntentDef>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub is_categorical: bool,
    #[serde(default)]
    pub possible_values: Vec<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// SGD stores optional slots as a `slot -> default value` object; some
/// third-party files use a plain list instead. Both are accepted and
/// written back in the form they were read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OptionalSlots {
    Defaults(Map<String, Value>),
    Names(Vec<String>),
}

impl Default for OptionalSlots {
    fn default() -> Self {
        OptionalSlots::Defaults(Map::new())
    }
}

impl OptionalSlots {
    pub fn names(&self) -> Vec<&str> {
        match self {
            OptionalSlots::Defaults(m) => m.keys().map(String::as_str).collect(),
            OptionalSlots::Names(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDef {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub required_slots: Vec<String>,
    #[serde(default)]
    pub optional_slots: OptionalSlots,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ElementKind {
    Service,
    Slot,
    Intent,
}

/// Points at one description-bearing element of a schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemaElementRef {
    pub service_name: String,
    pub element_kind: ElementKind,
    pub element_name: String,
}

impl SchemaElementRef {
    pub fn service(service: &str) -> Self {
        Self {
            service_name: service.to_string(),
            element_kind: ElementKind::Service,
            element_name: service.to_string(),
        }
    }

    pub fn slot(service: &str, slot: &str) -> Self {
        Self {
            service_name: service.to_string(),
            element_kind: ElementKind::Slot,
            element_name: slot.to_string(),
        }
    }

    pub fn intent(service: &str, intent: &str) -> Self {
        Self {
            service_name: service.to_string(),
            element_kind: ElementKind::Intent,
            element_name: intent.to_string(),
        }
    }
}

impl fmt::Display for SchemaElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.element_kind {
            ElementKind::Service => "service",
            ElementKind::Slot => "slot",
            ElementKind::Intent => "intent",
        };
        write!(f, "{}/{}/{}", self.service_name, kind, self.element_name)
    }
}

impl SchemaDocument {
    pub fn slot(&self, name: &str) -> Option<&SlotDef> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// Description of the referenced element, if it belongs to this service.
    pub fn description_of(&self, element: &SchemaElementRef) -> Option<&str> {
        if element.service_name != self.service_name {
            return None;
        }
        match element.element_kind {
            ElementKind::Service => Some(&self.service_description),
            ElementKind::Slot => self.slot(&element.element_name).map(|s| s.description.as_str()),
            ElementKind::Intent => self
                .intents
                .iter()
                .find(|i| i.name == element.element_name)
                .map(|i| i.description.as_str()),
        }
    }

    /// Replaces the description of `element`. Returns false when the
    /// element does not exist in this service.
    pub fn set_description(&mut self, element: &SchemaElementRef, text: &str) -> bool {
        if element.service_name != self.service_name {
            return false;
        }
        let slot = match element.element_kind {
            ElementKind::Service => Some(&mut self.service_description),
            ElementKind::Slot => self
                .slots
                .iter_mut()
                .find(|s| s.name == element.element_name)
                .map(|s| &mut s.description),
            ElementKind::Intent => self
                .intents
                .iter_mut()
                .find(|i| i.name == element.element_name)
                .map(|i| &mut i.description),
        };
        match slot {
            Some(d) => {
                *d = text.to_string();
                true
            }
            None => false,
        }
    }

    /// Checks the document invariants, returning every violation found.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.service_description.trim().is_empty() {
            out.push("service description is empty".to_string());
        }
        let mut names = HashSet::new();
        for slot in &self.slots {
            if !names.insert(slot.name.as_str()) {
                out.push(format!("duplicate slot name {:?}", slot.name));
            }
            if slot.description.trim().is_empty() {
                out.push(format!("slot {:?} has an empty description", slot.name));
            }
            if slot.is_categorical && slot.possible_values.len() < 2 {
                out.push(format!(
                    "categorical slot {:?} has {} possible value(s), need at least 2",
                    slot.name,
                    slot.possible_values.len()
                ));
            }
        }
        let mut intent_names = HashSet::new();
        for intent in &self.intents {
            if !intent_names.insert(intent.name.as_str()) {
                out.push(format!("duplicate intent name {:?}", intent.name));
            }
            if intent.description.trim().is_empty() {
                out.push(format!("intent {:?} has an empty description", intent.name));
            }
            let referenced = intent
                .required_slots
                .iter()
                .map(String::as_str)
                .chain(intent.optional_slots.names());
            for slot in referenced {
                if !names.contains(slot) {
                    out.push(format!(
                        "intent {:?} references unknown slot {slot:?}",
                        intent.name
                    ));
                }
            }
        }
        out
    }
}

/// Parses a schema file body. `path` is only used for error messages.
pub fn parse_schemas(text: &str, path: &Path, strictness: Strictness) -> Result<Vec<SchemaDocument>> {
    let schemas: Vec<SchemaDocument> = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: json_error_offset(text, &e),
        message: e.to_string(),
    })?;
    validate_schemas(&schemas, strictness)?;
    Ok(schemas)
}

pub fn validate_schemas(schemas: &[SchemaDocument], strictness: Strictness) -> Result<()> {
    let mut services = HashSet::new();
    for schema in schemas {
        let mut problems = schema.violations();
        if !services.insert(schema.service_name.as_str()) {
            problems.push("service appears more than once".to_string());
        }
        for slot in &schema.slots {
            if !slot.is_categorical && !slot.possible_values.is_empty() {
                log::debug!(
                    "{}: non-categorical slot {:?} lists example values",
                    schema.service_name,
                    slot.name
                );
            }
        }
        if problems.is_empty() {
            continue;
        }
        match strictness {
            Strictness::Strict => {
                return Err(Error::validation(
                    format!("service {}", schema.service_name),
                    problems.join("; "),
                ))
            }
            Strictness::Lenient => {
                for p in problems {
                    log::warn!("service {}: {p}", schema.service_name);
                }
            }
        }
    }
    Ok(())
}

/// Loads an SGD `schema.json` (a JSON array of services), preserving order.
pub fn load_schemas(path: impl AsRef<Path>, strictness: Strictness) -> Result<Vec<SchemaDocument>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schemas(&text, path, strictness)
}

/// Serializes schemas the way SGD ships them (two-space indented JSON array).
pub fn schemas_to_string(schemas: &[SchemaDocument]) -> String {
    let mut s = serde_json::to_string_pretty(schemas).expect("schema documents serialize");
    s.push('\n');
    s
}

pub fn write_schemas(path: impl AsRef<Path>, schemas: &[SchemaDocument]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, schemas_to_string(schemas)).map_err(|e| Error::io(path, e))
}
