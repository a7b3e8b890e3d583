//! SGD / SGD-X schema and dialogue files.
//!
//! Schemas and dialogues are parsed into typed documents that keep unknown
//! fields, so anything written back out stays a drop-in replacement for the
//! original file.

mod dialogue;
mod schema;

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::json;

pub use dialogue::{
    dialogue_files, load_dialogues, parse_dialogues, Dialogue, DialogueState, Frame, SlotValues,
    Speaker, Turn,
};
pub use schema::{
    load_schemas, parse_schemas, schemas_to_string, validate_schemas, write_schemas, ElementKind,
    IntentDef, OptionalSlots, SchemaDocument, SchemaElementRef, SlotDef,
};

/// Whether invariant violations abort loading or are only logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

/// Every paraphrasable description, in service order and, within a service,
/// the service description, then slots, then intents (each in file order).
pub fn extract_descriptions(schemas: &[SchemaDocument]) -> Vec<(SchemaElementRef, String)> {
    let mut out = Vec::new();
    for s in schemas {
        out.push((
            SchemaElementRef::service(&s.service_name),
            s.service_description.clone(),
        ));
        for slot in &s.slots {
            out.push((
                SchemaElementRef::slot(&s.service_name, &slot.name),
                slot.description.clone(),
            ));
        }
        for intent in &s.intents {
            out.push((
                SchemaElementRef::intent(&s.service_name, &intent.name),
                intent.description.clone(),
            ));
        }
    }
    out
}

/// Marks each test service as seen iff a service of the same name exists in
/// the training split.
pub fn mark_seen_services(
    train: &[SchemaDocument],
    test: &[SchemaDocument],
) -> BTreeMap<String, bool> {
    test.iter()
        .map(|t| {
            let seen = train.iter().any(|s| s.service_name == t.service_name);
            (t.service_name.clone(), seen)
        })
        .collect()
}

/// Fraction of dialogues in which at least one frame belongs to a service
/// that is not seen. Services missing from `seen` count as unseen.
pub fn unseen_dialogue_fraction(dialogues: &[Dialogue], seen: &BTreeMap<String, bool>) -> f64 {
    if dialogues.is_empty() {
        return 0.0;
    }
    let unseen = dialogues
        .iter()
        .filter(|d| {
            d.turns
                .iter()
                .flat_map(|t| &t.frames)
                .any(|f| !seen.get(&f.service).copied().unwrap_or(false))
        })
        .count();
    unseen as f64 / dialogues.len() as f64
}

#[derive(Serialize)]
struct NormalizedTurn<'a> {
    record: &'static str,
    dialogue_id: &'a str,
    turn: usize,
    speaker: Speaker,
    utterance: &'a str,
    states: BTreeMap<&'a str, serde_json::Value>,
}

/// Writes a flat JSONL view of schemas and dialogues, one record per
/// description and per turn. Meant for eyeballing and diffing, not reloading.
pub fn dump_normalized<W: Write>(
    mut out: W,
    schemas: &[SchemaDocument],
    dialogues: &[Dialogue],
) -> std::io::Result<()> {
    for (element, text) in extract_descriptions(schemas) {
        let row = json!({"record": "description", "element": element, "description": text});
        writeln!(out, "{row}")?;
    }
    for d in dialogues {
        for (i, t) in d.turns.iter().enumerate() {
            let states = t
                .frames
                .iter()
                .filter_map(|f| {
                    f.state.as_ref().map(|s| {
                        (
                            f.service.as_str(),
                            json!({"active_intent": s.active_intent, "slot_values": s.slot_values}),
                        )
                    })
                })
                .collect();
            let row = NormalizedTurn {
                record: "turn",
                dialogue_id: &d.dialogue_id,
                turn: i,
                speaker: t.speaker,
                utterance: &t.utterance,
                states,
            };
            serde_json::to_writer(&mut out, &row)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    fn slot(name: &str, desc: &str) -> SlotDef {
        SlotDef {
            name: name.into(),
            description: desc.into(),
            is_categorical: false,
            possible_values: vec![],
            extra: Default::default(),
        }
    }

    pub fn service(name: &str, slots: &[(&str, &str)], intents: &[(&str, &str)]) -> SchemaDocument {
        SchemaDocument {
            service_name: name.into(),
            service_description: format!("Service {name}"),
            slots: slots.iter().map(|(n, d)| slot(n, d)).collect(),
            intents: intents
                .iter()
                .map(|(n, d)| IntentDef {
                    name: (*n).into(),
                    description: (*d).into(),
                    required_slots: vec![],
                    optional_slots: Default::default(),
                    extra: Default::default(),
                })
                .collect(),
            extra: Default::default(),
        }
    }
}
