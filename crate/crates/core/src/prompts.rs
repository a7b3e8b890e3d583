//! D3ST and T5DST training-example serialization.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, Frame, SchemaDocument, SlotDef, Speaker, Turn};
use crate::error::{Error, Result};

pub const USR: &str = "[usr]";
pub const SYS: &str = "[sys]";
pub const SLOT: &str = "[slot]";
pub const DONTCARE: &str = "dontcare";
pub const NONE_VALUE: &str = "none";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub input: String,
    pub target: String,
    pub dialogue_id: String,
    /// Index into the dialogue's turns.
    pub turn: usize,
    pub service: String,
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
}

/// Shortens an input to fit a model budget.
pub trait Truncator: Send + Sync {
    fn truncate(&self, input: &str) -> String;
}

/// Keeps the last `max_tokens` whitespace tokens.
#[derive(Debug, Clone, Copy)]
pub struct WhitespaceTruncator {
    pub max_tokens: usize,
}

impl Truncator for WhitespaceTruncator {
    fn truncate(&self, input: &str) -> String {
        let toks: Vec<&str> = input.split_whitespace().collect();
        if toks.len() <= self.max_tokens {
            return input.to_string();
        }
        toks[toks.len() - self.max_tokens..].join(" ")
    }
}

/// How D3ST examples are cut per user turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum D3stGrouping {
    /// One example per (user turn, frame): each service in the turn gets its own prompt.
    #[default]
    PerFrame,
    /// One example per user turn, listing the slots of every service in the turn's frames.
    PerTurn,
}

#[derive(Clone, Default)]
pub struct PromptOptions {
    pub grouping: D3stGrouping,
    pub variant: String,
    /// Disabled by default; counts are computed before truncation.
    pub truncator: Option<Arc<dyn Truncator>>,
}

impl PromptOptions {
    pub fn variant(name: impl Into<String>) -> Self {
        Self {
            variant: name.into(),
            ..Default::default()
        }
    }

    fn finish(&self, input: String) -> String {
        match &self.truncator {
            Some(t) => t.truncate(&input),
            None => input,
        }
    }
}

/// `a`, `b`, ..., `z`, `aa`, `ab`, ...
pub fn option_letter(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii letters")
}

/// Inverse of [`option_letter`].
pub fn option_index(letter: &str) -> Option<usize> {
    if letter.is_empty() || !letter.bytes().all(|b| b.is_ascii_lowercase()) {
        return None;
    }
    let mut n = 0usize;
    for b in letter.bytes() {
        n = n.checked_mul(26)?.checked_add((b - b'a') as usize + 1)?;
    }
    Some(n - 1)
}

/// Options offered for a categorical slot; `dontcare` is never listed.
pub fn slot_options(slot: &SlotDef) -> Vec<&str> {
    slot.possible_values
        .iter()
        .map(String::as_str)
        .filter(|v| !v.eq_ignore_ascii_case(DONTCARE))
        .collect()
}

/// `a) v1 b) v2 ...`
pub fn render_options(options: &[&str]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{}) {v}", option_letter(i)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn render_history(turns: &[Turn]) -> String {
    turns
        .iter()
        .map(|t| {
            let marker = match t.speaker {
                Speaker::User => USR,
                Speaker::System => SYS,
            };
            format!("{marker} {}", t.utterance.trim().to_lowercase())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn schema_index(schemas: &[SchemaDocument]) -> HashMap<&str, &SchemaDocument> {
    schemas.iter().map(|s| (s.service_name.as_str(), s)).collect()
}

fn lookup<'a>(index: &HashMap<&str, &'a SchemaDocument>, service: &str) -> Result<&'a SchemaDocument> {
    index
        .get(service)
        .copied()
        .ok_or_else(|| Error::UnknownService(service.to_string()))
}

fn frame_context(d: &Dialogue, turn: usize, f: &Frame) -> String {
    format!("dialogue {} turn {turn} service {}", d.dialogue_id, f.service)
}

/// Target rendering of one slot value: the option letter for categorical
/// slots (except `dontcare`), the value itself otherwise.
fn render_value(slot: &SlotDef, value: &str, context: &dyn Fn() -> String) -> Result<String> {
    if value.eq_ignore_ascii_case(DONTCARE) || !slot.is_categorical {
        return Ok(value.to_lowercase());
    }
    let options = slot_options(slot);
    let pos = options
        .iter()
        .position(|o| *o == value)
        .or_else(|| options.iter().position(|o| o.eq_ignore_ascii_case(value)));
    match pos {
        Some(i) => Ok(option_letter(i)),
        None => Err(Error::data(
            context(),
            format!("value {value:?} is not a possible value of categorical slot {:?}", slot.name),
        )),
    }
}

/// D3ST examples for one schema version.
pub fn build_d3st(dialogues: &[Dialogue], schemas: &[SchemaDocument], options: &PromptOptions) -> Result<Vec<PromptExample>> {
    let index = schema_index(schemas);
    let per_dialogue: Vec<Vec<PromptExample>> = dialogues
        .par_iter()
        .map(|d| d3st_dialogue(d, &index, options))
        .collect::<Result<_>>()?;
    Ok(per_dialogue.into_iter().flatten().collect())
}

fn d3st_dialogue(d: &Dialogue, index: &HashMap<&str, &SchemaDocument>, options: &PromptOptions) -> Result<Vec<PromptExample>> {
    let mut out = Vec::new();
    for (t, turn) in d.user_turns() {
        let history = render_history(&d.turns[..=t]);
        let groups: Vec<Vec<&Frame>> = match options.grouping {
            D3stGrouping::PerFrame => turn.frames.iter().map(|f| vec![f]).collect(),
            D3stGrouping::PerTurn if turn.frames.is_empty() => Vec::new(),
            D3stGrouping::PerTurn => vec![turn.frames.iter().collect()],
        };
        for frames in groups {
            let mut prompt = Vec::new();
            let mut target = Vec::new();
            let mut i = 0usize;
            for f in &frames {
                let schema = lookup(index, &f.service)?;
                let state = f.state.as_ref();
                for slot in &schema.slots {
                    let mut item = format!("{i}={}", slot.description.trim());
                    if slot.is_categorical {
                        item.push(' ');
                        item.push_str(&render_options(&slot_options(slot)));
                    }
                    prompt.push(item);
                    if let Some(v) = state.and_then(|s| s.values(&slot.name).first().copied()) {
                        let ctx = || frame_context(d, t, f);
                        target.push(format!("{i}={}", render_value(slot, v, &ctx)?));
                    }
                    i += 1;
                }
            }
            let input = format!("{} {history}", prompt.join(" ")).to_lowercase();
            out.push(PromptExample {
                input: options.finish(input),
                target: target.join(" ").to_lowercase(),
                dialogue_id: d.dialogue_id.clone(),
                turn: t,
                service: frames.iter().map(|f| f.service.as_str()).collect::<Vec<_>>().join("+"),
                variant: options.variant.clone(),
                slot: None,
            });
        }
    }
    Ok(out)
}

/// T5DST examples: one per (user turn, frame, slot of the frame's service).
pub fn build_t5dst(dialogues: &[Dialogue], schemas: &[SchemaDocument], options: &PromptOptions) -> Result<Vec<PromptExample>> {
    let index = schema_index(schemas);
    let per_dialogue: Vec<Vec<PromptExample>> = dialogues
        .par_iter()
        .map(|d| t5dst_dialogue(d, &index, options))
        .collect::<Result<_>>()?;
    Ok(per_dialogue.into_iter().flatten().collect())
}

fn t5dst_dialogue(d: &Dialogue, index: &HashMap<&str, &SchemaDocument>, options: &PromptOptions) -> Result<Vec<PromptExample>> {
    let mut out = Vec::new();
    for (t, turn) in d.user_turns() {
        let history = render_history(&d.turns[..=t]);
        for f in &turn.frames {
            let schema = lookup(index, &f.service)?;
            for slot in &schema.slots {
                let mut desc = slot.description.trim().to_string();
                if slot.is_categorical {
                    desc.push(' ');
                    desc.push_str(&render_options(&slot_options(slot)));
                }
                let value = f.state.as_ref().and_then(|s| s.values(&slot.name).first().copied());
                let target = match value {
                    None => NONE_VALUE.to_string(),
                    Some(v) => {
                        // categorical values must still be one of the options
                        let ctx = || frame_context(d, t, f);
                        render_value(slot, v, &ctx)?;
                        v.to_lowercase()
                    }
                };
                let input = format!("{history} {SLOT} {desc}").to_lowercase();
                out.push(PromptExample {
                    input: options.finish(input),
                    target,
                    dialogue_id: d.dialogue_id.clone(),
                    turn: t,
                    service: f.service.clone(),
                    variant: options.variant.clone(),
                    slot: Some(slot.name.clone()),
                });
            }
        }
    }
    Ok(out)
}

/// Splits a D3ST target back into `index -> value`.
pub fn parse_target(target: &str) -> Result<BTreeMap<usize, String>> {
    let mut out = BTreeMap::new();
    let mut current: Option<(usize, Vec<&str>)> = None;
    for tok in target.split_whitespace() {
        let pair = tok
            .split_once('=')
            .and_then(|(i, v)| i.parse::<usize>().ok().map(|i| (i, v)))
            .filter(|(i, _)| !out.contains_key(i) && current.as_ref().is_none_or(|(c, _)| c != i));
        match pair {
            Some((i, v)) => {
                if let Some((ci, words)) = current.take() {
                    out.insert(ci, words.join(" "));
                }
                current = Some((i, if v.is_empty() { vec![] } else { vec![v] }));
            }
            None => match current.as_mut() {
                Some((_, words)) => words.push(tok),
                None => return Err(Error::Argument(format!("target does not start with an index: {target:?}"))),
            },
        }
    }
    if let Some((ci, words)) = current {
        out.insert(ci, words.join(" "));
    }
    Ok(out)
}

/// The base examples plus one full copy per variant, `multiplier - 1`
/// variants in order. Shuffled when a seed is given.
pub fn compose_augmented_dataset(
    base: Vec<PromptExample>,
    variants: &[Vec<PromptExample>],
    multiplier: usize,
    seed: Option<u64>,
) -> Result<Vec<PromptExample>> {
    if multiplier == 0 {
        return Err(Error::Argument("multiplier must be at least 1".into()));
    }
    let needed = multiplier - 1;
    if needed > variants.len() {
        return Err(Error::InsufficientVariants {
            needed,
            available: variants.len(),
        });
    }
    let mut out = base;
    for v in &variants[..needed] {
        out.extend(v.iter().cloned());
    }
    if let Some(seed) = seed {
        out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(out)
}

fn tsv_field(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

pub fn write_examples(path: impl AsRef<Path>, examples: &[PromptExample], tsv: bool) -> Result<()> {
    let path = path.as_ref();
    if !tsv {
        return crate::filters::write_jsonl(path, examples);
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for e in examples {
        writeln!(w, "{}\t{}", tsv_field(&e.input), tsv_field(&e.target)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
