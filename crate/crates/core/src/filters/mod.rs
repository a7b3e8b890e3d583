//! Heuristic candidate filtering and the entailment prefilter.

mod rules;

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::SchemaElementRef;
use crate::error::{json_error_offset, Error, Result};
use crate::metrics::{entailment_scores, EntailmentBackend, TemplateSet};

pub use rules::{
    contains_advice, describes_action, has_alphanumeric_words, has_consecutive_repeated_words,
    has_low_frequency_words, has_named_entities, has_repeated_ngrams, has_repeated_similar_bigrams,
    is_passive_voice, is_past_tense, is_question, parse_word_freq, sentence_count, FilterResources,
    RulePredicate, BUILTIN_FILTERS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default = "enabled_by_default")]
    pub enabled: bool,
}

fn enabled_by_default() -> bool {
    true
}

impl FilterSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: Map::new(),
            enabled: true,
        }
    }

    /// Every built-in filter with default parameters.
    pub fn all_builtin() -> Vec<Self> {
        BUILTIN_FILTERS.iter().map(|n| Self::new(*n)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub kept: bool,
    /// Firing filters, sorted by name.
    pub rejected_by: Vec<String>,
}

struct NamedRule {
    name: String,
    rule: RulePredicate,
}

/// An ordered set of enabled filters with unique names.
#[derive(Default)]
pub struct FilterStack {
    rules: Vec<NamedRule>,
}

impl std::fmt::Debug for FilterStack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl FilterStack {
    pub fn from_specs(specs: &[FilterSpec], resources: &FilterResources) -> Result<Self> {
        let mut names = HashSet::new();
        let mut stack = Self::default();
        for spec in specs {
            if !names.insert(spec.name.as_str()) {
                return Err(Error::Config(format!("filter {:?} listed twice", spec.name)));
            }
            // disabled filters are still validated
            let rule = rules::build_rule(&spec.name, &spec.params, resources)?;
            if spec.enabled {
                stack.rules.push(NamedRule {
                    name: spec.name.clone(),
                    rule,
                });
            }
        }
        Ok(stack)
    }

    /// Adds a user-defined filter.
    pub fn push(&mut self, name: impl Into<String>, rule: RulePredicate) -> Result<()> {
        let name = name.into();
        if self.rules.iter().any(|r| r.name == name) {
            return Err(Error::Config(format!("filter {name:?} listed twice")));
        }
        self.rules.push(NamedRule { name, rule });
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Runs every filter; no short-circuit.
    pub fn apply(&self, candidate: &str, input: &str) -> FilterVerdict {
        let mut rejected_by: Vec<String> = self
            .rules
            .iter()
            .filter(|r| (r.rule)(candidate, input))
            .map(|r| r.name.clone())
            .collect();
        rejected_by.sort();
        FilterVerdict {
            kept: rejected_by.is_empty(),
            rejected_by,
        }
    }
}

pub fn apply_filters(candidate: &str, input: &str, filters: &FilterStack) -> FilterVerdict {
    filters.apply(candidate, input)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
}

impl Candidate {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            params: Map::new(),
        }
    }
}

/// Generated paraphrases of one schema element description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub element: SchemaElementRef,
    pub input: String,
    pub candidates: Vec<Candidate>,
    #[serde(default)]
    pub provenance: String,
}

impl CandidatePool {
    pub fn new<I, S>(element: SchemaElementRef, input: impl Into<String>, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            element,
            input: input.into(),
            candidates: texts.into_iter().map(Candidate::new).collect(),
            provenance: String::new(),
        }
    }

    pub fn texts(&self) -> Vec<&str> {
        self.candidates.iter().map(|c| c.text.as_str()).collect()
    }

    fn with_candidates(&self, candidates: Vec<Candidate>) -> Self {
        Self {
            candidates,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub element: SchemaElementRef,
    pub candidate: String,
    pub rejected_by: Vec<String>,
}

/// Splits a pool into kept candidates (original order) and audit rows for the rest.
pub fn filter_pool(pool: &CandidatePool, filters: &FilterStack) -> (CandidatePool, Vec<AuditRow>) {
    let verdicts: Vec<FilterVerdict> = pool
        .candidates
        .par_iter()
        .map(|c| filters.apply(&c.text, &pool.input))
        .collect();
    let mut kept = Vec::new();
    let mut audit = Vec::new();
    for (c, v) in pool.candidates.iter().zip(verdicts) {
        if v.kept {
            kept.push(c.clone());
        } else {
            audit.push(AuditRow {
                element: pool.element.clone(),
                candidate: c.text.clone(),
                rejected_by: v.rejected_by,
            });
        }
    }
    (pool.with_candidates(kept), audit)
}

/// Keeps candidates whose template-averaged entailment is at least `threshold`.
/// A threshold of 0 or less keeps everything without calling the scorer.
pub fn entailment_prefilter(
    pool: &CandidatePool,
    threshold: f64,
    backend: &dyn EntailmentBackend,
    templates: &TemplateSet,
) -> Result<CandidatePool> {
    if threshold <= 0.0 {
        return Ok(pool.clone());
    }
    let scores = entailment_scores(&pool.input, &pool.texts(), templates, backend)?;
    let kept = pool
        .candidates
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s >= threshold)
        .map(|(c, _)| c.clone())
        .collect();
    Ok(pool.with_candidates(kept))
}

pub fn read_pools(path: impl AsRef<Path>) -> Result<Vec<CandidatePool>> {
    read_jsonl(path.as_ref())
}

pub fn write_pools(path: impl AsRef<Path>, pools: &[CandidatePool]) -> Result<()> {
    write_jsonl(path.as_ref(), pools)
}

pub fn write_audit(path: impl AsRef<Path>, rows: &[AuditRow]) -> Result<()> {
    write_jsonl(path.as_ref(), rows)
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            let row = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                offset: offset + json_error_offset(&line, &e),
                message: e.to_string(),
            })?;
            out.push(row);
        }
        offset += line.len() + 1;
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
