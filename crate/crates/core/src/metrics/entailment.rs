//! Entailment scoring through a pluggable backend.
//!
//! Templates are filled on the client side; a backend only ever sees
//! `(premise, hypothesis)` pairs and answers with one probability per pair.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TokenNormalizer;
use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "{}";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntailmentRequest {
    pub premise: String,
    pub hypothesis: String,
}

/// Ordered hypothesis templates, each with exactly one `{}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet(Vec<String>);

impl TemplateSet {
    pub fn new<I, S>(templates: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let templates: Vec<String> = templates.into_iter().map(Into::into).collect();
        if templates.is_empty() {
            return Err(Error::Config("template set is empty".into()));
        }
        for t in &templates {
            if t.matches(PLACEHOLDER).count() != 1 {
                return Err(Error::Config(format!(
                    "template {t:?} must contain exactly one {PLACEHOLDER} placeholder"
                )));
            }
        }
        Ok(Self(templates))
    }

    pub fn templates(&self) -> &[String] {
        &self.0
    }

    pub fn fill(&self, candidate: &str) -> impl Iterator<Item = String> + '_ {
        let candidate = candidate.to_string();
        self.0
            .iter()
            .map(move |t| t.replacen(PLACEHOLDER, &candidate, 1))
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self(
            [
                "{}",
                "This example has the same meaning as {}.",
                "This text is about {}.",
                "This example implies that {}.",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        )
    }
}

pub trait EntailmentBackend: Send + Sync {
    /// One probability per request, in request order.
    fn score_batch(&self, requests: &[EntailmentRequest]) -> Result<Vec<f64>>;

    fn name(&self) -> &str;
}

fn check_scores(requests: usize, scores: &[f64]) -> Result<()> {
    if scores.len() != requests {
        return Err(Error::Protocol(format!(
            "backend returned {} scores for {} pairs",
            scores.len(),
            requests
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Protocol(format!("score {bad} outside [0, 1]")));
    }
    Ok(())
}

/// Template-averaged entailment of `candidate` given `premise`.
pub fn entailment_score(
    premise: &str,
    candidate: &str,
    templates: &TemplateSet,
    backend: &dyn EntailmentBackend,
) -> Result<f64> {
    Ok(entailment_scores(premise, &[candidate], templates, backend)?[0])
}

/// Scores many candidates against one premise with a single backend call.
pub fn entailment_scores<S: AsRef<str>>(
    premise: &str,
    candidates: &[S],
    templates: &TemplateSet,
    backend: &dyn EntailmentBackend,
) -> Result<Vec<f64>> {
    let per = templates.templates().len();
    let requests: Vec<EntailmentRequest> = candidates
        .iter()
        .flat_map(|c| {
            templates.fill(c.as_ref()).map(|hypothesis| EntailmentRequest {
                premise: premise.to_string(),
                hypothesis,
            })
        })
        .collect();
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    let scores = backend.score_batch(&requests)?;
    check_scores(requests.len(), &scores)?;
    Ok(scores
        .chunks(per)
        .map(|c| c.iter().sum::<f64>() / per as f64)
        .collect())
}

/// Returns the same score for every pair.
#[derive(Debug, Clone)]
pub struct ConstantBackend(pub f64);

impl EntailmentBackend for ConstantBackend {
    fn score_batch(&self, requests: &[EntailmentRequest]) -> Result<Vec<f64>> {
        Ok(vec![self.0; requests.len()])
    }

    fn name(&self) -> &str {
        "constant"
    }
}

/// Fraction of the hypothesis' normalized tokens that also occur in the
/// premise. Deterministic and dependency-free; for tests and dry runs.
#[derive(Debug, Clone)]
pub struct OverlapStub {
    normalizer: Arc<TokenNormalizer>,
}

impl OverlapStub {
    pub fn new(normalizer: Arc<TokenNormalizer>) -> Self {
        Self { normalizer }
    }

    pub fn overlap(&self, premise: &str, hypothesis: &str) -> f64 {
        let p = self.normalizer.token_set(premise);
        let h = self.normalizer.token_set(hypothesis);
        if h.is_empty() {
            return if p.is_empty() { 1.0 } else { 0.0 };
        }
        h.intersection(&p).count() as f64 / h.len() as f64
    }
}

impl EntailmentBackend for OverlapStub {
    fn score_batch(&self, requests: &[EntailmentRequest]) -> Result<Vec<f64>> {
        Ok(requests
            .iter()
            .map(|r| self.overlap(&r.premise, &r.hypothesis))
            .collect())
    }

    fn name(&self) -> &str {
        "overlap-stub"
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CachedScore {
    pub premise: String,
    pub hypothesis: String,
    pub score: f64,
}

/// Precomputed scores keyed by a hash of premise and hypothesis.
#[derive(Debug, Default)]
pub struct CacheBackend {
    scores: HashMap<String, f64>,
}

impl CacheBackend {
    pub fn key(premise: &str, hypothesis: &str) -> String {
        let mut h = Sha256::new();
        h.update(premise.as_bytes());
        h.update([0x1f]);
        h.update(hypothesis.as_bytes());
        hex::encode(h.finalize())
    }

    /// Reads a JSONL file of `{premise, hypothesis, score}` rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut cache = Self::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: CachedScore = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                offset: 0,
                message: format!("line {}: {e}", i + 1),
            })?;
            if !(0.0..=1.0).contains(&row.score) {
                return Err(Error::Protocol(format!(
                    "{}:{}: cached score {} outside [0, 1]",
                    path.display(),
                    i + 1,
                    row.score
                )));
            }
            cache.insert(&row.premise, &row.hypothesis, row.score);
        }
        Ok(cache)
    }

    pub fn insert(&mut self, premise: &str, hypothesis: &str, score: f64) {
        self.scores.insert(Self::key(premise, hypothesis), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl EntailmentBackend for CacheBackend {
    fn score_batch(&self, requests: &[EntailmentRequest]) -> Result<Vec<f64>> {
        requests
            .iter()
            .map(|r| {
                self.scores
                    .get(&Self::key(&r.premise, &r.hypothesis))
                    .copied()
                    .ok_or_else(|| Error::CacheMiss {
                        premise: r.premise.clone(),
                        hypothesis: r.hypothesis.clone(),
                    })
            })
            .collect()
    }

    fn name(&self) -> &str {
        "cache"
    }
}

/// Wraps a backend and appends every scored pair to a JSONL file, which can
/// later be replayed through [`CacheBackend`].
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<std::fs::File>,
}

impl<B: EntailmentBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let out = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl<B: EntailmentBackend> EntailmentBackend for RecordingBackend<B> {
    fn score_batch(&self, requests: &[EntailmentRequest]) -> Result<Vec<f64>> {
        let scores = self.inner.score_batch(requests)?;
        let mut out = self.out.lock().expect("recording file lock");
        for (r, s) in requests.iter().zip(&scores) {
            let row = CachedScore {
                premise: r.premise.clone(),
                hypothesis: r.hypothesis.clone(),
                score: *s,
            };
            let line = serde_json::to_string(&row).expect("cached score serializes");
            writeln!(out, "{line}").map_err(|e| Error::io("<recording>", e))?;
        }
        Ok(scores)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    pairs: &'a [EntailmentRequest],
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
    #[serde(default)]
    #[allow(dead_code)]
    model: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
pub struct Health {
    pub status: String,
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    pub model: Option<String>,
    pub max_batch: usize,
    pub max_in_flight: usize,
    pub timeout: Duration,
    pub retries: usize,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: None,
            max_batch: 64,
            max_in_flight: 4,
            timeout: Duration::from_secs(30),
            retries: 2,
        }
    }
}

/// Client for the `POST /v1/entail` scoring service.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.max_batch == 0 || config.max_in_flight == 0 {
            return Err(Error::Config(
                "remote scorer needs max_batch >= 1 and max_in_flight >= 1".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{path}", self.config.url.trim_end_matches('/'))
    }

    pub fn health(&self) -> Result<Health> {
        let resp = self
            .client
            .get(self.endpoint("/v1/health"))
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 503 {
            return Err(Error::Transport("scorer is still loading (503)".into()));
        }
        if !status.is_success() {
            return Err(Error::Protocol(format!("health check returned {status}")));
        }
        resp.json().map_err(|e| Error::Protocol(e.to_string()))
    }

    fn post_once(&self, pairs: &[EntailmentRequest]) -> Result<Vec<f64>> {
        let body = ScoreRequest {
            pairs,
            model: self.config.model.as_deref(),
        };
        let resp = self
            .client
            .post(self.endpoint("/v1/entail"))
            .json(&body)
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            502..=504 => return Err(Error::Transport(format!("scorer unavailable ({status})"))),
            413 => {
                return Err(Error::Protocol(format!(
                    "batch of {} rejected as too large (413)",
                    pairs.len()
                )))
            }
            _ => return Err(Error::Protocol(format!("scorer returned status {status}"))),
        }
        let parsed: ScoreResponse = resp.json().map_err(|e| Error::Protocol(e.to_string()))?;
        check_scores(pairs.len(), &parsed.scores)?;
        Ok(parsed.scores)
    }

    fn post(&self, pairs: &[EntailmentRequest]) -> Result<Vec<f64>> {
        let mut attempt = 0;
        loop {
            match self.post_once(pairs) {
                Err(e) if e.is_retryable() && attempt < self.config.retries => {
                    attempt += 1;
                    log::warn!("entailment request failed ({e}); retry {attempt}");
                    std::thread::sleep(Duration::from_millis(100 * attempt as u64));
                }
                other => return other,
            }
        }
    }
}

impl EntailmentBackend for RemoteBackend {
    fn score_batch(&self, requests: &[EntailmentRequest]) -> Result<Vec<f64>> {
        let chunks: Vec<&[EntailmentRequest]> = requests.chunks(self.config.max_batch).collect();
        let mut results: Vec<Option<Result<Vec<f64>>>> = (0..chunks.len()).map(|_| None).collect();
        for (wave_idx, wave) in chunks.chunks(self.config.max_in_flight).enumerate() {
            let base = wave_idx * self.config.max_in_flight;
            std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| s.spawn(move || self.post(chunk)))
                    .collect();
                for (i, h) in handles.into_iter().enumerate() {
                    results[base + i] = Some(h.join().unwrap_or_else(|_| {
                        Err(Error::Transport("scoring thread panicked".into()))
                    }));
                }
            });
        }
        let mut scores = Vec::with_capacity(requests.len());
        for r in results {
            scores.extend(r.expect("every chunk is scored")?);
        }
        Ok(scores)
    }

    fn name(&self) -> &str {
        "remote"
    }
}
