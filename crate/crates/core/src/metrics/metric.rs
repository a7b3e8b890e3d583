use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use super::entailment::{entailment_scores, EntailmentBackend, TemplateSet};
use super::{jaccard_distance, string_similarity, TokenNormalizer};
use crate::error::{Error, Result};

pub const JACCARD: &str = "J";
pub const ENTAILMENT: &str = "E";
pub const STRING_SIMILARITY: &str = "S";

/// A metric name plus the number of decimals kept when its values key a tree node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricId {
    pub name: String,
    pub decimals: u32,
}

impl MetricId {
    pub fn new(name: impl Into<String>, decimals: u32) -> Self {
        Self {
            name: name.into(),
            decimals,
        }
    }

    pub fn quantize(&self, value: f64) -> QuantizedValue {
        QuantizedValue::new(value, self.decimals)
    }
}

/// A metric value rounded to a fixed number of decimals, stored as an
/// integer count of `10^-decimals` units so equality is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedValue {
    units: i64,
    decimals: u32,
}

impl QuantizedValue {
    pub fn new(value: f64, decimals: u32) -> Self {
        let scale = 10f64.powi(decimals as i32);
        Self {
            units: (value * scale).round() as i64,
            decimals,
        }
    }

    pub fn from_units(units: i64, decimals: u32) -> Self {
        Self { units, decimals }
    }

    pub fn units(&self) -> i64 {
        self.units
    }

    pub fn decimals(&self) -> u32 {
        self.decimals
    }

    pub fn is_zero(&self) -> bool {
        self.units == 0
    }

    pub fn value(&self) -> f64 {
        self.units as f64 / 10f64.powi(self.decimals as i32)
    }

    fn scaled(&self, decimals: u32) -> i128 {
        self.units as i128 * 10i128.pow(decimals - self.decimals)
    }
}

impl Ord for QuantizedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.decimals.max(other.decimals);
        self.scaled(d).cmp(&other.scaled(d))
    }
}

impl PartialOrd for QuantizedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for QuantizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.*}", self.decimals as usize, self.value())
    }
}

impl Serialize for QuantizedValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

/// Rounds `value` to `decimals` places.
pub fn quantize(value: f64, decimals: u32) -> f64 {
    QuantizedValue::new(value, decimals).value()
}

/// A distance or similarity between the input description and a candidate.
pub trait Metric: Send + Sync {
    fn id(&self) -> &MetricId;

    fn eval(&self, input: &str, candidate: &str) -> Result<f64>;

    /// Scores many candidates at once. Backends with per-call overhead
    /// (remote entailment) override this.
    fn eval_many(&self, input: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        candidates.iter().map(|c| self.eval(input, c)).collect()
    }
}

pub struct JaccardMetric {
    id: MetricId,
    normalizer: Arc<TokenNormalizer>,
}

impl JaccardMetric {
    pub fn new(normalizer: Arc<TokenNormalizer>) -> Self {
        Self {
            id: MetricId::new(JACCARD, 2),
            normalizer,
        }
    }
}

impl Metric for JaccardMetric {
    fn id(&self) -> &MetricId {
        &self.id
    }

    fn eval(&self, input: &str, candidate: &str) -> Result<f64> {
        Ok(jaccard_distance(input, candidate, &self.normalizer))
    }
}

pub struct StringSimilarityMetric {
    id: MetricId,
}

impl Default for StringSimilarityMetric {
    fn default() -> Self {
        Self {
            id: MetricId::new(STRING_SIMILARITY, 0),
        }
    }
}

impl Metric for StringSimilarityMetric {
    fn id(&self) -> &MetricId {
        &self.id
    }

    fn eval(&self, input: &str, candidate: &str) -> Result<f64> {
        Ok(string_similarity(input, candidate))
    }
}

pub struct EntailmentMetric {
    id: MetricId,
    backend: Arc<dyn EntailmentBackend>,
    templates: TemplateSet,
}

impl EntailmentMetric {
    pub fn new(backend: Arc<dyn EntailmentBackend>, templates: TemplateSet) -> Self {
        Self {
            id: MetricId::new(ENTAILMENT, 2),
            backend,
            templates,
        }
    }
}

impl Metric for EntailmentMetric {
    fn id(&self) -> &MetricId {
        &self.id
    }

    fn eval(&self, input: &str, candidate: &str) -> Result<f64> {
        Ok(self.eval_many(input, &[candidate])?[0])
    }

    fn eval_many(&self, input: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        entailment_scores(input, candidates, &self.templates, self.backend.as_ref())
    }
}

/// Looks candidate values up in a table. Used for precomputed scores (for
/// example BLEURT) and for fixtures.
pub struct TableMetric {
    id: MetricId,
    values: HashMap<String, f64>,
}

impl TableMetric {
    pub fn new(id: MetricId, values: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self {
            id,
            values: values.into_iter().collect(),
        }
    }
}

impl Metric for TableMetric {
    fn id(&self) -> &MetricId {
        &self.id
    }

    fn eval(&self, _input: &str, candidate: &str) -> Result<f64> {
        self.values
            .get(candidate)
            .copied()
            .ok_or_else(|| Error::Argument(format!("{} has no value for {candidate:?}", self.id.name)))
    }
}

/// Metrics by name. Names are unique.
#[derive(Default, Clone)]
pub struct MetricRegistry {
    metrics: Vec<Arc<dyn Metric>>,
}

impl MetricRegistry {
    /// J, E and S over the given normalizer and entailment backend.
    pub fn with_builtins(
        normalizer: Arc<TokenNormalizer>,
        backend: Arc<dyn EntailmentBackend>,
        templates: TemplateSet,
    ) -> Self {
        let mut r = Self::default();
        r.register(Arc::new(JaccardMetric::new(normalizer)))
            .and_then(|r| r.register(Arc::new(EntailmentMetric::new(backend, templates))))
            .and_then(|r| r.register(Arc::new(StringSimilarityMetric::default())))
            .expect("builtin names are distinct");
        r
    }

    pub fn register(&mut self, metric: Arc<dyn Metric>) -> Result<&mut Self> {
        if self.get(&metric.id().name).is_some() {
            return Err(Error::Config(format!(
                "metric {:?} is already registered",
                metric.id().name
            )));
        }
        self.metrics.push(metric);
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Metric>> {
        self.metrics.iter().find(|m| m.id().name == name).cloned()
    }

    /// Resolves names in order, failing on the first unknown one.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Arc<dyn Metric>>> {
        names
            .iter()
            .map(|n| {
                self.get(n.as_ref())
                    .ok_or_else(|| Error::Config(format!("unknown metric {:?}", n.as_ref())))
            })
            .collect()
    }

    /// Overrides the quantization of an already registered metric.
    pub fn set_decimals(&mut self, name: &str, decimals: u32) -> Result<()> {
        let pos = self
            .metrics
            .iter()
            .position(|m| m.id().name == name)
            .ok_or_else(|| Error::Config(format!("unknown metric {name:?}")))?;
        let inner = self.metrics[pos].clone();
        self.metrics[pos] = Arc::new(Requantized {
            id: MetricId::new(name, decimals),
            inner,
        });
        Ok(())
    }
}

struct Requantized {
    id: MetricId,
    inner: Arc<dyn Metric>,
}

impl Metric for Requantized {
    fn id(&self) -> &MetricId {
        &self.id
    }

    fn eval(&self, input: &str, candidate: &str) -> Result<f64> {
        self.inner.eval(input, candidate)
    }

    fn eval_many(&self, input: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        self.inner.eval_many(input, candidates)
    }
}
