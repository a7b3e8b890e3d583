//! Per-element ranking and assembly of ordered synthetic schema variants.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::corpus::{extract_descriptions, write_schemas, SchemaDocument, SchemaElementRef};
use crate::error::{Error, Result};
use crate::filters::{entailment_prefilter, CandidatePool};
use crate::metrics::{jaccard_distance, EntailmentBackend, Metric, MetricRegistry, TemplateSet, TokenNormalizer};
use crate::tree::{build, DecisionSpec, RankingConfig};

/// A ranked candidate with its metric provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub text: String,
    /// Raw metric values by name; `None` when a metric could not be computed.
    pub metrics: BTreeMap<String, Option<f64>>,
    /// Quantized tree path, empty for fallbacks.
    pub path: Vec<f64>,
    /// The original description, used because the pool ran out.
    #[serde(default)]
    pub fallback: bool,
}

/// Everything `rank_element` needs besides the pool.
pub struct RankContext {
    pub metrics: Vec<Arc<dyn Metric>>,
    pub decisions: DecisionSpec,
    pub ranking: RankingConfig,
    pub entailment_threshold: Option<f64>,
    pub backend: Arc<dyn EntailmentBackend>,
    pub templates: TemplateSet,
    pub echo_fallback: bool,
}

impl RankContext {
    /// The active profile of `config` with J, E and S over the given
    /// normalizer and backend, plus any quantization overrides.
    pub fn from_config(
        config: &PipelineConfig,
        normalizer: Arc<TokenNormalizer>,
        backend: Arc<dyn EntailmentBackend>,
    ) -> Result<Self> {
        config.validate()?;
        let profile = config.active_profile()?;
        let templates = config.template_set()?;
        let mut registry = MetricRegistry::with_builtins(normalizer, backend.clone(), templates.clone());
        for (name, decimals) in &config.quantization {
            registry.set_decimals(name, *decimals)?;
        }
        Ok(Self {
            metrics: registry.resolve(&profile.metrics)?,
            decisions: profile.decision_spec()?,
            ranking: config.ranking()?,
            entailment_threshold: profile.entailment_threshold,
            backend,
            templates,
            echo_fallback: config.echo_fallback,
        })
    }
}

/// Mixes an element key into a base seed.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn echo(input: &str, metrics: &[Arc<dyn Metric>]) -> RankedCandidate {
    RankedCandidate {
        text: input.to_string(),
        metrics: metrics
            .iter()
            .map(|m| (m.id().name.clone(), m.eval(input, input).ok()))
            .collect(),
        path: Vec::new(),
        fallback: true,
    }
}

/// Filters by entailment (if configured), builds and prunes the tree and
/// ranks `k` candidates. Shortfalls are padded with the input description
/// when `echo_fallback` is set and are an error otherwise.
pub fn rank_element(pool: &CandidatePool, ctx: &RankContext) -> Result<Vec<RankedCandidate>> {
    let k = ctx.ranking.k;
    let pool = match ctx.entailment_threshold {
        Some(t) => entailment_prefilter(pool, t, ctx.backend.as_ref(), &ctx.templates)?,
        None => pool.clone(),
    };
    let texts: Vec<String> = pool.candidates.iter().map(|c| c.text.clone()).collect();
    let mut out = Vec::with_capacity(k);
    if !texts.is_empty() {
        let mut tree = build(&pool.input, &texts, &ctx.metrics)?;
        let pruned = match ctx.ranking.prune_threshold_level0 {
            Some(t) => tree.prune_above(t),
            None => Ok(()),
        };
        match pruned {
            Ok(()) => {
                let cfg = RankingConfig {
                    lenient: true,
                    ..ctx.ranking.clone()
                };
                for sel in tree.rank(&cfg, &ctx.decisions)? {
                    let scores = &tree.scores[&sel.text];
                    out.push(RankedCandidate {
                        metrics: tree
                            .metrics
                            .iter()
                            .zip(&scores.values)
                            .map(|(id, v)| (id.name.clone(), Some(*v)))
                            .collect(),
                        path: sel.path.iter().map(|v| v.value()).collect(),
                        text: sel.text,
                        fallback: false,
                    });
                }
            }
            Err(Error::EmptyTree) => {}
            Err(e) => return Err(e),
        }
    }
    if out.len() < k {
        if !ctx.echo_fallback {
            return Err(Error::Exhausted {
                ranked: out.len(),
                requested: k,
            });
        }
        log::warn!(
            "{}: ranked {} of {k}, padding with the original description",
            pool.element,
            out.len()
        );
        let e = echo(&pool.input, &ctx.metrics);
        out.resize(k, e);
    }
    Ok(out)
}

/// One selected description for one element in one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub element: SchemaElementRef,
    /// 1-based variant index.
    pub variant: usize,
    pub candidate: String,
    #[serde(flatten)]
    pub metrics: BTreeMap<String, Option<f64>>,
    pub path: Vec<f64>,
    /// Jaccard distance to the original description, used for ordering.
    pub jaccard: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub profile: String,
    pub k: usize,
    pub rows: Vec<ManifestRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSet {
    pub base: Vec<SchemaDocument>,
    /// `variants[i]` is variant v(i+1).
    pub variants: Vec<Vec<SchemaDocument>>,
    pub rows: Vec<ManifestRow>,
}

impl VariantSet {
    pub fn k(&self) -> usize {
        self.variants.len()
    }

    /// Mean Jaccard distance to the base per variant.
    pub fn mean_jaccard(&self) -> Vec<f64> {
        (1..=self.k())
            .map(|v| {
                let js: Vec<f64> = self.rows.iter().filter(|r| r.variant == v).map(|r| r.jaccard).collect();
                if js.is_empty() {
                    0.0
                } else {
                    js.iter().sum::<f64>() / js.len() as f64
                }
            })
            .collect()
    }
}

/// Sorts each element's candidates by ascending Jaccard distance to its
/// original description (stable), then takes position `i` of every element
/// as variant `v(i+1)`.
pub fn order_variants(
    selections: &[(SchemaElementRef, Vec<RankedCandidate>)],
    base: &[SchemaDocument],
    normalizer: &TokenNormalizer,
) -> Result<VariantSet> {
    let k = selections.first().map_or(0, |(_, c)| c.len());
    if let Some((el, c)) = selections.iter().find(|(_, c)| c.len() != k) {
        return Err(Error::Argument(format!("{el} has {} candidates, expected {k}", c.len())));
    }
    let originals: HashMap<SchemaElementRef, String> = extract_descriptions(base).into_iter().collect();
    let mut variants = vec![base.to_vec(); k];
    let mut rows = Vec::with_capacity(selections.len() * k);
    for (el, cands) in selections {
        let original = originals
            .get(el)
            .ok_or_else(|| Error::Argument(format!("{el} is not in the base schemas")))?;
        let mut scored: Vec<(f64, &RankedCandidate)> = cands
            .iter()
            .map(|c| (jaccard_distance(original, &c.text, normalizer), c))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, (j, c)) in scored.into_iter().enumerate() {
            let doc = variants[i]
                .iter_mut()
                .find(|s| s.service_name == el.service_name)
                .expect("element service is in the base");
            doc.set_description(el, &c.text);
            rows.push(ManifestRow {
                element: el.clone(),
                variant: i + 1,
                candidate: c.text.clone(),
                metrics: c.metrics.clone(),
                path: c.path.clone(),
                jaccard: j,
                fallback: c.fallback,
            });
        }
    }
    rows.sort_by_key(|r| r.variant);
    Ok(VariantSet {
        base: base.to_vec(),
        variants,
        rows,
    })
}

/// Ranks every element of `base` and assembles the variants. Elements
/// without a pool get `k` copies of their description.
pub fn assemble_variants(
    base: &[SchemaDocument],
    pools: &[CandidatePool],
    ctx: &RankContext,
    normalizer: &TokenNormalizer,
) -> Result<VariantSet> {
    let by_element: HashMap<&SchemaElementRef, &CandidatePool> = pools.iter().map(|p| (&p.element, p)).collect();
    let elements = extract_descriptions(base);
    let selections: Vec<(SchemaElementRef, Vec<RankedCandidate>)> = elements
        .par_iter()
        .map(|(el, desc)| {
            let pool = match by_element.get(el) {
                Some(p) => {
                    if p.input != *desc {
                        log::warn!("{el}: pool input differs from the schema description");
                    }
                    (*p).clone()
                }
                None => CandidatePool::new(el.clone(), desc.clone(), Vec::<String>::new()),
            };
            let ranking = RankingConfig {
                rng_seed: derive_seed(ctx.ranking.rng_seed, &el.to_string()),
                ..ctx.ranking.clone()
            };
            let local = RankContext {
                metrics: ctx.metrics.clone(),
                decisions: ctx.decisions.clone(),
                ranking,
                entailment_threshold: ctx.entailment_threshold,
                backend: ctx.backend.clone(),
                templates: ctx.templates.clone(),
                echo_fallback: ctx.echo_fallback,
            };
            rank_element(&pool, &local).map(|c| (el.clone(), c))
        })
        .collect::<Result<_>>()?;
    order_variants(&selections, base, normalizer)
}

/// Writes `v1/schema.json` .. `vk/schema.json` and `manifest.json`.
pub fn emit_variants(vs: &VariantSet, out_dir: impl AsRef<Path>, seed: u64, profile: &str) -> Result<()> {
    let out = out_dir.as_ref();
    for (i, schemas) in vs.variants.iter().enumerate() {
        let dir = out.join(format!("v{}", i + 1));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_schemas(dir.join("schema.json"), schemas)?;
    }
    let manifest = Manifest {
        seed,
        profile: profile.to_string(),
        k: vs.k(),
        rows: vs.rows.clone(),
    };
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
