//! Joint goal accuracy, seen/unseen splits, schema sensitivity and the
//! synthetic-schema metric table.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_descriptions, Dialogue, ElementKind, SchemaDocument};
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, entailment_scores, jaccard_distance, self_bleu, BleuConfig, EntailmentBackend, TemplateSet, TokenNormalizer};

pub const ORIG: &str = "orig";

/// One predicted state. Keys are `Service-slot`, or bare slot names when
/// the turn has a single frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub dialogue_id: String,
    /// Index into the dialogue's turns.
    pub turn: usize,
    pub variant: String,
    pub state: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    rows: Vec<PredictionRow>,
    index: HashMap<(String, usize, String), usize>,
}

impl PredictionSet {
    pub fn new(rows: Vec<PredictionRow>) -> Result<Self> {
        let mut index = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if index.insert((r.dialogue_id.clone(), r.turn, r.variant.clone()), i).is_some() {
                return Err(Error::validation(
                    format!("dialogue {} turn {}", r.dialogue_id, r.turn),
                    format!("duplicate prediction for variant {:?}", r.variant),
                ));
            }
        }
        Ok(Self { rows, index })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(crate::filters::read_jsonl(path.as_ref())?)
    }

    pub fn rows(&self) -> &[PredictionRow] {
        &self.rows
    }

    pub fn get(&self, dialogue_id: &str, turn: usize, variant: &str) -> Option<&PredictionRow> {
        self.index
            .get(&(dialogue_id.to_string(), turn, variant.to_string()))
            .map(|i| &self.rows[*i])
    }

    /// Variant ids present, `orig` first and the rest in natural order.
    pub fn variants(&self) -> Vec<String> {
        let mut v: Vec<String> = self.rows.iter().map(|r| r.variant.clone()).collect();
        v.sort_by_key(|s| variant_key(s));
        v.dedup();
        v
    }
}

fn variant_key(v: &str) -> (u8, usize, String) {
    if v == ORIG {
        return (0, 0, String::new());
    }
    match v.strip_prefix('v').and_then(|n| n.parse().ok()) {
        Some(n) => (1, n, String::new()),
        None => (2, 0, v.to_string()),
    }
}

/// Gold state of one user turn, merged over its frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldTurn {
    pub dialogue_id: String,
    pub turn: usize,
    pub services: Vec<String>,
    /// `(service, slot)` to accepted values.
    pub state: BTreeMap<(String, String), Vec<String>>,
}

pub fn gold_turns(dialogues: &[Dialogue]) -> Vec<GoldTurn> {
    dialogues
        .iter()
        .flat_map(|d| {
            d.user_turns().map(move |(i, t)| {
                let mut state = BTreeMap::new();
                for f in &t.frames {
                    if let Some(s) = &f.state {
                        for (slot, values) in s.active_slots() {
                            state.insert(
                                (f.service.clone(), slot.to_string()),
                                values.into_iter().map(str::to_string).collect(),
                            );
                        }
                    }
                }
                GoldTurn {
                    dialogue_id: d.dialogue_id.clone(),
                    turn: i,
                    services: t.frames.iter().map(|f| f.service.clone()).collect(),
                    state,
                }
            })
        })
        .collect()
}

fn same_value(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// Exact state match. Keys qualified with a service outside the turn are ignored.
pub fn turn_correct(gold: &GoldTurn, predicted: &BTreeMap<String, Vec<String>>) -> Result<bool> {
    let mut pred: BTreeMap<(String, String), &Vec<String>> = BTreeMap::new();
    for (key, values) in predicted {
        if values.is_empty() {
            continue;
        }
        let qualified = gold
            .services
            .iter()
            .find_map(|s| key.strip_prefix(s.as_str()).and_then(|r| r.strip_prefix('-')).map(|slot| (s.clone(), slot.to_string())));
        let resolved = match qualified {
            Some(k) => k,
            None if key.contains('-') => continue,
            None if gold.services.len() == 1 => (gold.services[0].clone(), key.clone()),
            None => {
                return Err(Error::data(
                    format!("dialogue {} turn {}", gold.dialogue_id, gold.turn),
                    format!("slot {key:?} needs a service prefix in a turn with {} frames", gold.services.len()),
                ))
            }
        };
        pred.insert(resolved, values);
    }
    if pred.len() != gold.state.len() {
        return Ok(false);
    }
    Ok(gold.state.iter().all(|(k, gold_values)| {
        pred.get(k)
            .is_some_and(|p| p.iter().any(|v| gold_values.iter().any(|g| same_value(v, g))))
    }))
}

/// Per-turn correctness for one variant, in gold order.
pub fn correctness(preds: &PredictionSet, gold: &[GoldTurn], variant: &str) -> Result<Vec<bool>> {
    let missing: Vec<&GoldTurn> = gold
        .iter()
        .filter(|g| preds.get(&g.dialogue_id, g.turn, variant).is_none())
        .collect();
    if !missing.is_empty() {
        let examples = missing
            .iter()
            .take(5)
            .map(|g| format!("{}#{}/{variant}", g.dialogue_id, g.turn))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::Coverage {
            count: missing.len(),
            examples,
        });
    }
    gold.par_iter()
        .map(|g| {
            let row = preds.get(&g.dialogue_id, g.turn, variant).expect("coverage checked");
            turn_correct(g, &row.state)
        })
        .collect()
}

fn percent(flags: &[bool]) -> Option<f64> {
    (!flags.is_empty()).then(|| 100.0 * flags.iter().filter(|c| **c).count() as f64 / flags.len() as f64)
}

pub fn joint_goal_accuracy(preds: &PredictionSet, gold: &[GoldTurn], variant: &str) -> Result<f64> {
    let flags = correctness(preds, gold, variant)?;
    percent(&flags).ok_or_else(|| Error::Argument("no gold turns to evaluate".into()))
}

/// A turn is seen when every service in its frames is seen.
fn turn_seen(g: &GoldTurn, seen: &BTreeMap<String, bool>) -> Result<bool> {
    let mut all = true;
    for s in &g.services {
        all &= *seen.get(s).ok_or_else(|| Error::UnknownService(s.clone()))?;
    }
    Ok(all)
}

/// JGA over seen and unseen turns, pooled over `variants`. A side with no
/// turns is `None`.
pub fn split_seen_unseen(
    preds: &PredictionSet,
    gold: &[GoldTurn],
    seen: &BTreeMap<String, bool>,
    variants: &[String],
) -> Result<(Option<f64>, Option<f64>)> {
    let flags: Vec<bool> = gold.iter().map(|g| turn_seen(g, seen)).collect::<Result<_>>()?;
    let mut seen_ok = Vec::new();
    let mut unseen_ok = Vec::new();
    for v in variants {
        for (c, s) in correctness(preds, gold, v)?.into_iter().zip(&flags) {
            if *s {
                seen_ok.push(c);
            } else {
                unseen_ok.push(c);
            }
        }
    }
    Ok((percent(&seen_ok), percent(&unseen_ok)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityMode {
    /// Mean over turns with non-zero mean correctness of the per-turn
    /// coefficient of variation.
    #[default]
    PerTurn,
    /// Coefficient of variation of the per-variant JGAs.
    Corpus,
}

fn cv(xs: &[f64]) -> Option<f64> {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if mean == 0.0 {
        return None;
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    Some(var.sqrt() / mean)
}

/// Schema sensitivity as a percentage.
pub fn schema_sensitivity(
    preds: &PredictionSet,
    gold: &[GoldTurn],
    variants: &[String],
    mode: SensitivityMode,
) -> Result<f64> {
    if variants.len() < 2 {
        return Err(Error::Argument(format!(
            "schema sensitivity needs at least 2 variants, got {}",
            variants.len()
        )));
    }
    let per_variant: Vec<Vec<bool>> = variants.iter().map(|v| correctness(preds, gold, v)).collect::<Result<_>>()?;
    Ok(match mode {
        SensitivityMode::PerTurn => sensitivity_per_turn(&per_variant),
        SensitivityMode::Corpus => {
            let jgas: Vec<f64> = per_variant.iter().map(|f| percent(f).unwrap_or(0.0)).collect();
            100.0 * cv(&jgas).unwrap_or(0.0)
        }
    })
}

/// `per_variant[v][t]` is the correctness of turn `t` under variant `v`.
pub fn sensitivity_per_turn(per_variant: &[Vec<bool>]) -> f64 {
    let turns = per_variant.first().map_or(0, Vec::len);
    let cvs: Vec<f64> = (0..turns)
        .filter_map(|t| {
            let xs: Vec<f64> = per_variant.iter().map(|v| if v[t] { 1.0 } else { 0.0 }).collect();
            cv(&xs)
        })
        .collect();
    if cvs.is_empty() {
        0.0
    } else {
        100.0 * cvs.iter().sum::<f64>() / cvs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub jga_orig: Option<f64>,
    /// Mean of the per-variant JGAs over every non-`orig` variant.
    pub jga_variants: Option<f64>,
    pub jga_seen: Option<f64>,
    pub jga_unseen: Option<f64>,
    pub ss_jga: Option<f64>,
    pub ss_mode: SensitivityMode,
    pub per_variant: BTreeMap<String, f64>,
    pub turns: usize,
}

fn cell(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.2}"))
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let headers = ["JGA_orig", "JGA_v1-5", "JGA_seen", "JGA_unseen", "SS_JGA"];
        let values = [self.jga_orig, self.jga_variants, self.jga_seen, self.jga_unseen, self.ss_jga].map(cell);
        let widths: Vec<usize> = headers.iter().zip(&values).map(|(h, v)| h.len().max(v.len())).collect();
        let row = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = row(headers.to_vec());
        out.push('\n');
        out.push_str(&row(values.iter().map(String::as_str).collect()));
        out.push('\n');
        for (v, j) in &self.per_variant {
            let _ = writeln!(out, "{v}: {j:.2}");
        }
        out
    }
}

/// Every metric the prediction file supports. Seen/unseen use the
/// non-`orig` variants, or `orig` when it is the only one.
pub fn evaluate(
    preds: &PredictionSet,
    dialogues: &[Dialogue],
    seen: Option<&BTreeMap<String, bool>>,
    mode: SensitivityMode,
) -> Result<EvalReport> {
    let gold = gold_turns(dialogues);
    let all = preds.variants();
    let mut per_variant = BTreeMap::new();
    for v in &all {
        per_variant.insert(v.clone(), joint_goal_accuracy(preds, &gold, v)?);
    }
    let variants: Vec<String> = all.iter().filter(|v| *v != ORIG).cloned().collect();
    let jga_variants = (!variants.is_empty()).then(|| variants.iter().map(|v| per_variant[v]).sum::<f64>() / variants.len() as f64);
    let pooled = if variants.is_empty() { vec![ORIG.to_string()] } else { variants.clone() };
    let (jga_seen, jga_unseen) = match seen {
        Some(seen) if all.iter().any(|v| pooled.contains(v)) => split_seen_unseen(preds, &gold, seen, &pooled)?,
        _ => (None, None),
    };
    let ss_jga = if variants.len() >= 2 {
        Some(schema_sensitivity(preds, &gold, &variants, mode)?)
    } else {
        None
    };
    Ok(EvalReport {
        jga_orig: per_variant.get(ORIG).copied(),
        jga_variants,
        jga_seen,
        jga_unseen,
        ss_jga,
        ss_mode: mode,
        per_variant,
        turns: gold.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaMetricRow {
    pub variant: String,
    /// Mean Jaccard distance to the base, times 100.
    pub jaccard: f64,
    /// Mean entailment times 100; `None` when the scorer failed.
    pub entailment: Option<f64>,
    pub bleu: f64,
    /// BLEU against all earlier variants; `None` for the first.
    pub self_bleu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaMetricTable {
    pub elements: usize,
    pub rows: Vec<SchemaMetricRow>,
}

impl SchemaMetricTable {
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<8} {:>7} {:>7} {:>7} {:>9}\n", "variant", "J", "E", "BLEU", "selfBLEU");
        for r in &self.rows {
            let e = r.entailment.map_or("n/a".to_string(), |e| format!("{e:.1}"));
            let sb = r.self_bleu.map_or("-".to_string(), |b| format!("{b:.1}"));
            let _ = writeln!(out, "{:<8} {:>7.1} {:>7} {:>7.1} {:>9}", r.variant, r.jaccard, e, r.bleu, sb);
        }
        out
    }
}

#[derive(Clone, Default)]
pub struct SchemaTableOptions {
    /// Element kinds to include; empty means all.
    pub kinds: Vec<ElementKind>,
    pub bleu: BleuConfig,
}

fn aligned_descriptions(schemas: &[SchemaDocument], kinds: &[ElementKind]) -> Vec<String> {
    extract_descriptions(schemas)
        .into_iter()
        .filter(|(el, _)| kinds.is_empty() || kinds.contains(&el.element_kind))
        .map(|(_, d)| d)
        .collect()
}

/// Variants are aligned with the base by position, so renamed services and
/// slots still line up.
pub fn schema_metric_table(
    variants: &[Vec<SchemaDocument>],
    base: &[SchemaDocument],
    backend: Option<(&dyn EntailmentBackend, &TemplateSet)>,
    normalizer: &TokenNormalizer,
    options: &SchemaTableOptions,
) -> Result<SchemaMetricTable> {
    let base_desc = aligned_descriptions(base, &options.kinds);
    if base_desc.is_empty() {
        return Err(Error::Argument("no descriptions to compare".into()));
    }
    let mut texts = BTreeMap::new();
    for (i, v) in variants.iter().enumerate() {
        let d = aligned_descriptions(v, &options.kinds);
        if d.len() != base_desc.len() {
            return Err(Error::Argument(format!(
                "variant v{} has {} descriptions, base has {}",
                i + 1,
                d.len(),
                base_desc.len()
            )));
        }
        texts.insert(i + 1, d);
    }
    let selfb = self_bleu(&texts, &options.bleu)?;
    let refs: Vec<Vec<&str>> = base_desc.iter().map(|d| vec![d.as_str()]).collect();
    let mut rows = Vec::new();
    for (i, d) in &texts {
        let n = d.len() as f64;
        let jaccard = 100.0 * d.iter().zip(&base_desc).map(|(v, b)| jaccard_distance(b, v, normalizer)).sum::<f64>() / n;
        let entailment = backend.and_then(|(b, t)| {
            let scores: Result<Vec<f64>> = d
                .iter()
                .zip(&base_desc)
                .map(|(v, p)| entailment_scores(p, &[v], t, b).map(|s| s[0]))
                .collect();
            match scores {
                Ok(s) => Some(100.0 * s.iter().sum::<f64>() / n),
                Err(e) => {
                    log::warn!("entailment column unavailable for v{i}: {e}");
                    None
                }
            }
        });
        let cands: Vec<&str> = d.iter().map(String::as_str).collect();
        rows.push(SchemaMetricRow {
            variant: format!("v{i}"),
            jaccard,
            entailment,
            bleu: corpus_bleu(&cands, &refs, &options.bleu)?,
            self_bleu: selfb.get(i).copied(),
        });
    }
    Ok(SchemaMetricTable {
        elements: base_desc.len(),
        rows,
    })
}
