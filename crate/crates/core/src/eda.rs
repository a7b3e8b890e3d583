//! Easy-data-augmentation baseline: synonym replacement, random insertion,
//! random swap and random deletion, applied per token.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{extract_descriptions, SchemaDocument};
use crate::error::{Error, Result};
use crate::metrics::TokenNormalizer;
use crate::variants::{derive_seed, order_variants, RankedCandidate, VariantSet};

const SYNONYMS: &str = include_str!("../data/synonyms.tsv");

pub type SynonymLexicon = HashMap<String, Vec<String>>;

/// Parses `word<TAB>syn1,syn2,...` lines.
pub fn parse_synonyms(text: &str) -> SynonymLexicon {
    text.lines()
        .filter_map(|l| {
            let (w, syns) = l.split_once('\t')?;
            let syns: Vec<String> = syns
                .split(',')
                .map(|s| s.trim().replace('_', " "))
                .filter(|s| !s.is_empty())
                .collect();
            (!syns.is_empty()).then(|| (w.trim().to_lowercase(), syns))
        })
        .collect()
}

pub fn english_synonyms() -> SynonymLexicon {
    parse_synonyms(SYNONYMS)
}

pub fn load_synonyms(path: impl AsRef<Path>) -> Result<SynonymLexicon> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_synonyms(&text))
}

#[derive(Debug, Clone)]
pub struct EdaConfig {
    pub p_sr: f64,
    pub p_ri: f64,
    pub p_rs: f64,
    pub p_rd: f64,
    pub synonyms: Arc<SynonymLexicon>,
    pub rng_seed: u64,
}

impl EdaConfig {
    pub fn new(synonyms: Arc<SynonymLexicon>) -> Self {
        Self {
            p_sr: 0.25,
            p_ri: 0.05,
            p_rs: 0.05,
            p_rd: 0.05,
            synonyms,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_sr", self.p_sr), ("p_ri", self.p_ri), ("p_rs", self.p_rs), ("p_rd", self.p_rd)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }
}

/// Splits a token into leading punctuation, word core and trailing punctuation.
fn split_core(tok: &str) -> (&str, &str, &str) {
    let start = tok.find(|c: char| c.is_alphanumeric()).unwrap_or(tok.len());
    let end = tok
        .rfind(|c: char| c.is_alphanumeric())
        .map_or(start, |i| i + tok[i..].chars().next().map_or(1, char::len_utf8));
    (&tok[..start], &tok[start..end], &tok[end..])
}

fn synonym<'a, R: Rng>(word: &str, lex: &'a SynonymLexicon, rng: &mut R) -> Option<&'a str> {
    lex.get(&word.to_lowercase())
        .and_then(|s| s.choose(rng))
        .map(String::as_str)
}

/// One EDA perturbation. Every token gets an independent draw for each
/// operation, in the order replace, insert, swap, delete. Deletion never
/// removes the last token. Returns `text` unchanged when nothing fired.
pub fn eda_augment<R: Rng>(text: &str, config: &EdaConfig, rng: &mut R) -> String {
    let mut toks: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if toks.is_empty() {
        return text.to_string();
    }
    let lex = &*config.synonyms;
    let mut changed = false;

    for tok in toks.iter_mut() {
        if rng.gen_bool(config.p_sr) {
            let (pre, core, post) = split_core(tok);
            if let Some(s) = synonym(core, lex, rng) {
                *tok = format!("{pre}{s}{post}");
                changed = true;
            }
        }
    }

    let n = toks.len();
    for i in 0..n {
        if rng.gen_bool(config.p_ri) {
            let (_, core, _) = split_core(&toks[i]);
            if let Some(s) = synonym(core, lex, rng).map(str::to_string) {
                let at = rng.gen_range(0..=toks.len());
                toks.insert(at, s);
                changed = true;
            }
        }
    }

    let n = toks.len();
    for i in 0..n {
        if rng.gen_bool(config.p_rs) && n > 1 {
            let j = rng.gen_range(0..n);
            if i != j {
                toks.swap(i, j);
                changed = true;
            }
        }
    }

    let keep: Vec<bool> = toks.iter().map(|_| !rng.gen_bool(config.p_rd)).collect();
    if keep.iter().any(|k| !k) {
        changed = true;
        if keep.iter().any(|k| *k) {
            toks = toks.into_iter().zip(keep).filter(|(_, k)| *k).map(|(t, _)| t).collect();
        } else {
            let survivor = rng.gen_range(0..toks.len());
            toks = vec![toks.swap_remove(survivor)];
        }
    }

    if changed {
        toks.join(" ")
    } else {
        text.to_string()
    }
}

/// `m` independent perturbations of every description, ordered into
/// variants by Jaccard distance like ranked paraphrases.
pub fn generate_eda_variants(
    schemas: &[SchemaDocument],
    m: usize,
    config: &EdaConfig,
    normalizer: &TokenNormalizer,
) -> Result<VariantSet> {
    config.validate()?;
    if m == 0 {
        return Ok(VariantSet {
            base: schemas.to_vec(),
            variants: Vec::new(),
            rows: Vec::new(),
        });
    }
    let selections: Vec<_> = extract_descriptions(schemas)
        .into_iter()
        .map(|(el, desc)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, &el.to_string()));
            let cands = (0..m)
                .map(|_| RankedCandidate {
                    text: eda_augment(&desc, config, &mut rng),
                    metrics: Default::default(),
                    path: Vec::new(),
                    fallback: false,
                })
                .collect();
            (el, cands)
        })
        .collect();
    order_variants(&selections, schemas, normalizer)
}
