//! Corpus BLEU and self-BLEU.
//!
//! Tokenization follows the `13a` convention (punctuation split off,
//! periods and commas kept inside numbers) and is case-sensitive unless
//! [`BleuConfig::lowercase`] is set.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuConfig {
    pub lowercase: bool,
    /// Numerator used in place of a zero n-gram match count.
    pub smoothing_epsilon: f64,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            lowercase: false,
            smoothing_epsilon: 0.1,
        }
    }
}

fn isolated_punct(c: char) -> bool {
    matches!(c,
        '{' | '|' | '}' | '~' | '[' | '\\' | ']' | '^' | '_' | '`'
        | '!' | '"' | '#' | '$' | '%' | '&' | '(' | ')' | '*' | '+'
        | ':' | ';' | '<' | '=' | '>' | '?' | '@' | '/')
}

pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut pass1: Vec<char> = Vec::with_capacity(text.len() + 8);
    for c in text.chars() {
        if isolated_punct(c) {
            pass1.extend([' ', c, ' ']);
        } else {
            pass1.push(c);
        }
    }
    let mut out = String::with_capacity(pass1.len() + 8);
    for (i, &c) in pass1.iter().enumerate() {
        let left = i.checked_sub(1).map(|j| pass1[j]);
        let right = pass1.get(i + 1).copied();
        // the line is treated as space-padded, so a missing neighbour is a non-digit
        let non_digit = |x: Option<char>| !x.is_some_and(|x| x.is_ascii_digit());
        if (c == '.' || c == ',') && (non_digit(left) || non_digit(right)) {
            out.push(' ');
            out.push(c);
            out.push(' ');
        } else if c == '-' && left.is_some_and(|x| x.is_ascii_digit()) {
            out.push_str(" - ");
        } else {
            out.push(c);
        }
    }
    out.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sufficient statistics accumulated over a corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BleuStats {
    pub correct: [usize; MAX_ORDER],
    pub total: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    fn add_sentence(&mut self, hyp: &[String], refs: &[Vec<String>]) {
        self.hyp_len += hyp.len();
        // closest reference length, ties to the shorter one
        self.ref_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&l| (l.abs_diff(hyp.len()), l))
            .unwrap_or(0);
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngram_counts(hyp, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in &hyp_counts {
                self.correct[n - 1] += (*c).min(max_ref.get(g).copied().unwrap_or(0));
                self.total[n - 1] += c;
            }
        }
    }

    /// BLEU on a 0-100 scale. Orders with no candidate n-grams at all are
    /// left out of the geometric mean.
    pub fn score(&self, epsilon: f64) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            if self.total[n] == 0 {
                break;
            }
            let matched = if self.correct[n] == 0 {
                epsilon
            } else {
                self.correct[n] as f64
            };
            log_sum += (matched / self.total[n] as f64).ln();
            orders += 1;
        }
        if orders == 0 {
            return 0.0;
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

fn prepare(text: &str, config: &BleuConfig) -> Vec<String> {
    if config.lowercase {
        tokenize_13a(&text.to_lowercase())
    } else {
        tokenize_13a(text)
    }
}

/// Standard 4-gram corpus BLEU. `references[i]` holds the references for `candidates[i]`.
pub fn corpus_bleu<S: AsRef<str>>(
    candidates: &[S],
    references: &[Vec<S>],
    config: &BleuConfig,
) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::Argument(format!(
            "{} candidates but {} reference lists",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Argument("BLEU needs at least one candidate".into()));
    }
    let mut stats = BleuStats::default();
    for (c, refs) in candidates.iter().zip(references) {
        let hyp = prepare(c.as_ref(), config);
        let refs: Vec<Vec<String>> = refs.iter().map(|r| prepare(r.as_ref(), config)).collect();
        stats.add_sentence(&hyp, &refs);
    }
    Ok(stats.score(config.smoothing_epsilon))
}

/// BLEU of each variant `v_i` (i >= 2) against the aligned descriptions of
/// all earlier variants `v_1..v_{i-1}`.
///
/// Keys are 1-based variant indices; they need not be contiguous, earlier
/// means smaller key.
pub fn self_bleu(
    variants: &BTreeMap<usize, Vec<String>>,
    config: &BleuConfig,
) -> Result<BTreeMap<usize, f64>> {
    let mut lens = variants.values().map(Vec::len);
    if let Some(first) = lens.next() {
        if lens.any(|l| l != first) {
            return Err(Error::Argument(
                "self-BLEU variants are not aligned (different lengths)".into(),
            ));
        }
    }
    let ordered: Vec<(&usize, &Vec<String>)> = variants.iter().collect();
    let mut out = BTreeMap::new();
    for (pos, (idx, texts)) in ordered.iter().enumerate().skip(1) {
        let refs: Vec<Vec<&str>> = (0..texts.len())
            .map(|e| ordered[..pos].iter().map(|(_, v)| v[e].as_str()).collect())
            .collect();
        let cands: Vec<&str> = texts.iter().map(String::as_str).collect();
        out.insert(**idx, corpus_bleu(&cands, &refs, config)?);
    }
    Ok(out)
}
