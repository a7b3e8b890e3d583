use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

const LEMMAS: &str = include_str!("../../data/lemmas.tsv");
const STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Lowercases, strips punctuation, drops stopwords and maps each word to its
/// lemma via a lookup table.
///
/// The lemma table is closed on load (chains `a -> b -> c` collapse to
/// `a -> c`), which makes `normalize` idempotent on its own output.
#[derive(Debug, Clone)]
pub struct TokenNormalizer {
    lemmas: HashMap<String, String>,
    stopwords: HashSet<String>,
    lowercase: bool,
}

impl TokenNormalizer {
    pub fn new(
        lemmas: HashMap<String, String>,
        stopwords: HashSet<String>,
        lowercase: bool,
    ) -> Self {
        Self {
            lemmas: close_lemma_table(lemmas),
            stopwords,
            lowercase,
        }
    }

    /// English tables shipped with the crate.
    pub fn english() -> Self {
        Self::new(parse_lemma_table(LEMMAS), parse_word_list(STOPWORDS), true)
    }

    /// Like [`TokenNormalizer::english`], with either table replaced by a file.
    pub fn from_files(lemma_table: Option<&Path>, stopwords: Option<&Path>) -> Result<Self> {
        let lemmas = match lemma_table {
            Some(p) => parse_lemma_table(&read(p)?),
            None => parse_lemma_table(LEMMAS),
        };
        let stops = match stopwords {
            Some(p) => parse_word_list(&read(p)?),
            None => parse_word_list(STOPWORDS),
        };
        Ok(Self::new(lemmas, stops, true))
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn lemma<'a>(&'a self, word: &'a str) -> &'a str {
        self.lemmas.get(word).map(String::as_str).unwrap_or(word)
    }

    pub fn normalize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for raw in text.split_whitespace() {
            let raw = if self.lowercase {
                raw.to_lowercase()
            } else {
                raw.to_string()
            };
            let raw = strip_possessive(&raw);
            for word in raw.split(|c: char| !c.is_alphanumeric()) {
                if word.is_empty() || self.is_stopword(word) {
                    continue;
                }
                let lemma = self.lemma(word);
                if !self.is_stopword(lemma) {
                    out.push(lemma.to_string());
                }
            }
        }
        out
    }

    pub fn token_set(&self, text: &str) -> HashSet<String> {
        self.normalize(text).into_iter().collect()
    }
}

impl Default for TokenNormalizer {
    fn default() -> Self {
        Self::english()
    }
}

fn strip_possessive(word: &str) -> &str {
    for suffix in ["'s", "\u{2019}s"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            return stem;
        }
    }
    word
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `wordform<TAB>lemma`, one pair per line. Blank lines and `#` comments are skipped.
pub fn parse_lemma_table(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let (form, lemma) = l.split_once('\t')?;
            Some((form.trim().to_string(), lemma.trim().to_string()))
        })
        .collect()
}

pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn close_lemma_table(table: HashMap<String, String>) -> HashMap<String, String> {
    let resolve = |start: &str| -> String {
        let mut seen = HashSet::new();
        let mut cur = start;
        while let Some(next) = table.get(cur) {
            if !seen.insert(cur) {
                break;
            }
            cur = next;
        }
        cur.to_string()
    };
    let resolved: HashMap<String, String> = table
        .keys()
        .map(|k| (k.clone(), resolve(k)))
        .filter(|(k, v)| k != v)
        .collect();
    // cycles leave a value that is itself a key; drop those entries
    let keys: HashSet<String> = resolved.keys().cloned().collect();
    resolved
        .into_iter()
        .filter(|(_, v)| !keys.contains(v))
        .collect()
}
