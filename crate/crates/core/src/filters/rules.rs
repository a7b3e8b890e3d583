//! Rule and lexicon heuristics behind the built-in filters.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::metrics::{parse_word_list, TokenNormalizer};

const ADVICE: &str = include_str!("../../data/advice.txt");
const NAMED_ENTITIES: &str = include_str!("../../data/named_entities.txt");
const SENSITIVE: &str = include_str!("../../data/sensitive_words.txt");
const WORD_FREQ: &str = include_str!("../../data/word_freq.tsv");
const IRREGULAR: &str = include_str!("../../data/irregular_verbs.tsv");

pub const BUILTIN_FILTERS: [&str; 13] = [
    "contains_advice",
    "describes_action",
    "has_named_entities",
    "has_low_frequency_words",
    "discard_multiple_sentences",
    "has_repeated_ngrams",
    "has_repeated_similar_bigrams",
    "has_consecutive_repeated_words",
    "is_past_tense_sentence",
    "is_passive_voice_sentence",
    "is_question",
    "has_alphanumeric_words",
    "sensitive_words",
];

const BE_FORMS: [&str; 8] = ["am", "is", "are", "was", "were", "be", "been", "being"];
const PAST_AUX: [&str; 4] = ["was", "were", "did", "had"];
const AUX_MODALS: [&str; 22] = [
    "am", "is", "are", "was", "were", "do", "does", "did", "have", "has", "had", "can", "could",
    "will", "would", "shall", "should", "may", "might", "must", "won't", "can't",
];
const WH_WORDS: [&str; 9] = ["what", "which", "who", "whom", "whose", "when", "where", "why", "how"];
const QUESTION_SUBJECTS: [&str; 16] = [
    "there", "you", "i", "we", "they", "he", "she", "it", "this", "that", "the", "a", "an", "any",
    "your", "my",
];
const SUBJECT_PRONOUNS: [&str; 7] = ["i", "you", "we", "they", "he", "she", "it"];
const ACTOR_SUBJECTS: [&str; 4] = ["they", "we", "you", "people"];
const ABBREVIATIONS: [&str; 9] = ["e.g", "i.e", "etc", "mr", "mrs", "dr", "st", "vs", "no"];

/// Lexicons shared by the built-in filters.
#[derive(Debug, Clone)]
pub struct FilterResources {
    pub normalizer: Arc<TokenNormalizer>,
    pub advice: Vec<String>,
    pub named_entities: HashSet<String>,
    pub sensitive: HashSet<String>,
    pub word_freq: HashMap<String, f64>,
    /// Simple past forms that differ from both the base form and the participle.
    pub past_forms: HashSet<String>,
    pub participles: HashSet<String>,
}

impl FilterResources {
    pub fn english(normalizer: Arc<TokenNormalizer>) -> Self {
        let (past_forms, participles) = parse_irregular(IRREGULAR);
        Self {
            normalizer,
            advice: phrase_list(ADVICE),
            named_entities: parse_word_list(NAMED_ENTITIES),
            sensitive: parse_word_list(SENSITIVE),
            word_freq: parse_word_freq(WORD_FREQ),
            past_forms,
            participles,
        }
    }
}

fn phrase_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

pub fn parse_word_freq(text: &str) -> HashMap<String, f64> {
    text.lines()
        .filter_map(|l| {
            let (w, z) = l.split_once('\t')?;
            Some((w.trim().to_lowercase(), z.trim().parse().ok()?))
        })
        .collect()
}

fn parse_irregular(text: &str) -> (HashSet<String>, HashSet<String>) {
    let mut past = HashSet::new();
    let mut part = HashSet::new();
    for l in text.lines() {
        let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
        if let [base, p, pp] = cols[..] {
            if p != base && p != pp {
                past.insert(p.to_lowercase());
            }
            part.insert(pp.to_lowercase());
        }
    }
    (past, part)
}

/// Words of `text` with surrounding punctuation removed; internal
/// apostrophes, periods and hyphens kept.
pub(crate) fn words(text: &str) -> Vec<&str> {
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':' | '(' | ')' | '"' | '!' | '?' | '/'))
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

fn strip_possessive(w: &str) -> &str {
    w.strip_suffix("'s")
        .or_else(|| w.strip_suffix("’s"))
        .unwrap_or(w)
}

fn lower_words(text: &str) -> Vec<String> {
    words(text).into_iter().map(str::to_lowercase).collect()
}

fn input_vocab(input: &str) -> HashSet<String> {
    lower_words(input)
        .into_iter()
        .map(|w| strip_possessive(&w).to_string())
        .collect()
}

fn lexicon_param(params: &Map<String, Value>, key: &str) -> Result<Option<Vec<String>>> {
    match params.get(key) {
        None => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(|s| s.to_lowercase())
                    .ok_or_else(|| Error::Config(format!("{key}: expected a list of strings")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(Value::String(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(Path::new(path), e))?;
            Ok(Some(phrase_list(&text)))
        }
        Some(_) => Err(Error::Config(format!("{key}: expected a path or a list of strings"))),
    }
}

fn bool_param(params: &Map<String, Value>, key: &str, default: bool) -> Result<bool> {
    match params.get(key) {
        None => Ok(default),
        Some(Value::Bool(b)) => Ok(*b),
        Some(_) => Err(Error::Config(format!("{key}: expected true or false"))),
    }
}

fn float_param(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Config(format!("{key}: expected a number"))),
    }
}

fn check_params(name: &str, params: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!("filter {name}: unknown parameter {k:?}"))),
        None => Ok(()),
    }
}

/// A pure predicate over (candidate, input). `true` means reject.
pub type RulePredicate = Box<dyn Fn(&str, &str) -> bool + Send + Sync>;

pub(crate) fn build_rule(
    name: &str,
    params: &Map<String, Value>,
    res: &FilterResources,
) -> Result<RulePredicate> {
    let rule: RulePredicate = match name {
        "contains_advice" => {
            check_params(name, params, &["lexicon", "leading_imperative"])?;
            let phrases = lexicon_param(params, "lexicon")?.unwrap_or_else(|| res.advice.clone());
            let imperative = bool_param(params, "leading_imperative", false)?;
            let lemmas = res.normalizer.clone();
            Box::new(move |c, i| contains_advice(c, i, &phrases, imperative.then_some(&*lemmas)))
        }
        "describes_action" => {
            check_params(name, params, &["subjects"])?;
            let subjects: HashSet<String> = lexicon_param(params, "subjects")?
                .unwrap_or_else(|| ACTOR_SUBJECTS.iter().map(|s| s.to_string()).collect())
                .into_iter()
                .collect();
            let n = res.normalizer.clone();
            Box::new(move |c, i| describes_action(c, i, &subjects, &n))
        }
        "has_named_entities" => {
            check_params(name, params, &["lexicon", "capitalization"])?;
            let gaz: HashSet<String> = match lexicon_param(params, "lexicon")? {
                Some(l) => l.into_iter().collect(),
                None => res.named_entities.clone(),
            };
            let caps = bool_param(params, "capitalization", true)?;
            Box::new(move |c, i| has_named_entities(c, i, &gaz, caps))
        }
        "has_low_frequency_words" => {
            check_params(name, params, &["lexicon", "min_zipf"])?;
            let freq = match params.get("lexicon") {
                Some(Value::String(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(Path::new(path), e))?;
                    parse_word_freq(&text)
                }
                Some(_) => return Err(Error::Config("lexicon: expected a path".into())),
                None => res.word_freq.clone(),
            };
            let min = float_param(params, "min_zipf", 0.0)?;
            Box::new(move |c, i| has_low_frequency_words(c, i, &freq, min))
        }
        "discard_multiple_sentences" => {
            check_params(name, params, &[])?;
            Box::new(|c, _| sentence_count(c) > 1)
        }
        "has_repeated_ngrams" => {
            check_params(name, params, &[])?;
            let n = res.normalizer.clone();
            Box::new(move |c, _| has_repeated_ngrams(c, &n))
        }
        "has_repeated_similar_bigrams" => {
            check_params(name, params, &[])?;
            let n = res.normalizer.clone();
            Box::new(move |c, _| has_repeated_similar_bigrams(c, &n))
        }
        "has_consecutive_repeated_words" => {
            check_params(name, params, &[])?;
            Box::new(|c, _| has_consecutive_repeated_words(c))
        }
        "is_past_tense_sentence" => {
            check_params(name, params, &[])?;
            let past = res.past_forms.clone();
            Box::new(move |c, i| is_past_tense(c, i, &past))
        }
        "is_passive_voice_sentence" => {
            check_params(name, params, &[])?;
            let part = res.participles.clone();
            Box::new(move |c, i| is_passive_voice(c, i, &part))
        }
        "is_question" => {
            check_params(name, params, &[])?;
            Box::new(|c, _| is_question(c))
        }
        "has_alphanumeric_words" => {
            check_params(name, params, &[])?;
            Box::new(has_alphanumeric_words)
        }
        "sensitive_words" => {
            check_params(name, params, &["lexicon"])?;
            let words: HashSet<String> = match lexicon_param(params, "lexicon")? {
                Some(l) => l.into_iter().collect(),
                None => res.sensitive.clone(),
            };
            Box::new(move |c, _| contains_phrase_from(c, &words))
        }
        other => return Err(Error::Config(format!("unknown filter {other:?}"))),
    };
    Ok(rule)
}

/// Whole-word phrase match on lowercased words.
fn contains_phrase(words: &[String], phrase: &str) -> bool {
    let p: Vec<&str> = phrase.split_whitespace().collect();
    !p.is_empty() && words.windows(p.len()).any(|w| w.iter().zip(&p).all(|(a, b)| a == b))
}

fn contains_phrase_from(candidate: &str, lexicon: &HashSet<String>) -> bool {
    let w = lower_words(candidate);
    lexicon.iter().any(|p| contains_phrase(&w, p))
}

pub fn contains_advice(
    candidate: &str,
    input: &str,
    phrases: &[String],
    imperative: Option<&TokenNormalizer>,
) -> bool {
    let cw = lower_words(candidate);
    let iw = lower_words(input);
    if phrases
        .iter()
        .any(|p| contains_phrase(&cw, p) && !contains_phrase(&iw, p))
    {
        return true;
    }
    // a leading bare verb: first word is its own lemma and also heads a verb entry
    match (imperative, cw.first()) {
        (Some(n), Some(first)) => {
            let vocab = input_vocab(input);
            !vocab.contains(first)
                && !n.is_stopword(first)
                && cw.get(1).is_some_and(|w| matches!(w.as_str(), "the" | "a" | "an" | "your" | "to"))
                && n.lemma(first) == first
                && !first.ends_with('s')
        }
        _ => false,
    }
}

pub fn describes_action(
    candidate: &str,
    input: &str,
    subjects: &HashSet<String>,
    normalizer: &TokenNormalizer,
) -> bool {
    let cw = lower_words(candidate);
    let (Some(first), Some(verb)) = (cw.first(), cw.get(1)) else {
        return false;
    };
    if !subjects.contains(first) || AUX_MODALS.contains(&verb.as_str()) || normalizer.is_stopword(verb) {
        return false;
    }
    let verb = normalizer.lemma(verb).to_string();
    !normalizer.token_set(input).contains(&verb) && !input_vocab(input).contains(&verb)
}

pub fn has_named_entities(
    candidate: &str,
    input: &str,
    gazetteer: &HashSet<String>,
    capitalization: bool,
) -> bool {
    let vocab = input_vocab(input);
    if gazetteer
        .iter()
        .any(|g| !vocab.contains(g) && contains_phrase(&lower_words(candidate), g))
    {
        return true;
    }
    if !capitalization {
        return false;
    }
    // skip the first word of every sentence
    let mut sentence_start = true;
    for raw in candidate.split_whitespace() {
        let w = strip_possessive(raw.trim_matches(|c: char| !c.is_alphanumeric()));
        let starts = sentence_start;
        sentence_start = raw.ends_with(['.', '!', '?']);
        if w.is_empty() || starts {
            continue;
        }
        let mut chars = w.chars();
        let capital = chars.next().is_some_and(char::is_uppercase);
        let acronym = w.chars().all(|c| !c.is_lowercase());
        if capital && !acronym && !vocab.contains(&w.to_lowercase()) {
            return true;
        }
    }
    false
}

pub fn has_low_frequency_words(
    candidate: &str,
    input: &str,
    freq: &HashMap<String, f64>,
    min_zipf: f64,
) -> bool {
    let vocab = input_vocab(input);
    lower_words(candidate).iter().any(|w| {
        let w = strip_possessive(w);
        if vocab.contains(w) || w.chars().any(|c| c.is_ascii_digit()) {
            return false;
        }
        let parts: Vec<&str> = w.split(['-', '\'', '’', '.']).filter(|p| !p.is_empty()).collect();
        parts
            .iter()
            .any(|p| !vocab.contains(*p) && freq.get(*p).is_none_or(|z| *z < min_zipf))
    })
}

/// Sentences after splitting on terminal punctuation followed by an uppercase start.
pub fn sentence_count(text: &str) -> usize {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.is_empty() {
        return 0;
    }
    let mut count = 1;
    for pair in toks.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        let ends = prev.ends_with(['.', '!', '?']);
        let stem = prev.trim_end_matches(['.', '!', '?']).to_lowercase();
        let abbreviation = ABBREVIATIONS.contains(&stem.as_str())
            || (stem.chars().count() == 1 && prev.ends_with('.'));
        let starts = next
            .trim_start_matches(|c: char| !c.is_alphanumeric())
            .chars()
            .next()
            .is_some_and(char::is_uppercase);
        if ends && starts && !abbreviation {
            count += 1;
        }
    }
    count
}

pub fn has_repeated_ngrams(candidate: &str, normalizer: &TokenNormalizer) -> bool {
    let w: Vec<String> = lower_words(candidate)
        .into_iter()
        .map(|w| strip_possessive(&w).to_string())
        .collect();
    for n in [2, 3] {
        let mut seen = HashSet::new();
        for g in w.windows(n) {
            if g.iter().all(|t| normalizer.is_stopword(t)) {
                continue;
            }
            if !seen.insert(g) {
                return true;
            }
        }
    }
    false
}

pub fn has_repeated_similar_bigrams(candidate: &str, normalizer: &TokenNormalizer) -> bool {
    let content: Vec<String> = lower_words(candidate)
        .iter()
        .map(|w| strip_possessive(w))
        .filter(|w| w.chars().all(char::is_alphabetic) && !normalizer.is_stopword(w))
        .map(|w| normalizer.lemma(w).to_string())
        .collect();
    let bigrams: Vec<(&str, &str)> = content.windows(2).map(|p| (p[0].as_str(), p[1].as_str())).collect();
    for (i, a) in bigrams.iter().enumerate() {
        for b in bigrams.iter().skip(i + 2) {
            let first = a.0 == b.0;
            let second = a.1 == b.1;
            if first != second {
                return true;
            }
        }
    }
    false
}

pub fn has_consecutive_repeated_words(candidate: &str) -> bool {
    lower_words(candidate).windows(2).any(|p| p[0] == p[1])
}

pub fn is_past_tense(candidate: &str, input: &str, past_forms: &HashSet<String>) -> bool {
    let vocab = input_vocab(input);
    let w = lower_words(candidate);
    let fresh = |t: &String| !vocab.contains(t);
    if w.iter().any(|t| fresh(t) && (PAST_AUX.contains(&t.as_str()) || past_forms.contains(t))) {
        return true;
    }
    w.windows(2).any(|p| {
        SUBJECT_PRONOUNS.contains(&p[0].as_str()) && p[1].len() > 3 && p[1].ends_with("ed") && fresh(&p[1])
    })
}

pub fn is_passive_voice(candidate: &str, input: &str, participles: &HashSet<String>) -> bool {
    let vocab = input_vocab(input);
    let w = lower_words(candidate);
    let participle = |t: &str| {
        !vocab.contains(t) && (participles.contains(t) || (t.len() > 4 && t.ends_with("ed")))
    };
    for (i, t) in w.iter().enumerate() {
        if !BE_FORMS.contains(&t.as_str()) {
            continue;
        }
        let Some(next) = w.get(i + 1) else { continue };
        if participle(next) {
            return true;
        }
        let adverb = next.ends_with("ly") || matches!(next.as_str(), "not" | "also" | "already" | "often");
        if adverb && w.get(i + 2).is_some_and(|t| participle(t)) {
            return true;
        }
    }
    false
}

pub fn is_question(candidate: &str) -> bool {
    if candidate.trim_end().ends_with('?') {
        return true;
    }
    let w = lower_words(candidate);
    match (w.first(), w.get(1)) {
        (Some(a), Some(b)) if WH_WORDS.contains(&a.as_str()) => AUX_MODALS.contains(&b.as_str()),
        (Some(a), Some(b)) if AUX_MODALS.contains(&a.as_str()) => QUESTION_SUBJECTS.contains(&b.as_str()),
        _ => false,
    }
}

/// Any word containing a digit that the input does not already contain.
pub fn has_alphanumeric_words(candidate: &str, input: &str) -> bool {
    let vocab = input_vocab(input);
    lower_words(candidate)
        .iter()
        .any(|w| w.chars().any(|c| c.is_ascii_digit()) && !vocab.contains(strip_possessive(w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::LazyLock;

    static RES: LazyLock<FilterResources> =
        LazyLock::new(|| FilterResources::english(Arc::new(TokenNormalizer::english())));

    #[test]
    fn word_splitting() {
        assert_eq!(words("Enter the doctor's (Leningrad) address."), ["Enter", "the", "doctor's", "Leningrad", "address"]);
        assert_eq!(words("e.g. 2019-03-01, or 3.5"), ["e.g", "2019-03-01", "or", "3.5"]);
    }

    #[test]
    fn sentences() {
        assert_eq!(sentence_count("The address is the dentist's box. Guidelines for hiring a dentist."), 2);
        assert_eq!(sentence_count("Date of the trip, e.g. March 3."), 1);
        assert_eq!(sentence_count("Name of the restaurant."), 1);
        assert_eq!(sentence_count(""), 0);
    }

    #[test]
    fn question_forms() {
        assert!(is_question("Is there a balance of the account?"));
        assert!(is_question("What is the name of the city"));
        assert!(!is_question("Where the event is taking place"));
        assert!(!is_question("City where the event is happening"));
    }

    #[test]
    fn tense_and_voice() {
        assert!(is_past_tense("It was the dentist's address.", "Address of the dentist", &RES.past_forms));
        assert!(!is_past_tense("Address of the dentist", "Address of the dentist", &RES.past_forms));
        assert!(is_passive_voice("The address was given by abrasives.", "Address", &RES.participles));
        assert!(!is_passive_voice("Whether the price is included", "Whether the price is included", &RES.participles));
        assert!(!is_passive_voice("The event is happening today", "Event", &RES.participles));
    }

    #[test]
    fn similar_bigrams() {
        let n = &RES.normalizer;
        assert!(has_repeated_similar_bigrams("The type of event is stated in the title of the event.", n));
        assert!(!has_repeated_similar_bigrams("Number of seats to reserve at the restaurant", n));
        assert!(has_repeated_ngrams("The dentist is Address of the dentist.", n));
        assert!(!has_repeated_ngrams("Name of the city of the event", n));
    }

    #[test]
    fn entities_and_frequency() {
        let gaz = &RES.named_entities;
        assert!(has_named_entities("Enter the doctor's Leningrad address.", "Address of the doctor", gaz, true));
        assert!(!has_named_entities("Address of the doctor", "Address of the doctor", gaz, true));
        assert!(!has_named_entities("City of the event. Where it is", "City", gaz, true));
        assert!(!has_named_entities("Is the hotel TV included", "", gaz, true));
        assert!(has_low_frequency_words("The address is ofadvisory.", "Address", &RES.word_freq, 0.0));
        assert!(!has_low_frequency_words("The address of the dentist", "Address", &RES.word_freq, 0.0));
        assert!(!has_low_frequency_words("Rideshare type", "Type of rideshare", &RES.word_freq, 0.0));
    }

    #[test]
    fn unknown_filter_and_params() {
        let e = build_rule("is_sarcastic", &Map::new(), &RES).err().unwrap();
        assert!(matches!(e, Error::Config(_)));
        let mut p = Map::new();
        p.insert("threshold".into(), Value::from(1));
        assert!(build_rule("is_question", &p, &RES).is_err());
        let mut p = Map::new();
        p.insert("lexicon".into(), serde_json::json!(["Spam"]));
        let r = build_rule("sensitive_words", &p, &RES).unwrap();
        assert!(r("This is spam.", ""));
        assert!(!r("This is fine.", ""));
    }
}
