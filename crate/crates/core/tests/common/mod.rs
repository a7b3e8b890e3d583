//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, LazyLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemaug::corpus::{extract_descriptions, parse_dialogues, Dialogue, SchemaDocument, Strictness};
use schemaug::eval::{evaluate, gold_turns, joint_goal_accuracy, schema_metric_table, schema_sensitivity, split_seen_unseen, PredictionRow, PredictionSet, SchemaTableOptions, SensitivityMode};
use schemaug::filters::{CandidatePool, FilterResources, FilterSpec, FilterStack};
use schemaug::metrics::{Metric, MetricId, MetricRegistry, OverlapStub, QuantizedValue, TableMetric, TemplateSet, TokenNormalizer};
use schemaug::tree::{build, DecisionSpec, Level0Order, RankTree, RankingConfig};
use schemaug::variants::{assemble_variants, RankContext, VariantSet};
use serde_json::json;

/// (filter, candidate, original description)
pub const FILTERED_EXAMPLES: [(&str, &str, &str); 12] = [
    ("contains_advice", "An appointment is necessary for your hair.", "Date of the appointment"),
    ("describes_action", "They commemorate the number of flights to the airport.", "Number of flights to the airport"),
    ("has_named_entities", "Enter the doctor's Leningrad address.", "Address of the doctor"),
    ("has_low_frequency_words", "The address is ofadvisory.", "Address of the dentist"),
    ("discard_multiple_sentences", "The address is the dentist's box. Guidelines for hiring a dentist.", "Address of the dentist"),
    ("has_repeated_ngrams", "The dentist is Address of the dentist.", "Address of the dentist"),
    ("has_repeated_similar_bigrams", "The type of event is stated in the title of the event.", "Type of event"),
    ("has_consecutive_repeated_words", "Average review rating for a hotel hotel.", "Average review rating of the hotel"),
    ("is_past_tense_sentence", "It was the dentist's address.", "Address of the dentist"),
    ("is_passive_voice_sentence", "The address was given by abrasives from the dentist.", "Address of the dentist"),
    ("is_question", "Is there a balance of the account?", "Current balance of the account"),
    ("has_alphanumeric_words", "400 baths in an apartment.", "Number of baths in the apartment"),
];

/// Every example is rejected, and its designated filter is among the reasons.
pub fn check_filter_examples(stack: &FilterStack) {
    for (filter, cand, input) in FILTERED_EXAMPLES {
        let v = stack.apply(cand, input);
        assert!(!v.kept, "{cand:?} kept");
        assert!(v.rejected_by.iter().any(|f| f == filter), "{cand:?}: {:?}", v.rejected_by);
    }
}

const FUZZ_WORDS: [&str; 24] = [
    "the", "address", "of", "dentist", "was", "given", "Is", "there", "400", "hotel", "They",
    "book", "Paris", "event", "type", "should", "ofadvisory", "rating", "a", ".", "?", "it",
    "Average", "title",
];

pub fn fuzzed(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..10);
    (0..n).map(|_| *FUZZ_WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Verdicts of shuffled filter stacks on `n` fuzzed candidates equal the canonical stack's.
pub fn check_filter_permutation(res: &FilterResources, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let base = FilterStack::from_specs(&FilterSpec::all_builtin(), res).unwrap();
    let stacks: Vec<FilterStack> = (0..5)
        .map(|_| {
            let mut specs = FilterSpec::all_builtin();
            specs.shuffle(&mut rng);
            FilterStack::from_specs(&specs, res).unwrap()
        })
        .collect();
    for _ in 0..n {
        let cand = fuzzed(&mut rng);
        let expected = base.apply(&cand, "Address of the dentist");
        for s in &stacks {
            assert_eq!(s.apply(&cand, "Address of the dentist"), expected);
        }
    }
}

/// Figure-style pool for "Fare per ticket for journey": (candidate, J, E, S).
pub const FARE_POOL: [(&str, f64, f64, f64); 5] = [
    ("Fare per ticket for journey", 0.0, 0.98, 100.0),
    ("Journey fare per ticket", 0.0, 0.98, 77.0),
    ("Price of a single trip ticket", 0.66, 0.77, 77.0),
    ("How much the trip costs", 0.66, 0.52, 60.0),
    ("Cost of one ticket for the trip", 0.66, 0.77, 85.0),
];

pub fn fare_metrics() -> Vec<Arc<dyn Metric>> {
    let col = |name: &str, decimals: u32, pick: fn(&(&str, f64, f64, f64)) -> f64| -> Arc<dyn Metric> {
        Arc::new(TableMetric::new(
            MetricId::new(name, decimals),
            FARE_POOL.iter().map(|r| (r.0.to_string(), pick(r))),
        ))
    };
    vec![col("J", 2, |r| r.1), col("E", 2, |r| r.2), col("S", 0, |r| r.3)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    None,
    Max,
    Min,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::None => "none",
            Rule::Max => "max",
            Rule::Min => "min",
        }
    }
}

/// A random pool: candidate texts and their integer metric paths.
#[derive(Debug, Clone)]
pub struct RandomPool {
    pub texts: Vec<String>,
    pub paths: Vec<Vec<i64>>,
    pub rules: Vec<Rule>,
    pub config: RankingConfig,
}

impl RandomPool {
    pub fn depth(&self) -> usize {
        self.rules.len()
    }

    /// One table metric per level with zero decimals, so the integer path is the quantized path.
    pub fn metrics(&self) -> Vec<Arc<dyn Metric>> {
        (0..self.depth())
            .map(|l| {
                Arc::new(TableMetric::new(
                    MetricId::new(format!("m{l}"), 0),
                    self.texts.iter().zip(&self.paths).map(|(t, p)| (t.clone(), p[l] as f64)),
                )) as Arc<dyn Metric>
            })
            .collect()
    }

    pub fn rule_names(&self) -> Vec<&'static str> {
        self.rules.iter().map(|r| r.name()).collect()
    }
}

pub fn random_pool(rng: &mut ChaCha8Rng) -> RandomPool {
    let d = rng.gen_range(1..=3);
    let vocab = rng.gen_range(1..=8);
    // each distinct text gets one fixed path
    let text_paths: Vec<Vec<i64>> = (0..vocab)
        .map(|_| (0..d).map(|_| rng.gen_range(0..4)).collect())
        .collect();
    let n = rng.gen_range(1..=10);
    let mut texts = Vec::new();
    let mut paths = Vec::new();
    for _ in 0..n {
        let t = rng.gen_range(0..vocab);
        texts.push(format!("cand {t}"));
        paths.push(text_paths[t].clone());
    }
    let mut rules = vec![Rule::None];
    for _ in 1..d {
        rules.push([Rule::None, Rule::Max, Rule::Min][rng.gen_range(0..3)]);
    }
    let config = RankingConfig {
        k: rng.gen_range(1..=12),
        prune_threshold_level0: None,
        level0_order: if rng.gen_bool(0.5) { Level0Order::Descending } else { Level0Order::Ascending },
        syntactic_first: rng.gen_bool(0.5),
        rng_seed: rng.gen(),
        lenient: true,
    };
    RandomPool { texts, paths, rules, config }
}

/// Ranking by direct enumeration over the candidate list, with no tree.
///
/// Child order at any node is the order in which values first appear among
/// the original candidates sharing that prefix.
pub fn simulate_rank(pool: &RandomPool) -> Vec<(String, Vec<i64>)> {
    let d = pool.depth();
    let cfg = &pool.config;
    let mut alive = vec![true; pool.texts.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = Vec::new();

    let choose = |alive: &[bool], prefix: &[i64], rule: Rule| -> i64 {
        let level = prefix.len();
        let mut order: Vec<i64> = Vec::new();
        for p in &pool.paths {
            if p[..level] == *prefix && !order.contains(&p[level]) {
                order.push(p[level]);
            }
        }
        let present: Vec<i64> = order
            .into_iter()
            .filter(|v| {
                pool.paths
                    .iter()
                    .zip(alive)
                    .any(|(p, a)| *a && p[..level] == *prefix && p[level] == *v)
            })
            .collect();
        match rule {
            Rule::None => present[0],
            Rule::Max => *present.iter().max().unwrap(),
            Rule::Min => *present.iter().min().unwrap(),
        }
    };

    let pick = |alive: &mut Vec<bool>, prefix: Vec<i64>, rng: &mut ChaCha8Rng| -> (String, Vec<i64>) {
        let members: Vec<usize> = (0..pool.texts.len())
            .filter(|&i| alive[i] && pool.paths[i] == prefix)
            .collect();
        let mut counts: Vec<(&str, usize)> = Vec::new();
        for &i in &members {
            let t = pool.texts[i].as_str();
            match counts.iter_mut().find(|(x, _)| *x == t) {
                Some((_, c)) => *c += 1,
                None => counts.push((t, 1)),
            }
        }
        let top = counts.iter().map(|c| c.1).max().unwrap();
        let tied: Vec<&str> = counts.iter().filter(|c| c.1 == top).map(|c| c.0).collect();
        let text = if tied.len() == 1 { tied[0] } else { tied[rng.gen_range(0..tied.len())] };
        let victim = members.into_iter().find(|&i| pool.texts[i] == text).unwrap();
        alive[victim] = false;
        (text.to_string(), prefix)
    };

    let descend = |alive: &[bool], start: i64, force_min: bool| -> Vec<i64> {
        let mut prefix = vec![start];
        for level in 1..d {
            let rule = if force_min && level == d - 1 { Rule::Min } else { pool.rules[level] };
            prefix.push(choose(alive, &prefix, rule));
        }
        prefix
    };

    if cfg.syntactic_first && pool.paths.iter().zip(&alive).any(|(p, a)| *a && p[0] == 0) {
        let path = descend(&alive, 0, true);
        out.push(pick(&mut alive, path, &mut rng));
    }
    while out.len() < cfg.k && alive.iter().any(|a| *a) {
        let mut level0: Vec<i64> = pool
            .paths
            .iter()
            .zip(&alive)
            .filter(|(_, a)| **a)
            .map(|(p, _)| p[0])
            .collect();
        level0.sort();
        level0.dedup();
        if cfg.level0_order == Level0Order::Descending {
            level0.reverse();
        }
        for v in level0 {
            if out.len() == cfg.k {
                break;
            }
            if !pool.paths.iter().zip(&alive).any(|(p, a)| *a && p[0] == v) {
                continue;
            }
            let path = descend(&alive, v, false);
            out.push(pick(&mut alive, path, &mut rng));
        }
    }
    out
}

/// One synthetic evaluation fixture row: (turn id, service seen, correctness per variant).
pub type TurnOutcome = (String, bool, Vec<bool>);

/// Population coefficient of variation of per-turn correctness, averaged
/// over turns with a non-zero mean, times 100.
pub fn oracle_schema_sensitivity(turns: &[Vec<bool>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for t in turns {
        let xs: Vec<f64> = t.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        if mean == 0.0 {
            continue;
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        total += var.sqrt() / mean;
        n += 1;
    }
    if n == 0 { 0.0 } else { 100.0 * total / n as f64 }
}

pub fn units(path: &[QuantizedValue]) -> Vec<i64> {
    path.iter().map(|v| v.units()).collect()
}

/// Leaf partition, depth, path recomputation and distinct sibling values.
pub fn check_tree_invariants(pool: &RandomPool, tree: &RankTree) {
    let leaves = tree.root.leaves();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (path, leaf) in &leaves {
        assert_eq!(path.len(), pool.depth());
        for s in &leaf.sents {
            *seen.entry(s.as_str()).or_default() += 1;
            let i = pool.texts.iter().position(|t| t == s).unwrap();
            assert_eq!(units(path), pool.paths[i]);
        }
    }
    let mut expected: HashMap<&str, usize> = HashMap::new();
    for t in &pool.texts {
        *expected.entry(t.as_str()).or_default() += 1;
    }
    assert_eq!(seen, expected);
    fn distinct(node: &schemaug::tree::TreeNode) {
        let mut vals: Vec<_> = node.children.iter().map(|c| c.val).collect();
        let n = vals.len();
        vals.sort();
        vals.dedup();
        assert_eq!(vals.len(), n);
        node.children.iter().for_each(distinct);
    }
    distinct(&tree.root);
}


/// Builds and ranks one random pool, checking it against [`simulate_rank`].
pub fn check_random_pool(pool: &RandomPool) {
    let tree = build("input", &pool.texts, &pool.metrics()).unwrap();
    check_tree_invariants(pool, &tree);
    let d = DecisionSpec::parse(&pool.rule_names()).unwrap();
    let got: Vec<(String, Vec<i64>)> = tree
        .rank(&pool.config, &d)
        .unwrap()
        .into_iter()
        .map(|s| (s.text, units(&s.path)))
        .collect();
    assert_eq!(got, simulate_rank(pool), "{pool:?}");
    assert_eq!(got.len(), pool.config.k.min(pool.texts.len()));
}

pub const SERVICES: [(&str, bool); 3] = [("Hotels_1", true), ("Flights_4", false), ("Music_2", false)];
pub const VARIANTS: [&str; 6] = ["orig", "v1", "v2", "v3", "v4", "v5"];

pub struct Fixture {
    pub dialogues: Vec<Dialogue>,
    pub preds: PredictionSet,
    /// Per user turn: whether its services are all seen, and correctness per variant.
    pub outcomes: Vec<(bool, Vec<bool>)>,
}

pub fn random_state(rng: &mut ChaCha8Rng) -> BTreeMap<String, Vec<String>> {
    let mut s = BTreeMap::new();
    for slot in ["city", "date", "count"] {
        if rng.gen_bool(0.6) {
            let v = ["Paris", "New York", "2", "March 3rd", "dontcare"].choose(rng).unwrap().to_string();
            let mut vals = vec![v];
            if rng.gen_bool(0.2) {
                vals.push("NYC".to_string());
            }
            s.insert(slot.to_string(), vals);
        }
    }
    s
}

/// A prediction equal to gold up to case and alternative choice, or
/// broken in one of three ways.
pub fn predict(rng: &mut ChaCha8Rng, frames: &[(&str, BTreeMap<String, Vec<String>>)], correct: bool) -> BTreeMap<String, Vec<String>> {
    let multi = frames.len() > 1;
    let mut out = BTreeMap::new();
    for (svc, state) in frames {
        for (slot, vals) in state {
            let v = vals.choose(rng).unwrap();
            let v = if rng.gen_bool(0.5) { v.to_uppercase() } else { v.clone() };
            let key = if multi || rng.gen_bool(0.3) { format!("{svc}-{slot}") } else { slot.clone() };
            out.insert(key, vec![v]);
        }
    }
    if !correct {
        let (svc, state) = &frames[0];
        let prefix = if multi { format!("{svc}-") } else { String::new() };
        let choice = if state.is_empty() { 0 } else { rng.gen_range(0..3) };
        match choice {
            0 => {
                let free = ["city", "date", "count"].into_iter().find(|s| !state.contains_key(*s));
                let slot = free.unwrap_or("extra_slot");
                out.insert(format!("{prefix}{slot}"), vec!["something".into()]);
            }
            1 => {
                let slot = state.keys().next().unwrap();
                out.retain(|k, _| !k.ends_with(slot.as_str()) || !k.starts_with(&prefix));
            }
            _ => {
                let slot = state.keys().next().unwrap();
                let key = out.keys().find(|k| k.ends_with(slot.as_str()) && k.starts_with(&prefix)).unwrap().clone();
                out.insert(key, vec!["wrong value".into()]);
            }
        }
    }
    out
}

pub fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dialogues = Vec::new();
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for d in 0..10 {
        let id = format!("dlg_{d}");
        let mut turns = Vec::new();
        let mut services: Vec<&str> = Vec::new();
        for t in 0..5 {
            let n_frames = if rng.gen_bool(0.15) { 2 } else { 1 };
            let picked: Vec<(&str, bool)> = SERVICES.choose_multiple(&mut rng, n_frames).copied().collect();
            let frames: Vec<(&str, BTreeMap<String, Vec<String>>)> = picked.iter().map(|(s, _)| (*s, random_state(&mut rng))).collect();
            for (s, _) in &picked {
                if !services.contains(s) {
                    services.push(s);
                }
            }
            let seen = picked.iter().all(|(_, seen)| *seen);
            let user_frames: Vec<_> = frames
                .iter()
                .map(|(s, st)| json!({"service": s, "slots": [], "state": {"active_intent": "Find", "requested_slots": [], "slot_values": st}}))
                .collect();
            turns.push(json!({"speaker": "USER", "utterance": format!("user {t}"), "frames": user_frames}));
            turns.push(json!({"speaker": "SYSTEM", "utterance": format!("system {t}"), "frames": []}));
            let p_correct = rng.gen_range(0.0..1.0);
            let mut flags = Vec::new();
            for v in VARIANTS {
                let ok = rng.gen_bool(p_correct);
                flags.push(ok);
                rows.push(PredictionRow {
                    dialogue_id: id.clone(),
                    turn: 2 * t,
                    variant: v.to_string(),
                    state: predict(&mut rng, &frames, ok),
                });
            }
            outcomes.push((seen, flags));
        }
        dialogues.push(json!({"dialogue_id": id, "services": services, "turns": turns}));
    }
    rows.shuffle(&mut rng);
    let text = serde_json::Value::Array(dialogues).to_string();
    Fixture {
        dialogues: parse_dialogues(&text, std::path::Path::new("fixture.json"), Strictness::Strict).unwrap(),
        preds: PredictionSet::new(rows).unwrap(),
        outcomes,
    }
}

pub fn seen_map() -> BTreeMap<String, bool> {
    SERVICES.iter().map(|(s, seen)| (s.to_string(), *seen)).collect()
}

pub fn pct(xs: impl Iterator<Item = bool>) -> f64 {
    let v: Vec<bool> = xs.collect();
    100.0 * v.iter().filter(|b| **b).count() as f64 / v.len() as f64
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-6
}

/// JGA per variant, seen/unseen split and SS against direct recomputation
/// from the generator's correctness flags.
pub fn check_eval_fixture(seed: u64) {
    let f = fixture(seed);
    let gold = gold_turns(&f.dialogues);
    assert_eq!(gold.len(), 50);
    for (vi, v) in VARIANTS.iter().enumerate() {
        let expected = pct(f.outcomes.iter().map(|o| o.1[vi]));
        assert!(close(joint_goal_accuracy(&f.preds, &gold, v).unwrap(), expected), "seed {seed} {v}");
    }

    let variants: Vec<String> = VARIANTS[1..].iter().map(|s| s.to_string()).collect();
    let (seen, unseen) = split_seen_unseen(&f.preds, &gold, &seen_map(), &variants).unwrap();
    let side = |want: bool| {
        let flags: Vec<bool> = f.outcomes.iter().filter(|o| o.0 == want).flat_map(|o| o.1[1..].to_vec()).collect();
        (!flags.is_empty()).then(|| pct(flags.into_iter()))
    };
    let round = |x: Option<f64>| x.map(|x| (x * 1e6).round());
    assert_eq!(round(seen), round(side(true)), "seed {seed}");
    assert_eq!(round(unseen), round(side(false)), "seed {seed}");

    let per_turn: Vec<Vec<bool>> = f.outcomes.iter().map(|o| o.1[1..].to_vec()).collect();
    let ss = schema_sensitivity(&f.preds, &gold, &variants, SensitivityMode::PerTurn).unwrap();
    assert!(close(ss, oracle_schema_sensitivity(&per_turn)), "seed {seed}: {ss}");

    let report = evaluate(&f.preds, &f.dialogues, Some(&seen_map()), SensitivityMode::PerTurn).unwrap();
    let mean_v: f64 = (1..6).map(|vi| pct(f.outcomes.iter().map(|o| o.1[vi]))).sum::<f64>() / 5.0;
    assert!(close(report.jga_variants.unwrap(), mean_v));
    assert!(close(report.ss_jga.unwrap(), ss));
    assert_eq!(report.turns, 50);

    // turn-weighted mean of the seen and unseen sides is the pooled JGA
    let n_seen = f.outcomes.iter().filter(|o| o.0).count() as f64;
    let pooled = (seen.unwrap_or(0.0) * n_seen + unseen.unwrap_or(0.0) * (50.0 - n_seen)) / 50.0;
    assert!(close(pooled, mean_v));
}

pub const WORDS: [&str; 16] = [
    "fare", "ticket", "journey", "price", "trip", "city", "hotel", "number", "rating", "average", "the", "of", "for", "a",
    "departure", "date",
];

pub static NORMALIZER: LazyLock<Arc<TokenNormalizer>> = LazyLock::new(|| Arc::new(TokenNormalizer::english()));

pub fn phrase(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=6);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn schema_json(rng: &mut ChaCha8Rng) -> Vec<SchemaDocument> {
    let services: Vec<serde_json::Value> = (0..rng.gen_range(1..=2))
        .map(|s| {
            let slots: Vec<serde_json::Value> = (0..rng.gen_range(1..=3))
                .map(|i| serde_json::json!({"name": format!("slot_{i}"), "description": phrase(rng), "is_categorical": false, "possible_values": []}))
                .collect();
            serde_json::json!({
                "service_name": format!("Svc_{s}"),
                "description": phrase(rng),
                "slots": slots,
                "intents": [{"name": "Find", "description": phrase(rng), "required_slots": ["slot_0"], "optional_slots": {}}],
            })
        })
        .collect();
    serde_json::from_value(serde_json::Value::Array(services)).unwrap()
}

pub fn pools(base: &[SchemaDocument], rng: &mut ChaCha8Rng) -> Vec<CandidatePool> {
    extract_descriptions(base)
        .into_iter()
        .map(|(el, desc)| {
            let n = rng.gen_range(0..=8);
            let cands: Vec<String> = (0..n)
                .map(|_| {
                    let mut words: Vec<&str> = desc.split(' ').collect();
                    if rng.gen_bool(0.3) {
                        words.shuffle(rng);
                    } else {
                        let at = rng.gen_range(0..words.len());
                        words[at] = WORDS.choose(rng).unwrap();
                    }
                    words.join(" ")
                })
                .collect();
            CandidatePool::new(el, desc, cands)
        })
        .collect()
}

pub fn context(k: usize, seed: u64) -> (RankContext, Arc<TokenNormalizer>) {
    let n = NORMALIZER.clone();
    let backend = Arc::new(OverlapStub::new(n.clone()));
    let registry = MetricRegistry::with_builtins(n.clone(), backend.clone(), TemplateSet::default());
    let ctx = RankContext {
        metrics: registry.resolve(&["J", "E", "S"]).unwrap(),
        decisions: DecisionSpec::parse(&["none", "max", "min"]).unwrap(),
        ranking: RankingConfig {
            k,
            rng_seed: seed,
            lenient: true,
            ..Default::default()
        },
        entailment_threshold: None,
        backend,
        templates: TemplateSet::default(),
        echo_fallback: true,
    };
    (ctx, n)
}

pub fn assemble(seed: u64) -> VariantSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = schema_json(&mut rng);
    let pools = pools(&base, &mut rng);
    let k = rng.gen_range(1..=5);
    let (ctx, n) = context(k, seed);
    assemble_variants(&base, &pools, &ctx, &n).unwrap()
}

/// Per-element and corpus-mean Jaccard never decrease from v1 to vk.
pub fn check_monotone_variants(vs: &VariantSet) {
    let k = vs.k();
    let elements = extract_descriptions(&vs.base);
    assert_eq!(vs.rows.len(), elements.len() * k);
    for (el, _) in &elements {
        let js: Vec<f64> = (1..=k)
            .map(|v| vs.rows.iter().find(|r| r.variant == v && &r.element == el).unwrap().jaccard)
            .collect();
        assert!(js.windows(2).all(|w| w[0] <= w[1]), "{el}: {js:?}");
    }
    let means = vs.mean_jaccard();
    assert!(means.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{means:?}");
    let table = schema_metric_table(&vs.variants, &vs.base, None, &NORMALIZER, &SchemaTableOptions::default()).unwrap();
    let col: Vec<f64> = table.rows.iter().map(|r| r.jaccard).collect();
    assert!(col.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{col:?}");
}
