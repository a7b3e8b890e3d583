//! Metric-split candidate tree and constrained ranking over it.
//!
//! Every candidate contributes one root-to-leaf path whose node values are
//! the quantized metric values between the input and that candidate. Ranking
//! sweeps the first level (the diversity metric) and descends each subtree
//! with a per-level decision function.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricId, QuantizedValue};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreeNode {
    /// `None` only for the root.
    pub val: Option<QuantizedValue>,
    /// Candidate texts. Only leaves hold any.
    pub sents: Vec<String>,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    fn child(&self, val: QuantizedValue) -> Option<usize> {
        self.children.iter().position(|c| c.val == Some(val))
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of candidate occurrences below this node.
    pub fn len(&self) -> usize {
        self.sents.len() + self.children.iter().map(TreeNode::len).sum::<usize>()
    }

    /// Leaves in depth-first, insertion order, with their paths.
    pub fn leaves(&self) -> Vec<(Vec<QuantizedValue>, &TreeNode)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut Vec::new(), &mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, path: &mut Vec<QuantizedValue>, out: &mut Vec<(Vec<QuantizedValue>, &'a TreeNode)>) {
        if let Some(v) = self.val {
            path.push(v);
        }
        if self.is_leaf() {
            if self.val.is_some() {
                out.push((path.clone(), self));
            }
        } else {
            for c in &self.children {
                c.collect_leaves(path, out);
            }
        }
        if self.val.is_some() {
            path.pop();
        }
    }

    fn remove(&mut self, path: &[usize], text: &str) {
        match path.split_first() {
            None => {
                if let Some(i) = self.sents.iter().position(|s| s == text) {
                    self.sents.remove(i);
                }
            }
            Some((&i, rest)) => {
                self.children[i].remove(rest, text);
                if self.children[i].is_empty() {
                    self.children.remove(i);
                }
            }
        }
    }
}

/// Raw and quantized metric values of one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScores {
    pub values: Vec<f64>,
    pub path: Vec<QuantizedValue>,
}

/// A built tree plus the metrics that split it.
#[derive(Debug, Clone)]
pub struct RankTree {
    pub root: TreeNode,
    pub metrics: Vec<MetricId>,
    pub scores: HashMap<String, CandidateScores>,
}

/// Builds the tree. Metric values are computed per metric in one batch over
/// all candidates; insertion then follows candidate order.
pub fn build(input: &str, candidates: &[String], metrics: &[Arc<dyn Metric>]) -> Result<RankTree> {
    if candidates.is_empty() {
        return Err(Error::Argument("cannot build a tree without candidates".into()));
    }
    if metrics.is_empty() {
        return Err(Error::Argument("cannot build a tree without metrics".into()));
    }
    let refs: Vec<&str> = candidates.iter().map(String::as_str).collect();
    let mut columns = Vec::with_capacity(metrics.len());
    for m in metrics {
        columns.push(eval_column(m.as_ref(), input, &refs)?);
    }
    let ids: Vec<MetricId> = metrics.iter().map(|m| m.id().clone()).collect();
    let mut root = TreeNode::default();
    let mut scores = HashMap::new();
    for (i, cand) in candidates.iter().enumerate() {
        let values: Vec<f64> = columns.iter().map(|col| col[i]).collect();
        let path: Vec<QuantizedValue> = ids.iter().zip(&values).map(|(id, v)| id.quantize(*v)).collect();
        let mut curr = &mut root;
        for &val in &path {
            let idx = match curr.child(val) {
                Some(idx) => idx,
                None => {
                    curr.children.push(TreeNode {
                        val: Some(val),
                        ..Default::default()
                    });
                    curr.children.len() - 1
                }
            };
            curr = &mut curr.children[idx];
        }
        curr.sents.push(cand.clone());
        scores.entry(cand.clone()).or_insert(CandidateScores { values, path });
    }
    Ok(RankTree {
        root,
        metrics: ids,
        scores,
    })
}

fn eval_column(metric: &dyn Metric, input: &str, candidates: &[&str]) -> Result<Vec<f64>> {
    let wrap = |index: usize, source: Error| Error::Metric {
        metric: metric.id().name.clone(),
        index,
        candidate: candidates[index].to_string(),
        source: Box::new(source),
    };
    let values = match metric.eval_many(input, candidates) {
        Ok(v) if v.len() == candidates.len() => v,
        Ok(v) => {
            return Err(Error::Protocol(format!(
                "metric {} returned {} values for {} candidates",
                metric.id().name,
                v.len(),
                candidates.len()
            )))
        }
        Err(batch_err) => {
            // find the candidate that breaks the metric
            for (i, c) in candidates.iter().enumerate() {
                if let Err(e) = metric.eval(input, c) {
                    return Err(wrap(i, e));
                }
            }
            return Err(batch_err);
        }
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(wrap(i, Error::Protocol(format!("non-finite value {}", values[i]))));
    }
    Ok(values)
}

/// Picks one child given the values of all children, in insertion order.
pub type ChildRule = Arc<dyn Fn(&[QuantizedValue]) -> usize + Send + Sync>;

#[derive(Clone)]
pub enum Decision {
    /// Take the first remaining child.
    None,
    Max,
    Min,
    Custom(ChildRule),
}

impl fmt::Debug for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::None => f.write_str("None"),
            Decision::Max => f.write_str("Max"),
            Decision::Min => f.write_str("Min"),
            Decision::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Decision {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Decision::None),
            "max" => Ok(Decision::Max),
            "min" => Ok(Decision::Min),
            other => Err(Error::Config(format!("unknown decision function {other:?}"))),
        }
    }

    /// Index of the chosen child. Ties go to the earliest child.
    pub fn choose(&self, vals: &[QuantizedValue]) -> Result<usize> {
        let best = |better: fn(&QuantizedValue, &QuantizedValue) -> bool| {
            let mut idx = 0;
            for (i, v) in vals.iter().enumerate().skip(1) {
                if better(v, &vals[idx]) {
                    idx = i;
                }
            }
            idx
        };
        let idx = match self {
            Decision::None => 0,
            Decision::Max => best(|a, b| a > b),
            Decision::Min => best(|a, b| a < b),
            Decision::Custom(rule) => rule(vals),
        };
        if idx >= vals.len() {
            return Err(Error::Argument(format!(
                "decision chose child {idx} of {}",
                vals.len()
            )));
        }
        Ok(idx)
    }
}

/// One decision per tree level. Level 0 is swept, so its entry must be `None`.
#[derive(Debug, Clone)]
pub struct DecisionSpec(Vec<Decision>);

impl DecisionSpec {
    pub fn new(levels: Vec<Decision>) -> Result<Self> {
        match levels.first() {
            None => Err(Error::Config("decision spec is empty".into())),
            Some(Decision::None) => Ok(Self(levels)),
            Some(d) => Err(Error::Config(format!("level 0 decision must be none, got {d:?}"))),
        }
    }

    pub fn parse<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(names.iter().map(|n| Decision::parse(n.as_ref())).collect::<Result<_>>()?)
    }

    pub fn levels(&self) -> &[Decision] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level0Order {
    #[default]
    Descending,
    Ascending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub k: usize,
    /// Level-0 subtrees with a value above this are pruned before ranking.
    pub prune_threshold_level0: Option<f64>,
    pub level0_order: Level0Order,
    pub syntactic_first: bool,
    pub rng_seed: u64,
    /// Return fewer than `k` candidates instead of failing when the tree runs out.
    pub lenient: bool,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            k: 5,
            prune_threshold_level0: None,
            level0_order: Level0Order::Descending,
            syntactic_first: true,
            rng_seed: 0,
            lenient: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub text: String,
    pub path: Vec<QuantizedValue>,
    pub syntactic: bool,
}

/// Chooses a candidate from a leaf: the most common text if one text occurs
/// more often than every other and at least twice, otherwise uniformly among
/// the most common (in first-appearance order). The rng is drawn from only
/// when more than one text is tied.
pub fn leaf_select<R: Rng>(sents: &[String], rng: &mut R) -> Option<String> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for s in sents {
        match counts.iter_mut().find(|(t, _)| t == s) {
            Some((_, c)) => *c += 1,
            None => counts.push((s, 1)),
        }
    }
    let top = counts.iter().map(|(_, c)| *c).max()?;
    let tied: Vec<&str> = counts.iter().filter(|(_, c)| *c == top).map(|(t, _)| *t).collect();
    let pick = if tied.len() == 1 { 0 } else { rng.gen_range(0..tied.len()) };
    Some(tied[pick].to_string())
}

impl RankTree {
    pub fn depth(&self) -> usize {
        self.metrics.len()
    }

    /// Removes level-0 subtrees whose value satisfies `pred`.
    pub fn prune_level0(&mut self, pred: impl Fn(QuantizedValue) -> bool) -> Result<()> {
        self.root.children.retain(|c| !c.val.is_some_and(&pred));
        if self.root.is_empty() {
            return Err(Error::EmptyTree);
        }
        Ok(())
    }

    /// Prunes level-0 subtrees with a value strictly above `threshold`.
    pub fn prune_above(&mut self, threshold: f64) -> Result<()> {
        let t = self.metrics[0].quantize(threshold);
        self.prune_level0(|v| v > t)
    }

    fn descend(
        &self,
        start: usize,
        decisions: &DecisionSpec,
        force_min_last: bool,
    ) -> Result<Vec<usize>> {
        let mut path = vec![start];
        let mut node = &self.root.children[start];
        let levels = decisions.levels();
        for (level, rule) in levels.iter().enumerate().take(self.depth()).skip(1) {
            let vals: Vec<QuantizedValue> = node.children.iter().filter_map(|c| c.val).collect();
            let rule = if force_min_last && level + 1 == self.depth() { &Decision::Min } else { rule };
            let idx = rule.choose(&vals)?;
            path.push(idx);
            node = &node.children[idx];
        }
        Ok(path)
    }

    fn node_at(&self, path: &[usize]) -> &TreeNode {
        path.iter().fold(&self.root, |n, &i| &n.children[i])
    }

    fn values_at(&self, path: &[usize]) -> Vec<QuantizedValue> {
        let mut node = &self.root;
        path.iter()
            .map(|&i| {
                node = &node.children[i];
                node.val.expect("non-root node has a value")
            })
            .collect()
    }

    fn take<R: Rng>(&mut self, path: &[usize], rng: &mut R, syntactic: bool) -> Selection {
        let leaf = self.node_at(path);
        let text = leaf_select(&leaf.sents, rng).expect("leaves are never empty");
        let values = self.values_at(path);
        self.root.remove(path, &text);
        Selection {
            text,
            path: values,
            syntactic,
        }
    }

    fn syntactic_path(&self, decisions: &DecisionSpec) -> Result<Option<Vec<usize>>> {
        match self.root.children.iter().position(|c| c.val.is_some_and(|v| v.is_zero())) {
            Some(start) => self.descend(start, decisions, true).map(Some),
            None => Ok(None),
        }
    }

    /// The candidate a syntactic-first pass would pick from the level-0 zero
    /// subtree, without removing it.
    pub fn select_syntactic(&self, decisions: &DecisionSpec, seed: u64) -> Result<Option<Selection>> {
        self.check_depth(decisions)?;
        let Some(path) = self.syntactic_path(decisions)? else {
            return Ok(None);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let leaf = self.node_at(&path);
        Ok(leaf_select(&leaf.sents, &mut rng).map(|text| Selection {
            text,
            path: self.values_at(&path),
            syntactic: true,
        }))
    }

    fn check_depth(&self, decisions: &DecisionSpec) -> Result<()> {
        if decisions.depth() != self.depth() {
            return Err(Error::Config(format!(
                "{} decision(s) for a tree of depth {}",
                decisions.depth(),
                self.depth()
            )));
        }
        Ok(())
    }

    /// Ranks up to `config.k` candidates. The tree itself is left untouched.
    pub fn rank(&self, config: &RankingConfig, decisions: &DecisionSpec) -> Result<Vec<Selection>> {
        if config.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.check_depth(decisions)?;
        let mut work = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut ranked = Vec::with_capacity(config.k);

        if config.syntactic_first {
            if let Some(path) = work.syntactic_path(decisions)? {
                ranked.push(work.take(&path, &mut rng, true));
            }
        }
        while ranked.len() < config.k && !work.root.is_empty() {
            let mut order: Vec<QuantizedValue> = work.root.children.iter().filter_map(|c| c.val).collect();
            order.sort();
            if config.level0_order == Level0Order::Descending {
                order.reverse();
            }
            for val in order {
                if ranked.len() == config.k {
                    break;
                }
                // emptied subtrees are gone from the tree
                let Some(start) = work.root.child(val) else { continue };
                let path = work.descend(start, decisions, false)?;
                ranked.push(work.take(&path, &mut rng, false));
            }
        }
        if ranked.len() < config.k && !config.lenient {
            return Err(Error::Exhausted {
                ranked: ranked.len(),
                requested: config.k,
            });
        }
        Ok(ranked)
    }

    /// Indented text rendering, one node per line.
    pub fn render_text(&self) -> String {
        let mut out = String::from("root\n");
        self.render_node(&self.root, 0, &mut out);
        out
    }

    fn render_node(&self, node: &TreeNode, depth: usize, out: &mut String) {
        for c in &node.children {
            let name = &self.metrics[depth].name;
            let val = c.val.expect("non-root node has a value");
            let _ = write!(out, "{}{name}={val}", "  ".repeat(depth + 1));
            if c.is_leaf() {
                let _ = write!(out, " {:?}", c.sents);
            }
            out.push('\n');
            self.render_node(c, depth + 1, out);
        }
    }

    pub fn to_json(&self) -> Value {
        fn node(t: &RankTree, n: &TreeNode, depth: usize) -> Value {
            let children: Vec<Value> = n.children.iter().map(|c| node(t, c, depth + 1)).collect();
            match n.val {
                None => json!({ "children": children }),
                Some(v) => {
                    let mut obj = json!({ "metric": t.metrics[depth - 1].name, "val": v.value() });
                    if n.is_leaf() {
                        obj["sents"] = json!(n.sents);
                    } else {
                        obj["children"] = Value::Array(children);
                    }
                    obj
                }
            }
        }
        node(self, &self.root, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TableMetric;

    fn table(name: &str, decimals: u32, rows: &[(&str, f64)]) -> Arc<dyn Metric> {
        Arc::new(TableMetric::new(
            MetricId::new(name, decimals),
            rows.iter().map(|(c, v)| (c.to_string(), *v)),
        ))
    }

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_candidate_single_path() {
        let m = [table("J", 2, &[("a", 0.5)]), table("S", 0, &[("a", 40.0)])];
        let t = build("x", &strings(&["a"]), &m).unwrap();
        assert_eq!(t.root.children.len(), 1);
        let leaves = t.root.leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].0.len(), 2);
        assert_eq!(leaves[0].1.sents, ["a"]);
    }

    #[test]
    fn identical_candidates_share_a_leaf() {
        let m = [table("J", 2, &[("a", 0.5)])];
        let t = build("x", &strings(&["a", "a"]), &m).unwrap();
        assert_eq!(t.root.leaves()[0].1.sents, ["a", "a"]);
    }

    #[test]
    fn build_errors_name_the_candidate() {
        let m = [table("J", 2, &[("a", 0.5)])];
        match build("x", &strings(&["a", "b"]), &m) {
            Err(Error::Metric { index, candidate, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(candidate, "b");
            }
            other => panic!("{other:?}"),
        }
        assert!(build("x", &[], &m).is_err());
        assert!(build("x", &strings(&["a"]), &[]).is_err());
        let nan = [table("J", 2, &[("a", f64::NAN)])];
        assert!(matches!(build("x", &strings(&["a"]), &nan), Err(Error::Metric { .. })));
    }

    #[test]
    fn pruning() {
        let m = [table("J", 2, &[("a", 0.0), ("b", 0.4), ("c", 0.8)])];
        let mut t = build("x", &strings(&["a", "b", "c"]), &m).unwrap();
        let before = t.root.clone();
        t.prune_level0(|_| false).unwrap();
        assert_eq!(t.root, before);
        t.prune_above(0.75).unwrap();
        let vals: Vec<f64> = t.root.children.iter().map(|c| c.val.unwrap().value()).collect();
        assert_eq!(vals, [0.0, 0.4]);
        assert!(matches!(t.prune_level0(|_| true), Err(Error::EmptyTree)));
    }

    #[test]
    fn leaf_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(leaf_select(&strings(&["a", "a", "b"]), &mut rng).unwrap(), "a");
        assert_eq!(leaf_select(&strings(&["a"]), &mut rng).unwrap(), "a");
        assert_eq!(leaf_select(&[], &mut rng), None);
        let abc = strings(&["a", "b", "c"]);
        let first = leaf_select(&abc, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        for _ in 0..5 {
            assert_eq!(leaf_select(&abc, &mut ChaCha8Rng::seed_from_u64(7)).unwrap(), first);
        }
        let picks: std::collections::HashSet<String> =
            (0..50).map(|s| leaf_select(&abc, &mut ChaCha8Rng::seed_from_u64(s)).unwrap()).collect();
        assert_eq!(picks.len(), 3);
    }

    #[test]
    fn decisions() {
        let v: Vec<QuantizedValue> = [3, 7, 7, 1].iter().map(|u| QuantizedValue::from_units(*u, 0)).collect();
        assert_eq!(Decision::Max.choose(&v).unwrap(), 1);
        assert_eq!(Decision::Min.choose(&v).unwrap(), 3);
        assert_eq!(Decision::None.choose(&v).unwrap(), 0);
        let last: ChildRule = Arc::new(|v| v.len() - 1);
        assert_eq!(Decision::Custom(last).choose(&v).unwrap(), 3);
        let bad: ChildRule = Arc::new(|v| v.len());
        assert!(Decision::Custom(bad).choose(&v).is_err());
        assert!(DecisionSpec::parse(&["max", "min"]).is_err());
        assert!(DecisionSpec::parse(&["none", "sideways"]).is_err());
        assert_eq!(DecisionSpec::parse(&["None", "MAX", "min"]).unwrap().depth(), 3);
    }

    #[test]
    fn rank_one_and_exhaustion() {
        let m = [table("J", 2, &[("a", 0.3)])];
        let t = build("x", &strings(&["a"]), &m).unwrap();
        let d = DecisionSpec::parse(&["none"]).unwrap();
        let cfg = RankingConfig { k: 1, ..Default::default() };
        assert_eq!(t.rank(&cfg, &d).unwrap()[0].text, "a");
        let cfg = RankingConfig { k: 3, ..Default::default() };
        assert!(matches!(t.rank(&cfg, &d), Err(Error::Exhausted { ranked: 1, requested: 3 })));
        let cfg = RankingConfig { k: 3, lenient: true, ..Default::default() };
        assert_eq!(t.rank(&cfg, &d).unwrap().len(), 1);
        let cfg = RankingConfig { k: 0, ..Default::default() };
        assert!(t.rank(&cfg, &d).is_err());
        assert!(t.rank(&RankingConfig::default(), &DecisionSpec::parse(&["none", "max"]).unwrap()).is_err());
    }

    #[test]
    fn renderings() {
        let m = [table("J", 2, &[("a", 0.0), ("b", 0.5)]), table("S", 0, &[("a", 90.0), ("b", 40.0)])];
        let t = build("x", &strings(&["a", "b"]), &m).unwrap();
        assert_eq!(t.render_text(), "root\n  J=0.00\n    S=90 [\"a\"]\n  J=0.50\n    S=40 [\"b\"]\n");
        let j = t.to_json();
        assert_eq!(j["children"][1]["children"][0]["sents"][0], "b");
        assert_eq!(j["children"][1]["val"], 0.5);
    }
}
