//! Pipeline settings and the named ranking profiles.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::metrics::TemplateSet;
use crate::tree::{DecisionSpec, Level0Order, RankingConfig};

pub const PEGASUS_BART: &str = "pegasus_bart";
pub const PEGASUS_B_BART: &str = "pegasus_b_bart";

/// Tree metrics, decisions and thresholds for one ranking scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub metrics: Vec<String>,
    pub decisions: Vec<String>,
    pub prune_above: Option<f64>,
    pub entailment_threshold: Option<f64>,
    pub level0_order: Level0Order,
    pub syntactic_first: bool,
}

impl Profile {
    pub fn pegasus_bart() -> Self {
        Self {
            metrics: vec!["J".into(), "E".into(), "S".into()],
            decisions: vec!["none".into(), "max".into(), "min".into()],
            prune_above: Some(0.75),
            entailment_threshold: None,
            level0_order: Level0Order::Descending,
            syntactic_first: true,
        }
    }

    pub fn pegasus_b_bart() -> Self {
        Self {
            metrics: vec!["J".into(), "S".into()],
            decisions: vec!["none".into(), "min".into()],
            prune_above: Some(0.5),
            entailment_threshold: Some(0.58),
            level0_order: Level0Order::Descending,
            syntactic_first: true,
        }
    }

    pub fn decision_spec(&self) -> Result<DecisionSpec> {
        let spec = DecisionSpec::parse(&self.decisions)?;
        if spec.depth() != self.metrics.len() {
            return Err(Error::Config(format!(
                "{} decision(s) for {} metric(s)",
                spec.depth(),
                self.metrics.len()
            )));
        }
        Ok(spec)
    }

    fn apply(&mut self, o: ProfileOverride) {
        if let Some(v) = o.metrics {
            self.metrics = v;
        }
        if let Some(v) = o.decisions {
            self.decisions = v;
        }
        if let Some(v) = o.prune_above {
            self.prune_above = (v >= 0.0).then_some(v);
        }
        if let Some(v) = o.entailment_threshold {
            self.entailment_threshold = (v > 0.0).then_some(v);
        }
        if let Some(v) = o.level0_order {
            self.level0_order = v;
        }
        if let Some(v) = o.syntactic_first {
            self.syntactic_first = v;
        }
    }
}

/// A profile section in the config file. Missing keys keep the built-in
/// value; a negative `prune_above` or a zero `entailment_threshold` disables it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileOverride {
    metrics: Option<Vec<String>>,
    decisions: Option<Vec<String>>,
    prune_above: Option<f64>,
    entailment_threshold: Option<f64>,
    level0_order: Option<Level0Order>,
    syntactic_first: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    k: Option<usize>,
    seed: Option<u64>,
    profile: Option<String>,
    echo_fallback: Option<bool>,
    templates: Option<Vec<String>>,
    quantization: Option<BTreeMap<String, u32>>,
    filters: Option<Vec<FilterSpec>>,
    #[serde(default)]
    profiles: BTreeMap<String, ProfileOverride>,
    eda: Option<EdaSection>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdaSection {
    pub p_sr: Option<f64>,
    pub p_ri: Option<f64>,
    pub p_rs: Option<f64>,
    pub p_rd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k: usize,
    pub seed: u64,
    pub profile: String,
    pub profiles: BTreeMap<String, Profile>,
    /// Pad short rankings with the original description instead of failing.
    pub echo_fallback: bool,
    pub templates: Vec<String>,
    /// Decimal places per metric name, overriding the metric defaults.
    pub quantization: BTreeMap<String, u32>,
    pub filters: Vec<FilterSpec>,
    pub eda: EdaSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            profile: PEGASUS_BART.into(),
            profiles: BTreeMap::from([
                (PEGASUS_BART.to_string(), Profile::pegasus_bart()),
                (PEGASUS_B_BART.to_string(), Profile::pegasus_b_bart()),
            ]),
            echo_fallback: true,
            templates: TemplateSet::default().templates().to_vec(),
            quantization: BTreeMap::new(),
            filters: FilterSpec::all_builtin(),
            eda: EdaSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::default();
        if let Some(k) = file.k {
            cfg.k = k;
        }
        if let Some(s) = file.seed {
            cfg.seed = s;
        }
        if let Some(p) = file.profile {
            cfg.profile = p;
        }
        if let Some(e) = file.echo_fallback {
            cfg.echo_fallback = e;
        }
        if let Some(t) = file.templates {
            cfg.templates = t;
        }
        if let Some(q) = file.quantization {
            cfg.quantization = q;
        }
        if let Some(f) = file.filters {
            cfg.filters = f;
        }
        if let Some(e) = file.eda {
            cfg.eda = e;
        }
        for (name, o) in file.profiles {
            // new profiles start from the default one
            let base = cfg.profiles.get(&name).cloned().unwrap_or_else(Profile::pegasus_bart);
            let mut p = base;
            p.apply(o);
            cfg.profiles.insert(name, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.active_profile()?.decision_spec()?;
        TemplateSet::new(self.templates.iter())?;
        for p in self.profiles.values() {
            p.decision_spec()?;
        }
        Ok(())
    }

    pub fn active_profile(&self) -> Result<&Profile> {
        self.profiles
            .get(&self.profile)
            .ok_or_else(|| Error::Config(format!("unknown profile {:?}", self.profile)))
    }

    pub fn template_set(&self) -> Result<TemplateSet> {
        TemplateSet::new(self.templates.iter())
    }

    pub fn ranking(&self) -> Result<RankingConfig> {
        let p = self.active_profile()?;
        Ok(RankingConfig {
            k: self.k,
            prune_threshold_level0: p.prune_above,
            level0_order: p.level0_order,
            syntactic_first: p.syntactic_first,
            rng_seed: self.seed,
            lenient: self.echo_fallback,
        })
    }
}
