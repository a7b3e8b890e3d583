use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use schemaug::config::PipelineConfig;
use schemaug::corpus::{
    dump_normalized, load_dialogues, load_schemas, mark_seen_services, unseen_dialogue_fraction, Dialogue,
    SchemaDocument, Strictness,
};
use schemaug::eda::{english_synonyms, generate_eda_variants, load_synonyms, EdaConfig};
use schemaug::eval::{evaluate, schema_metric_table, PredictionSet, SchemaTableOptions, SensitivityMode};
use schemaug::filters::{filter_pool, read_pools, write_audit, write_pools, FilterResources, FilterStack};
use schemaug::metrics::{
    CacheBackend, EntailmentBackend, OverlapStub, RecordingBackend, RemoteBackend, RemoteConfig, TokenNormalizer,
};
use schemaug::prompts::{
    build_d3st, build_t5dst, compose_augmented_dataset, write_examples, D3stGrouping, PromptExample, PromptOptions,
    WhitespaceTruncator,
};
use schemaug::variants::{assemble_variants, emit_variants, RankContext};
use schemaug::Error;

use crate::{Cli, Command, Global, PromptFormat, ScorerKind};

/// 0 ok, 1 other, 2 usage or config, 3 parse or validation, 4 data,
/// 5 entailment scorer, 6 candidate exhaustion.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) => core_code(e),
        None => 1,
    }
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Argument(_) => 2,
        Error::Parse { .. } | Error::Validation { .. } => 3,
        Error::Data { .. } | Error::Coverage { .. } | Error::UnknownService(_) | Error::InsufficientVariants { .. } => 4,
        Error::Transport(_) | Error::Protocol(_) | Error::CacheMiss { .. } => 5,
        Error::Exhausted { .. } | Error::EmptyTree => 6,
        Error::Metric { source, .. } => core_code(source),
        Error::Io { .. } => 1,
    }
}

struct Env {
    global: Global,
    config: PipelineConfig,
    strictness: Strictness,
    normalizer: Arc<TokenNormalizer>,
}

impl Env {
    fn new(global: Global) -> Result<Self> {
        let mut config = match &global.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = global.seed {
            config.seed = s;
        }
        if let Some(p) = &global.profile {
            config.profile = p.clone();
        }
        config.validate()?;
        if let Some(j) = global.jobs {
            if j == 0 {
                return Err(Error::Argument("--jobs must be at least 1".into()).into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .context("configuring the worker pool")?;
        }
        let normalizer = Arc::new(TokenNormalizer::from_files(
            global.lemmas.as_deref(),
            global.stopwords.as_deref(),
        )?);
        let strictness = if global.lenient { Strictness::Lenient } else { Strictness::Strict };
        Ok(Self {
            global,
            config,
            strictness,
            normalizer,
        })
    }

    fn scorer(&self) -> Result<Arc<dyn EntailmentBackend>> {
        let g = &self.global;
        let kind = g.scorer.unwrap_or(if g.scorer_url.is_some() { ScorerKind::Remote } else { ScorerKind::Stub });
        Ok(match kind {
            ScorerKind::Stub => Arc::new(OverlapStub::new(self.normalizer.clone())),
            ScorerKind::Cache => {
                let Some(path) = &g.scorer_cache else {
                    return Err(Error::Config("--scorer cache needs --scorer-cache PATH".into()).into());
                };
                Arc::new(CacheBackend::load(path)?)
            }
            ScorerKind::Remote => {
                let Some(url) = &g.scorer_url else {
                    return Err(Error::Config("--scorer remote needs --scorer-url or SCHEMAUG_SCORER_URL".into()).into());
                };
                let remote = RemoteBackend::new(RemoteConfig::new(url))?;
                let health = remote.health()?;
                log::info!("scorer at {url} is {} ({:?})", health.status, health.model);
                match &g.record_scores {
                    Some(p) => Arc::new(RecordingBackend::new(remote, p)?),
                    None => Arc::new(remote),
                }
            }
        })
    }

    fn schemas(&self, path: &Path) -> Result<Vec<SchemaDocument>> {
        Ok(load_schemas(path, self.strictness)?)
    }

    fn dialogues(&self, dir: &Path) -> Result<Vec<Dialogue>> {
        Ok(load_dialogues(dir, self.strictness)?)
    }

    /// Writes the normalized dump when `--dump-normalized` is set.
    fn dump(&self, schemas: &[SchemaDocument], dialogues: &[Dialogue]) -> Result<()> {
        if let Some(p) = &self.global.dump_normalized {
            let f = File::create(p).map_err(|e| io_error(p, e))?;
            dump_normalized(BufWriter::new(f), schemas, dialogues).map_err(|e| io_error(p, e))?;
        }
        Ok(())
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))?;
    Ok(())
}

/// `v1`, `v2`, ... under `dir`, each holding `schema.json` directly or under `test/`.
fn load_variant_dir(env: &Env, dir: &Path) -> Result<Vec<Vec<SchemaDocument>>> {
    let mut out = Vec::new();
    for i in 1.. {
        let base = dir.join(format!("v{i}"));
        let Some(path) = [base.join("schema.json"), base.join("test/schema.json")].into_iter().find(|p| p.is_file())
        else {
            break;
        };
        out.push(env.schemas(&path)?);
    }
    if out.is_empty() {
        return Err(Error::Argument(format!("no v1/schema.json under {}", dir.display())).into());
    }
    Ok(out)
}

fn default_schema(dialogues: &Path, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| dialogues.join("schema.json"))
}

pub fn run(cli: Cli) -> Result<()> {
    let env = Env::new(cli.global)?;
    match cli.command {
        Command::Filter { pools, kept, audit } => filter(&env, &pools, &kept, &audit),
        Command::Rank {
            pools,
            schemas,
            out,
            k,
            no_echo_fallback,
        } => rank(env, &pools, &schemas, &out, k, no_echo_fallback),
        Command::Prompts {
            dialogues,
            schemas,
            variants,
            format,
            multiplier,
            per_turn,
            max_tokens,
            shuffle,
            tsv,
            out,
        } => {
            let schemas = default_schema(&dialogues, schemas);
            let options = PromptOptions {
                grouping: if per_turn { D3stGrouping::PerTurn } else { D3stGrouping::PerFrame },
                variant: "orig".into(),
                truncator: max_tokens.map(|n| Arc::new(WhitespaceTruncator { max_tokens: n }) as _),
            };
            prompts(&env, &dialogues, &schemas, variants.as_deref(), format, multiplier, options, shuffle, tsv, &out)
        }
        Command::Eval {
            predictions,
            dialogues,
            schemas,
            train_schemas,
            corpus_cv,
            out,
        } => {
            let schemas = default_schema(&dialogues, schemas);
            let mode = if corpus_cv { SensitivityMode::Corpus } else { SensitivityMode::PerTurn };
            eval(&env, &predictions, &dialogues, &schemas, train_schemas.as_deref(), mode, out.as_deref())
        }
        Command::Eda {
            schemas,
            m,
            synonyms,
            out,
        } => eda(&env, &schemas, m, synonyms.as_deref(), &out),
        Command::Table {
            base,
            variants,
            entailment,
            json,
        } => table(&env, &base, &variants, entailment, json.as_deref()),
        Command::Stats {
            dialogues,
            schemas,
            train_schemas,
        } => {
            let schemas = default_schema(&dialogues, schemas);
            stats(&env, &dialogues, &schemas, &train_schemas)
        }
    }
}

fn filter(env: &Env, pools: &Path, kept: &Path, audit: &Path) -> Result<()> {
    let resources = FilterResources::english(env.normalizer.clone());
    let stack = FilterStack::from_specs(&env.config.filters, &resources)?;
    let pools = read_pools(pools)?;
    let mut kept_pools = Vec::with_capacity(pools.len());
    let mut rows = Vec::new();
    for p in &pools {
        let (k, a) = filter_pool(p, &stack);
        kept_pools.push(k);
        rows.extend(a);
    }
    write_pools(kept, &kept_pools)?;
    write_audit(audit, &rows)?;
    let total: usize = pools.iter().map(|p| p.candidates.len()).sum();
    eprintln!("kept {} of {total} candidates in {} pools", total - rows.len(), pools.len());
    Ok(())
}

fn rank(mut env: Env, pools: &Path, schemas: &Path, out: &Path, k: Option<usize>, no_echo: bool) -> Result<()> {
    if let Some(k) = k {
        env.config.k = k;
    }
    if no_echo {
        env.config.echo_fallback = false;
    }
    let base = env.schemas(schemas)?;
    env.dump(&base, &[])?;
    let pools = read_pools(pools)?;
    let ctx = RankContext::from_config(&env.config, env.normalizer.clone(), env.scorer()?)?;
    let vs = assemble_variants(&base, &pools, &ctx, &env.normalizer)?;
    emit_variants(&vs, out, env.config.seed, &env.config.profile)?;
    let fallbacks = vs.rows.iter().filter(|r| r.fallback).count();
    eprintln!(
        "wrote {} variants of {} services to {} ({fallbacks} fallback descriptions)",
        vs.k(),
        base.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn prompts(
    env: &Env,
    dialogues: &Path,
    schemas: &Path,
    variants: Option<&Path>,
    format: PromptFormat,
    multiplier: usize,
    options: PromptOptions,
    shuffle: bool,
    tsv: bool,
    out: &Path,
) -> Result<()> {
    let dialogues = env.dialogues(dialogues)?;
    let base_schemas = env.schemas(schemas)?;
    env.dump(&base_schemas, &dialogues)?;
    let build = |schemas: &[SchemaDocument], options: &PromptOptions| -> Result<Vec<PromptExample>> {
        Ok(match format {
            PromptFormat::D3st => build_d3st(&dialogues, schemas, options)?,
            PromptFormat::T5dst => build_t5dst(&dialogues, schemas, options)?,
        })
    };
    let base = build(&base_schemas, &options)?;
    let variant_schemas = match variants {
        Some(dir) if multiplier > 1 => load_variant_dir(env, dir)?,
        _ => Vec::new(),
    };
    let mut variant_sets = Vec::new();
    for (i, s) in variant_schemas.iter().take(multiplier.saturating_sub(1)).enumerate() {
        let opts = PromptOptions {
            variant: format!("v{}", i + 1),
            ..options.clone()
        };
        variant_sets.push(build(s, &opts)?);
    }
    let seed = shuffle.then_some(env.config.seed);
    let dataset = compose_augmented_dataset(base, &variant_sets, multiplier, seed)?;
    write_examples(out, &dataset, tsv)?;
    eprintln!("wrote {} examples to {}", dataset.len(), out.display());
    Ok(())
}

fn eval(
    env: &Env,
    predictions: &Path,
    dialogues: &Path,
    schemas: &Path,
    train: Option<&Path>,
    mode: SensitivityMode,
    out: Option<&Path>,
) -> Result<()> {
    let dialogues = env.dialogues(dialogues)?;
    let preds = PredictionSet::load(predictions)?;
    let seen = match train {
        Some(t) => {
            let test = env.schemas(schemas)?;
            env.dump(&test, &dialogues)?;
            Some(mark_seen_services(&env.schemas(t)?, &test))
        }
        None => {
            env.dump(&[], &dialogues)?;
            None
        }
    };
    let report = evaluate(&preds, &dialogues, seen.as_ref(), mode)?;
    print!("{}", report.to_text());
    if let Some(p) = out {
        write_json(p, &report)?;
    }
    Ok(())
}

fn eda(env: &Env, schemas: &Path, m: usize, synonyms: Option<&Path>, out: &Path) -> Result<()> {
    let base = env.schemas(schemas)?;
    env.dump(&base, &[])?;
    let lexicon = match synonyms {
        Some(p) => load_synonyms(p)?,
        None => english_synonyms(),
    };
    let mut cfg = EdaConfig::new(Arc::new(lexicon));
    let e = &env.config.eda;
    cfg.p_sr = e.p_sr.unwrap_or(cfg.p_sr);
    cfg.p_ri = e.p_ri.unwrap_or(cfg.p_ri);
    cfg.p_rs = e.p_rs.unwrap_or(cfg.p_rs);
    cfg.p_rd = e.p_rd.unwrap_or(cfg.p_rd);
    cfg.rng_seed = env.config.seed;
    let vs = generate_eda_variants(&base, m, &cfg, &env.normalizer)?;
    emit_variants(&vs, out, env.config.seed, "eda")?;
    eprintln!("wrote {} EDA variants to {}", vs.k(), out.display());
    Ok(())
}

fn table(env: &Env, base: &Path, variants: &Path, entailment: bool, json: Option<&Path>) -> Result<()> {
    let base = env.schemas(base)?;
    let variants = load_variant_dir(env, variants)?;
    env.dump(&base, &[])?;
    let templates = env.config.template_set()?;
    let backend = if entailment {
        match env.scorer() {
            Ok(b) => Some(b),
            Err(e) => {
                log::warn!("entailment column unavailable: {e:#}");
                None
            }
        }
    } else {
        None
    };
    let scorer = backend.as_deref().map(|b| (b, &templates));
    let t = schema_metric_table(&variants, &base, scorer, &env.normalizer, &SchemaTableOptions::default())?;
    print!("{}", t.to_text());
    if let Some(p) = json {
        write_json(p, &t)?;
    }
    Ok(())
}

fn stats(env: &Env, dialogues: &Path, schemas: &Path, train: &Path) -> Result<()> {
    let dialogues = env.dialogues(dialogues)?;
    let test = env.schemas(schemas)?;
    env.dump(&test, &dialogues)?;
    let seen = mark_seen_services(&env.schemas(train)?, &test);
    let n_seen = seen.values().filter(|s| **s).count();
    if seen.is_empty() && !dialogues.is_empty() {
        bail!(Error::Argument("the schema file lists no services".into()));
    }
    println!("dialogues: {}", dialogues.len());
    println!("services: {} ({n_seen} seen)", seen.len());
    println!("dialogues with an unseen service: {:.2}%", 100.0 * unseen_dialogue_fraction(&dialogues, &seen));
    Ok(())
}
