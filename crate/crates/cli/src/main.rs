mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Synthetic schema generation, DST prompt building and robustness evaluation
/// for schema-guided dialogue.
#[derive(Debug, Parser)]
#[command(name = "schemaug", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Pipeline config (TOML). Flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Entailment scorer. Defaults to `remote` when a URL is given, `stub` otherwise.
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerKind>,
    #[arg(long, global = true, env = "SCHEMAUG_SCORER_URL")]
    pub scorer_url: Option<String>,
    /// JSONL score cache read by `--scorer cache`.
    #[arg(long, global = true)]
    pub scorer_cache: Option<PathBuf>,
    /// Append every remote score to this JSONL cache.
    #[arg(long, global = true)]
    pub record_scores: Option<PathBuf>,
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Abort on schema or dialogue invariant violations (default).
    #[arg(long, global = true, conflicts_with = "lenient")]
    pub strict: bool,
    /// Log invariant violations instead of aborting.
    #[arg(long, global = true)]
    pub lenient: bool,
    /// Write a flat JSONL view of every loaded schema and dialogue.
    #[arg(long, global = true)]
    pub dump_normalized: Option<PathBuf>,
    /// Lemma table replacing the bundled one.
    #[arg(long, global = true)]
    pub lemmas: Option<PathBuf>,
    /// Stopword list replacing the bundled one.
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerKind {
    Remote,
    Cache,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptFormat {
    D3st,
    T5dst,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply the filter stack to candidate pools.
    Filter {
        #[arg(long)]
        pools: PathBuf,
        #[arg(long)]
        kept: PathBuf,
        #[arg(long)]
        audit: PathBuf,
    },
    /// Rank filtered pools into k schema variants.
    Rank {
        #[arg(long)]
        pools: PathBuf,
        #[arg(long)]
        schemas: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(short, long)]
        k: Option<usize>,
        /// Fail instead of padding short rankings with the original description.
        #[arg(long)]
        no_echo_fallback: bool,
    },
    /// Build DST training examples, optionally augmented with variants.
    Prompts {
        /// Directory of dialogue files.
        #[arg(long)]
        dialogues: PathBuf,
        /// Defaults to `schema.json` in the dialogue directory.
        #[arg(long)]
        schemas: Option<PathBuf>,
        /// Directory with `v1/`, `v2/`, ... variant schemas.
        #[arg(long)]
        variants: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "d3st")]
        format: PromptFormat,
        /// Dataset size as a multiple of the base set (1 = base only).
        #[arg(long, default_value_t = 1)]
        multiplier: usize,
        /// One D3ST example per user turn instead of per frame.
        #[arg(long)]
        per_turn: bool,
        /// Keep only the last N whitespace tokens of every input.
        #[arg(long)]
        max_tokens: Option<usize>,
        #[arg(long)]
        shuffle: bool,
        #[arg(long)]
        tsv: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold dialogue states.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        dialogues: PathBuf,
        /// Test schemas; defaults to `schema.json` in the dialogue directory.
        #[arg(long)]
        schemas: Option<PathBuf>,
        /// Training schemas, enabling the seen/unseen split.
        #[arg(long)]
        train_schemas: Option<PathBuf>,
        /// Report the coefficient of variation of variant-level JGAs as SS.
        #[arg(long)]
        corpus_cv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate EDA baseline variants.
    Eda {
        #[arg(long)]
        schemas: PathBuf,
        #[arg(short, long, default_value_t = 5)]
        m: usize,
        /// Synonym lexicon (`word<TAB>syn,syn`) replacing the bundled one.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diversity table of variant schemas against a base.
    Table {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        variants: PathBuf,
        /// Include the entailment column (uses the configured scorer).
        #[arg(long)]
        entailment: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Split statistics: dialogue count, seen services, unseen dialogue share.
    Stats {
        #[arg(long)]
        dialogues: PathBuf,
        #[arg(long)]
        schemas: Option<PathBuf>,
        #[arg(long)]
        train_schemas: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
