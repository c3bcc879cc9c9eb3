//! The `act` command line: one subcommand per pipeline stage or analysis.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::AnalysisError;
use crate::corpus::CorpusError;
use crate::embedding::EmbeddingError;
use crate::pipeline::PipelineError;
use crate::providers::{ProviderError, TemplateName};
use crate::retrieval::{ReportFormat, RetrievalError};
use crate::shift::{ShiftError, StatsMode};

/// Printed by `--version`; kept in step with the format constants by a test.
pub const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (formats: ACTE v1, ACTS v1, report v1)");

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ShiftError> for CliError {
    fn from(e: ShiftError) -> Self {
        match e {
            ShiftError::InvariantViolation(_) => Self::internal(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::InvalidConfig(_) => Self::input(e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(e) => e.into(),
            PipelineError::Embedding(e) => e.into(),
            PipelineError::Shift(e) => e.into(),
            PipelineError::Provider(e) => e.into(),
            PipelineError::PairCountTooSmall(_)
            | PipelineError::EncoderMismatch { .. }
            | PipelineError::Parse { .. } => Self::input(e.to_string()),
            PipelineError::Io { .. } => Self::input(e.to_string()),
            PipelineError::AllItemsFailed { .. } | PipelineError::CountMismatch { .. } => Self::internal(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "act", version = LONG_VERSION, about = "Abstract-to-concrete query translation for text-to-image retrieval")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML or JSON config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use the deterministic synthetic text embedder
    #[arg(long, global = true)]
    pub synthetic: bool,
    /// Seed of the synthetic embedder
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dimension of the synthetic embedder
    #[arg(long, global = true)]
    pub synthetic_dim: Option<usize>,
    #[arg(long, global = true)]
    pub embed_url: Option<String>,
    #[arg(long, global = true)]
    pub caption_url: Option<String>,
    #[arg(long, global = true)]
    pub generate_url: Option<String>,
    /// Value of the Authorization header sent to every provider
    #[arg(long, global = true)]
    pub auth: Option<String>,
    /// Directory for cached captions and rewrites
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus analyses over abstract descriptions
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Caption the first image of every item into an A-C database
    Caption(CaptionArgs),
    /// Fit the abstract-to-concrete shift
    FitShift(FitShiftArgs),
    /// Rewrite queries with the LLM provider
    Rephrase(RephraseArgs),
    /// Embed queries and shift them towards the concrete side
    ApplyShift(ApplyShiftArgs),
    /// Exact top-K retrieval against an image gallery
    Retrieve(RetrieveArgs),
    /// R@K and H@K over a query set
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Adjective frequency per concreteness category
    Stats(AnalyzeArgs),
    /// Histogram of the max |MCC| of abstract attributes against concrete ones
    Mcc {
        #[command(flatten)]
        common: AnalyzeArgs,
        /// Attributes kept per category
        #[arg(long, default_value_t = crate::analysis::DEFAULT_TOP_PER_CATEGORY)]
        top: usize,
        /// Also write the per-attribute table here
        #[arg(long)]
        phi_out: Option<PathBuf>,
    },
    /// Oracle retrieval precision grouped by attribute count and mixture
    Oracle {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long, default_value_t = crate::analysis::DEFAULT_TOP_PER_CATEGORY)]
        top: usize,
        #[arg(long, default_value_t = crate::analysis::DEFAULT_MAX_ATTRS)]
        max_attrs: usize,
    },
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// TSV of word and concreteness rating
    #[arg(long)]
    pub lexicon: PathBuf,
    /// TSV of word and forced category
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long, default_value_t = crate::analysis::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Adjective list for the heuristic tagger, one word per line
    #[arg(long, conflicts_with = "tagged")]
    pub adjectives: Option<PathBuf>,
    /// Pre-tagged descriptions (JSONL) instead of the heuristic tagger
    #[arg(long)]
    pub tagged: Option<PathBuf>,
    /// JSON overrides of the POS and relation label mapping
    #[arg(long, requires = "tagged")]
    pub label_map: Option<PathBuf>,
    /// Output CSV, `-` for stdout
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CaptionArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long, env = "SOURCE_DATE_EPOCH")]
    pub created_at: Option<u64>,
    /// Output A-C database JSONL, `-` for stdout
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitShiftArgs {
    /// A-C database; both sides are embedded with the configured embedder
    #[arg(long, conflicts_with_all = ["embeddings", "abstract_path", "concrete"])]
    pub pairs: Option<PathBuf>,
    /// One embedding JSONL holding both sides
    #[arg(long, conflicts_with_all = ["abstract_path", "concrete"])]
    pub embeddings: Option<PathBuf>,
    #[arg(long = "abstract", requires = "concrete")]
    pub abstract_path: Option<PathBuf>,
    #[arg(long, requires = "abstract_path")]
    pub concrete: Option<PathBuf>,
    /// Kind used as the concrete side of precomputed embeddings
    #[arg(long, default_value = "concrete", value_parser = ["concrete", "image"])]
    pub concrete_kind: String,
    /// Dataset mapping item ids to images; required with `--concrete-kind image`
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Source name stamped into the file
    #[arg(long)]
    pub source: Option<String>,
    /// Encoder identity stamped into the file for precomputed embeddings
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long, env = "SOURCE_DATE_EPOCH")]
    pub created_at: Option<u64>,
    /// Output ACTS file, `-` for stdout
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RephraseArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value = "pr")]
    pub template: TemplateName,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Output query JSONL, `-` for stdout
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ApplyShiftArgs {
    /// ACTS file; required unless `--no-shift`
    #[arg(long, required_unless_present = "no_shift")]
    pub shift: Option<PathBuf>,
    /// Precomputed query embeddings
    #[arg(long, required_unless_present = "queries", conflicts_with = "queries")]
    pub query_embeddings: Option<PathBuf>,
    /// Query texts, embedded with the configured embedder
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Rewrite query texts first, with the given template (default `pr`)
    #[arg(long, requires = "queries", num_args = 0..=1, default_missing_value = "pr")]
    pub rewrite: Option<TemplateName>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Skip the shift and write the plain embeddings
    #[arg(long, conflicts_with = "shift")]
    pub no_shift: bool,
    #[arg(long)]
    pub stats_mode: Option<StatsMode>,
    /// `.jsonl` or ACTE binary by extension, `-` for JSONL on stdout
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub query_embeddings: PathBuf,
    /// Image embeddings
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Ranked results JSONL, `-` for stdout
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub query_embeddings: PathBuf,
    /// Query file carrying the relevant image ids
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
    /// Run label copied into the report, `key=value`
    #[arg(long = "label", value_parser = parse_label)]
    pub labels: Vec<(String, String)>,
    /// Report path, `-` for stdout; a `.plot.csv` companion is written next to files
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_label(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("label `{s}` is not key=value"))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.global.verbose);
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
