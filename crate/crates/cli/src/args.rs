use std::path::PathBuf;
use std::str::FromStr;

use adaptir_core::cutoff::{DEFAULT_LAMBDA, DEFAULT_THETA};
use adaptir_core::reader::DEFAULT_DELTA;
use adaptir_core::retrieval::DEFAULT_HASH_BITS;
use adaptir_core::sweep::DEFAULT_REPLICATES;
use adaptir_core::UnitMode;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "adaptir",
    version,
    about = "Adaptive retrieval cutoffs for retrieve-then-read QA"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sparse index over a corpus file.
    Index(IndexArgs),
    /// Fit an ordinal cutoff model on training queries.
    Train(TrainArgs),
    /// Retrieve ranked candidates for one question or a query file.
    Retrieve(RetrieveArgs),
    /// Evaluate cutoff systems on a single corpus.
    Eval(EvalArgs),
    /// Evaluate cutoff systems over a growing corpus.
    Sweep(SweepArgs),
    /// Write a seeded synthetic benchmark (corpus and query files).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RetrievalArgs {
    #[arg(long, default_value_t = UnitMode::Document)]
    pub mode: UnitMode,
    /// Hash bits of the document-mode feature space.
    #[arg(long, default_value_t = DEFAULT_HASH_BITS)]
    pub bits: u32,
    /// Number of candidates retrieved per query.
    #[arg(long, default_value_t = 20)]
    pub tau: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReaderArgs {
    /// Confidence boost of answer-bearing candidates.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Seed of every random draw in the run.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Reader replicates averaged per query.
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SystemArgs {
    /// Cutoff system: fixed:N, threshold[:THETA] or ordinal:PATH. Repeatable.
    #[arg(long = "cutoff")]
    pub cutoffs: Vec<CutoffSpec>,
    /// Threshold used by a bare `threshold` system.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
    /// Replace the offset stored in ordinal models.
    #[arg(long)]
    pub offset_b: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = UnitMode::Document)]
    pub mode: UnitMode,
    #[arg(long, default_value_t = DEFAULT_HASH_BITS)]
    pub bits: u32,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Training queries.
    #[arg(long)]
    pub queries: PathBuf,
    /// Prebuilt index of the corpus; mode and bits are taken from it.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub offset_b: usize,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    /// Pool training rows over nested corpora of these sizes.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Seed of the distractor order when `--grid` is given.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RetrieveArgs {
    /// Build the index from this corpus when `--index` is absent.
    #[arg(long, required_unless_present = "index")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(
        long,
        required_unless_present = "question",
        conflicts_with = "question"
    )]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub question: Option<String>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[arg(long)]
    pub cutoff: Option<CutoffSpec>,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long)]
    pub offset_b: Option<usize>,
    /// Output JSONL path; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub systems: SystemArgs,
    #[command(flatten)]
    pub reader: ReaderArgs,
    /// CSV path; the summary goes next to it as `<stem>.summary.json`.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Answer-bearing documents and distractors.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Corpus sizes, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub systems: SystemArgs,
    #[command(flatten)]
    pub reader: ReaderArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub queries: usize,
    #[arg(long, default_value_t = 200)]
    pub train_queries: usize,
    #[arg(long, default_value_t = 20_000)]
    pub distractors: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// A cutoff system as named on the command line.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "String")]
pub enum CutoffSpec {
    Fixed(usize),
    Threshold(Option<f64>),
    Ordinal(PathBuf),
}

impl FromStr for CutoffSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("fixed", Some(n)) => n
                .parse()
                .map(CutoffSpec::Fixed)
                .map_err(|_| format!("bad fixed cutoff `{n}`")),
            ("threshold", None) => Ok(CutoffSpec::Threshold(None)),
            ("threshold", Some(t)) => t
                .parse()
                .map(|t| CutoffSpec::Threshold(Some(t)))
                .map_err(|_| format!("bad threshold `{t}`")),
            ("ordinal", Some(p)) if !p.is_empty() => Ok(CutoffSpec::Ordinal(PathBuf::from(p))),
            _ => Err(format!(
                "expected fixed:N, threshold[:THETA] or ordinal:PATH, got `{s}`"
            )),
        }
    }
}

impl From<CutoffSpec> for String {
    fn from(spec: CutoffSpec) -> String {
        match spec {
            CutoffSpec::Fixed(n) => format!("fixed:{n}"),
            CutoffSpec::Threshold(None) => "threshold".into(),
            CutoffSpec::Threshold(Some(t)) => format!("threshold:{t}"),
            CutoffSpec::Ordinal(p) => format!("ordinal:{}", p.display()),
        }
    }
}
