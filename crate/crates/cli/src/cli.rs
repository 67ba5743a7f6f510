//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use yearsense::{Condition, PairMode, YearRange};

#[derive(Debug, Parser)]
#[command(name = "yearsense", version, about = "Year-similarity experiments, analyses and figures")]
pub struct Cli {
    /// TOML file with defaults for any long flag (flags win).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect a pairwise similarity matrix from a chat endpoint.
    Collect(CollectArgs),
    /// Regress a distance matrix on each theoretical metric.
    FitMetrics(FitMetricsArgs),
    /// Locate the reference year with a sliding diagonal window.
    EstimateReference(EstimateReferenceArgs),
    /// Screen activation dumps for temporal neurons.
    #[command(subcommand)]
    Neurons(NeuronsCommand),
    /// Linear probes over hidden-state dumps.
    #[command(subcommand)]
    Probes(ProbesCommand),
    /// Year embeddings: collection and structure.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Generate synthetic matrices and dumps with known ground truth.
    Synth(SynthArgs),
    /// Check dump files (magic, version, metadata, per-layer checksums).
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutArg {
    /// Output directory (created if needed; inputs are never written).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    /// Heatmap palette: blues or gray.
    #[arg(long)]
    pub palette: Option<String>,
    /// Heatmap block size in years (1 = one cell per pair).
    #[arg(long)]
    pub downsample: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CollectArgs {
    #[command(flatten)]
    pub out: OutArg,
    #[command(flatten)]
    pub figure: FigureArgs,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// year or number.
    #[arg(long)]
    pub condition: Option<Condition>,
    /// Year range START:END (inclusive).
    #[arg(long)]
    pub range: Option<YearRange>,
    /// full or upper.
    #[arg(long)]
    pub pairs: Option<PairMode>,
    /// Prompt template with {A}, {B} and optionally {kind}.
    #[arg(long)]
    pub template: Option<String>,
    /// Concurrent requests.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Retries per pair before the cell is recorded missing.
    #[arg(long)]
    pub retries: Option<u32>,
    /// Response cache (JSONL), shared across runs.
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    /// Continue the checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many pairs in this invocation.
    #[arg(long)]
    pub max_requests: Option<usize>,
    /// Offline judge answering exp(-d_ref) for this reference year.
    #[arg(long, value_name = "YEAR")]
    pub mock_reference: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    Similarity,
    Distance,
}

#[derive(Debug, Clone, Args)]
pub struct FitMetricsArgs {
    #[command(flatten)]
    pub out: OutArg,
    /// Matrix file (CSV or similarity dump); repeat for several models.
    #[arg(long = "matrix", required = true, value_name = "FILE")]
    pub matrices: Vec<PathBuf>,
    /// How to read CSV cells; similarity is converted with D = 1 - S.
    #[arg(long, value_enum, default_value_t = MatrixKind::Similarity)]
    pub kind: MatrixKind,
    /// Metrics: log, lev, ref or all (comma separated).
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub reference: Option<i32>,
    /// full or upper.
    #[arg(long)]
    pub pairs: Option<PairMode>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateReferenceArgs {
    #[command(flatten)]
    pub out: OutArg,
    #[command(flatten)]
    pub figure: FigureArgs,
    /// Similarity matrix (CSV or dump).
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    /// Odd window size in years.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct NeuronInputs {
    #[command(flatten)]
    pub out: OutArg,
    /// Activation dump for the temporal condition.
    #[arg(long, value_name = "FILE")]
    pub temporal: PathBuf,
    /// Activation dump for the numerical condition.
    #[arg(long, value_name = "FILE")]
    pub numerical: PathBuf,
    /// Gates as d=2.0,p=1e-4,c=0.95,k=1000 (any subset).
    #[arg(long)]
    pub criteria: Option<String>,
    /// Number of top neurons kept (overrides k in --criteria).
    #[arg(long)]
    pub topk: Option<usize>,
    /// Expected hook point; the dumps' recorded hook must match.
    #[arg(long)]
    pub hook: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum NeuronsCommand {
    /// Per-neuron statistics and the gated selection.
    Identify(NeuronInputs),
    /// Mean temporal activation of the top-k neurons across years.
    Curve(NeuronInputs),
    /// Per-layer log-distance fits, past and future separately.
    Logfit {
        #[command(flatten)]
        inputs: NeuronInputs,
        #[arg(long)]
        reference: Option<i32>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProbesCommand {
    /// Train and score a probe per layer and metric.
    Sweep(ProbeSweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProbeSweepArgs {
    #[command(flatten)]
    pub out: OutArg,
    /// Hidden-state dump.
    #[arg(long, value_name = "FILE")]
    pub dump: PathBuf,
    /// Metrics: log, lev, ref or all.
    #[arg(long)]
    pub metric: Option<String>,
    /// auto, auto:N, or a comma list of layer ids.
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub reference: Option<i32>,
    /// Seed for the train/test split and minibatch order.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum EmbedCommand {
    /// Embed every year of a range through an embedding endpoint.
    Collect(EmbedCollectArgs),
    /// Cosine structure, metric regression and MDS of an embedding dump.
    Analyze(EmbedAnalyzeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EmbedCollectArgs {
    #[command(flatten)]
    pub out: OutArg,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub range: Option<YearRange>,
    /// Stimulus template with {prefix}, {digits} (hyphenated) or {year}.
    #[arg(long)]
    pub stimulus_template: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub retries: Option<u32>,
    /// Offline embedder (cos, sin of the log distance to this year).
    #[arg(long, value_name = "YEAR")]
    pub mock_reference: Option<i32>,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedAnalyzeArgs {
    #[command(flatten)]
    pub out: OutArg,
    #[command(flatten)]
    pub figure: FigureArgs,
    /// Embedding dump.
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub reference: Option<i32>,
    #[arg(long)]
    pub pairs: Option<PairMode>,
    /// Skip the MDS layout.
    #[arg(long)]
    pub no_mds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// S = exp(-lambda d_ref) + noise, as CSV and dump.
    ReferenceSimilarity,
    /// D linear in one metric plus noise, as CSV.
    MetricDistance,
    /// Activation dumps with planted temporal neurons.
    PlantedNeurons,
    /// Activation dumps whose coded neurons follow a log law.
    LogCoding,
    /// Hidden-state dump moving from d_log to d_ref with depth.
    HierarchicalCode,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub out: OutArg,
    #[command(flatten)]
    pub figure: FigureArgs,
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub range: Option<YearRange>,
    #[arg(long)]
    pub reference: Option<i32>,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Generating metric for metric-distance.
    #[arg(long)]
    pub metric: Option<String>,
    /// Neurons per layer.
    #[arg(long, default_value_t = 1000)]
    pub neurons: usize,
    /// Planted neurons in total.
    #[arg(long, default_value_t = 20)]
    pub planted: usize,
    /// Target Cohen's d of planted neurons.
    #[arg(long, default_value_t = 3.0)]
    pub effect: f64,
    #[arg(long, default_value_t = 0.99)]
    pub consistency: f64,
    #[arg(long)]
    pub n_layers: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// 1 keeps the log law on the future side, 0 scrambles it.
    #[arg(long, default_value_t = 1.0)]
    pub future_fidelity: f64,
    /// Hidden-state width.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Pairs sampled into the hidden-state dump.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Store hidden states as float16.
    #[arg(long)]
    pub float16: bool,
    /// Hook point recorded in activation dumps.
    #[arg(long)]
    pub hook: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Optional output directory for a manifest.
    #[command(flatten)]
    pub out: OutArg,
    /// Dump files to check.
    #[arg(required = true, value_name = "FILE")]
    pub dumps: Vec<PathBuf>,
}
