use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use layerlens::attention::{HeadReduction, LayerSelection};
use layerlens::shap::{ExplainedOutput, LayerTarget};

#[derive(Debug, Parser)]
#[command(
    name = "layerlens",
    version,
    about = "Layer-wise phrase-level Shapley explanations for a sentiment transformer"
)]
pub struct Cli {
    /// Worker threads for coalition evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phrase-level Shapley values per layer target, plus their aggregate.
    Explain(ExplainArgs),
    /// Token-level Shapley values at the input.
    Baseline(BaselineArgs),
    /// Phrase-to-phrase attention heatmap.
    Attention(AttentionArgs),
    /// Train the classifier on a labeled corpus and write a weight document.
    Train(TrainArgs),
    /// Run the three bundled demo sentences and write every figure.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Exact,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Report,
    Svg,
    Html,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayersArg {
    Last,
    MeanAll,
}

impl From<LayersArg> for LayerSelection {
    fn from(l: LayersArg) -> Self {
        match l {
            LayersArg::Last => LayerSelection::Last,
            LayersArg::MeanAll => LayerSelection::MeanAll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadsArg {
    Mean,
    Max,
}

impl From<HeadsArg> for HeadReduction {
    fn from(h: HeadsArg) -> Self {
        match h {
            HeadsArg::Mean => HeadReduction::Mean,
            HeadsArg::Max => HeadReduction::Max,
        }
    }
}

fn parse_target(s: &str) -> Result<LayerTarget, String> {
    s.parse().map_err(|e: layerlens::Error| e.to_string())
}

fn parse_output(s: &str) -> Result<ExplainedOutput, String> {
    s.parse().map_err(|e: layerlens::Error| e.to_string())
}

/// Where the model and its vocabulary come from; bundled assets by default.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Vocabulary file, one token per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Weight document.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// POS lexicon, `word TAG` per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Sentence to process.
    #[arg(conflicts_with = "input", required_unless_present_any = ["input", "phrases"])]
    pub sentence: Option<String>,
    /// File with one sentence per line; `#` lines are ignored.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Phrase document (JSON) replacing the built-in chunker; single sentence only.
    #[arg(long, conflicts_with = "input")]
    pub phrases: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShapArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Coalition samples for the kernel estimator.
    #[arg(long, default_value_t = 2048)]
    pub samples: usize,
    #[arg(long, env = "LAYERLENS_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Explained quantity: log-odds or prob.
    #[arg(long, value_parser = parse_output, default_value = "log-odds")]
    pub output: ExplainedOutput,
    /// Largest player count solved by exact enumeration.
    #[arg(long, default_value_t = 12)]
    pub exact_threshold: usize,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub shap: ShapArgs,
    /// Comma-separated layer targets: input, embedding, encoder-<n>.
    #[arg(long, value_delimiter = ',', value_parser = parse_target)]
    pub layers: Vec<LayerTarget>,
    /// Skip the per-phrase word sub-games.
    #[arg(long)]
    pub no_word_level: bool,
    /// Also compute the token-level baseline.
    #[arg(long)]
    pub with_baseline: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Report, Format::Svg, Format::Html])]
    pub formats: Vec<Format>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub shap: ShapArgs,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = LayersArg::Last)]
    pub layers: LayersArg,
    #[arg(long, value_enum, default_value_t = HeadsArg::Mean)]
    pub heads: HeadsArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled corpus, `pos|neg<TAB>sentence` per line (default: bundled).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Destination weight document.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "LAYERLENS_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value = "demo-output")]
    pub out: PathBuf,
    #[arg(long, env = "LAYERLENS_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 2048)]
    pub samples: usize,
}
