//! `kws`: featurize, index, train, evaluate and profile keyword-spotting models.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "kws", version, about = "Temporal-convolution keyword spotting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the MFCC matrix of a WAV file (MFC1 format).
    Featurize {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the dataset index as `path,label,split` CSV.
    Split(SplitArgs),
    /// Train a model and keep the best validation checkpoint.
    Train(TrainArgs),
    /// Classify one WAV file.
    Infer {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long)]
        wav: PathBuf,
        /// Fold batch norm into the preceding convolutions first.
        #[arg(long)]
        fold: bool,
    },
    /// Accuracy of a checkpoint on one split.
    Eval(EvalArgs),
    /// Micro-averaged false-alarm / false-reject curve and its area.
    EvalRoc(RocArgs),
    /// Per-layer parameter and FLOP table.
    Profile {
        #[arg(long)]
        model: String,
        /// Write CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-threaded inference latency as JSON.
    Bench(BenchArgs),
}

/// A model name or checkpoint path.
#[derive(Args)]
pub struct ModelSource {
    /// Model name (`tc-resnet8`, `2d-resnet8-pool`, ...) or a checkpoint path.
    #[arg(long, required_unless_present = "checkpoint")]
    model: Option<String>,
    #[arg(long, conflicts_with = "model")]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
pub struct SplitArgs {
    /// Text file with one `word/file.wav` path per line.
    #[arg(long, required_unless_present = "data_root", conflicts_with = "data_root")]
    list: Option<PathBuf>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    val: f64,
    #[arg(long, default_value_t = 10.0)]
    test: f64,
    #[arg(long, default_value_t = 10.0)]
    unknown: f64,
    #[arg(long, default_value_t = 10.0)]
    silence: f64,
    #[arg(long, default_value_t = 59185)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    data_root: PathBuf,
    /// Index CSV from `kws split`; built from `--data-root` when absent.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Flat `key = value` training config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed for initialization, batching and augmentation.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for `best.ckpt` and `metrics.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data_root: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Seed for synthesized silence clips.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write per-sample class probabilities as CSV (input for `eval-roc`).
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RocArgs {
    /// Score CSVs from `kws eval --scores-out`; several are vertically averaged.
    #[arg(long, num_args = 1.., required_unless_present = "checkpoint")]
    scores: Vec<PathBuf>,
    #[arg(long, conflicts_with = "scores", requires = "data_root")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated class names left out of the micro-average, e.g. `silence,unknown`.
    #[arg(long, value_delimiter = ',')]
    exclude_classes: Vec<String>,
    /// Curve CSV (`far,frr`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long, default_value_t = tcresnet::profiler::DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = tcresnet::profiler::DEFAULT_WARMUP)]
    warmup: usize,
    /// Seed for the synthetic input and for freshly built models.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Benchmark with separate batch-norm layers.
    #[arg(long)]
    no_fold: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Featurize { wav, out } => commands::featurize(&wav, out.as_deref()),
        Command::Split(a) => commands::split(&a),
        Command::Train(a) => commands::train(&a),
        Command::Infer { source, wav, fold } => commands::infer(&source, &wav, fold),
        Command::Eval(a) => commands::eval(&a),
        Command::EvalRoc(a) => commands::eval_roc(&a),
        Command::Profile { model, csv, out } => commands::profile(&model, csv, out.as_deref()),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
