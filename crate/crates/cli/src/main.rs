//! `mccseg`: synthetic data, training, evaluation and paired comparison of
//! segmentation losses.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure.

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mccseg::data::SplitName;
use mccseg::losses::LossKind;
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Parser)]
#[command(
    name = "mccseg",
    version,
    about = "Segmentation losses lab: MCC, Dice and Jaccard"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic imbalanced dataset as PNG image/mask pairs.
    Synth(SynthFlags),
    /// Train the encoder-decoder on a dataset directory.
    Train(TrainFlags),
    /// Score a checkpoint (or the ground-truth oracle) on one split.
    Eval(EvalFlags),
    /// Paired comparison of two evaluation reports.
    Compare(CompareFlags),
    /// Check analytic loss gradients against finite differences.
    Gradcheck(GradcheckFlags),
}

#[derive(Args, Serialize)]
struct SynthFlags {
    /// Config file (TOML or JSON, or a previous run manifest).
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    /// Side length in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Smallest foreground area fraction.
    #[arg(long)]
    fg_min: Option<f64>,
    /// Largest foreground area fraction.
    #[arg(long)]
    fg_max: Option<f64>,
    /// How much darker the lesion is than the background.
    #[arg(long)]
    contrast: Option<f64>,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct TrainFlags {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Dataset directory of `<name>.png` / `<name>_mask.png` pairs.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// mcc, dice or jaccard.
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Seeds the split, the initialization, batch order and augmentation.
    #[arg(long)]
    seed: Option<u64>,
    /// Random flips and rotations during training.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    augment: Option<bool>,
    /// Loss denominator smoothing.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Nearest-neighbor resample every pair to this square size first.
    #[arg(long)]
    resize: Option<usize>,
}

#[derive(Args, Serialize)]
struct EvalFlags {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Score the ground truth itself instead of a checkpoint.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    oracle: Option<bool>,
    /// train, validation or test.
    #[arg(long)]
    split: Option<SplitName>,
    /// Split seed; defaults to the checkpoint's training seed.
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    resize: Option<usize>,
    /// Model name used in reports; defaults to the checkpoint's directory name.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args, Serialize)]
struct CompareFlags {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// First report (`report.json` or the eval output directory).
    #[arg(long)]
    a: Option<PathBuf>,
    /// Second report.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GradcheckFlags {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Where the results and manifest go.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random instances per loss.
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Finite-difference step.
    #[arg(long)]
    step: Option<f64>,
    /// Largest allowed relative error.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    min_side: Option<usize>,
    #[arg(long)]
    max_side: Option<usize>,
    /// Losses to check, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    losses: Option<Vec<LossKind>>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    let result = match &cli.command {
        Command::Synth(f) => commands::synth(f, &argv),
        Command::Train(f) => commands::train(f, &argv),
        Command::Eval(f) => commands::eval(f, &argv),
        Command::Compare(f) => commands::compare(f, &argv),
        Command::Gradcheck(f) => commands::gradcheck(f, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(inner) | CliError::Runtime(inner)) = &e;
            eprintln!("error: {inner:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
