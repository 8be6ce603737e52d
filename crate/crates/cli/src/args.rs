use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "keepaug", version, about = "Saliency-guided image augmentation")]
pub struct Cli {
    /// Report errors on stderr as single-line JSON.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a two-class synthetic dataset (bright 4x4 patch marks class 1).
    MakeSynthetic(MakeSyntheticArgs),
    /// Train the toy classifier and write a model directory.
    TrainToy(TrainArgs),
    /// Augment a dataset and write the result with a run manifest.
    Augment(AugmentArgs),
    /// Compute a saliency map for one image.
    Saliency(SaliencyArgs),
    /// Write a PPM grid: original | saliency | augmented, one row per example.
    Preview(PreviewArgs),
    /// Oracle fidelity of an augmentation across magnitudes.
    Fidelity(FidelityArgs),
    /// Time saliency strategies.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct MakeSyntheticArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory or CIFAR-10 binary file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 8)]
    pub hidden: usize,
    /// Add the auxiliary head after the first block.
    #[arg(long)]
    pub early_head: bool,
    /// Weight of the auxiliary loss.
    #[arg(long, default_value_t = keepaugment::train::DEFAULT_AUX_COEFFICIENT)]
    pub aux_coef: f64,
    /// Train on bicubic copies reduced by this factor (2 gives a low-res saliency net).
    #[arg(long, default_value_t = 1)]
    pub downscale: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model used to compute saliency (the reduced-resolution model for low-res).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory of precomputed single-channel maps named like the dataset records.
    #[arg(long)]
    pub saliency_dir: Option<PathBuf>,
    /// JSON config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "KEEPAUG_THREADS")]
    pub parallelism: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// PPM or raw tensor image.
    #[arg(long)]
    pub image: PathBuf,
    /// full, low-res, low-res:N, early-head or max-logit.
    #[arg(long, default_value = "full")]
    pub strategy: String,
    /// Class whose logit is differentiated; defaults to the predicted class.
    #[arg(long)]
    pub label: Option<usize>,
    /// Output raw tensor (one channel).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a min-max normalised gray PPM.
    #[arg(long)]
    pub viz: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub saliency_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    /// Oracle model directory.
    #[arg(long)]
    pub oracle: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "plain-cutout")]
    pub mode: String,
    /// Comma-separated ascending list: region side for cut modes, policy magnitude otherwise.
    #[arg(long, default_value = "4,8,12")]
    pub magnitudes: String,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base config for the remaining settings (tau, policy, saliency).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the report as JSON instead of a table.
    #[arg(long = "report-json")]
    pub report_json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Reduced-resolution model for low-res; a fresh one is timed when omitted.
    #[arg(long)]
    pub lowres_model: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated strategy names.
    #[arg(long, default_value = "full,low-res,early-head")]
    pub strategies: String,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Use at most this many images.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long = "report-json")]
    pub report_json: bool,
}
