use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "ctwindow",
    version,
    about = "CT windowing, Random windowing augmentation and evaluation"
)]
pub struct Cli {
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Worker threads for per-case parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-case and pooled window statistics and derived sampling ranges.
    Stats(StatsArgs),
    /// Static windowing of HU volumes.
    Window(WindowArgs),
    /// Augmented samples of HU volumes.
    Augment(AugmentArgs),
    /// Segmentation metrics with difficulty-subset breakdown.
    Evaluate(EvaluateArgs),
    /// Difficulty flags per case.
    Classify(ClassifyArgs),
    /// Clipping-artifact reports for a volume pair or a simulated method.
    ArtifactCheck(ArtifactArgs),
    /// Intensity histograms before and after a transform.
    Histogram(HistogramArgs),
    /// Synthetic abdominal phantoms.
    Phantom(PhantomArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    MinMaxSampledWindow,
    FixedBaseAffine,
    ZScoreGlobal,
}

/// Overrides for the fields of an augmentation spec.
#[derive(Debug, Clone, Default, Args)]
pub struct SpecFlags {
    /// JSON spec document.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub base_width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub base_level: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
    pub level_range: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    pub width_range: Option<Vec<f64>>,
    #[arg(long)]
    pub p_level: Option<f64>,
    #[arg(long)]
    pub p_width: Option<f64>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub zscore_mean: Option<f64>,
    #[arg(long)]
    pub zscore_std: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RandomWindow,
    RwShiftScale,
    Nnunet,
    Unetr,
    /// The `pipeline` key of the `--spec` file.
    Pipeline,
    Contrast,
    BrightnessMult,
    BrightnessAdd,
    Gamma,
    GammaInverse,
}

/// Settings for single-transform methods.
#[derive(Debug, Clone, Default, Args)]
pub struct TransformFlags {
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
    pub param_range: Option<Vec<f64>>,
    /// Gate probability (default 1).
    #[arg(long)]
    pub probability: Option<f64>,
    /// Clip contrast output to the input's range.
    #[arg(long)]
    pub preserve_range: bool,
    /// Clip brightness output to [0, 1].
    #[arg(long)]
    pub clip_to_unit: bool,
    /// Anchor contrast at the window center instead of the image mean.
    #[arg(long)]
    pub center_anchor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F32,
    I16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelArg {
    Liver,
    Tumor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConnectivityArg {
    #[value(name = "6")]
    Six,
    #[value(name = "18")]
    Eighteen,
    #[value(name = "26")]
    TwentySix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum F1ModeArg {
    Detection,
    Harmonic,
}

/// Thresholds for the difficulty flags.
#[derive(Debug, Clone, Args)]
pub struct ThresholdFlags {
    /// Low-contrast cut on |mean tumor - mean liver| HU.
    #[arg(long, default_value_t = 20.0)]
    pub tissue_difference: f64,
    /// Median liver HU below which timing is poor.
    #[arg(long, default_value_t = 89.0)]
    pub ce_low: f64,
    /// Median liver HU above which timing is poor.
    #[arg(long, default_value_t = 137.0)]
    pub ce_high: f64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Directory of `<id>.ctv` HU volumes.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of `<id>_mask.ctv` masks (defaults to the image directory).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-case (W, L) table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LabelArg::Tumor)]
    pub label: LabelArg,
    #[arg(long, default_value_t = 0.99)]
    pub coverage: f64,
    /// Tail fraction trimmed from per-case levels and widths.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Base window the derived ranges must contain.
    #[arg(long, requires = "base_level")]
    pub base_width: Option<f64>,
    #[arg(long, requires = "base_width", allow_negative_numbers = true)]
    pub base_level: Option<f64>,
    #[command(flatten)]
    pub thresholds: ThresholdFlags,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// HU volumes.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub level: Option<f64>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub zscore_mean: Option<f64>,
    #[arg(long)]
    pub zscore_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// HU volumes.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Samples per input.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[command(flatten)]
    pub spec: SpecFlags,
    #[command(flatten)]
    pub transform: TransformFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth masks.
    #[arg(long)]
    pub gt: PathBuf,
    /// HU volumes for difficulty flags.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Predictions of a comparison method, for a paired significance test.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0.10)]
    pub overlap: f64,
    #[arg(long, value_enum, default_value_t = ConnectivityArg::TwentySix)]
    pub connectivity: ConnectivityArg,
    #[arg(long, value_enum, default_value_t = F1ModeArg::Detection)]
    pub f1_mode: F1ModeArg,
    #[command(flatten)]
    pub thresholds: ThresholdFlags,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also flag this fraction of cases in each median-HU tail.
    #[arg(long)]
    pub percentile: Option<f64>,
    #[command(flatten)]
    pub thresholds: ThresholdFlags,
}

#[derive(Debug, Args)]
pub struct ArtifactArgs {
    /// Clipped volume (pair mode).
    #[arg(long, requires = "after", conflicts_with_all = ["input", "method"])]
    pub before: Option<PathBuf>,
    /// Transformed volume (pair mode).
    #[arg(long, requires = "before")]
    pub after: Option<PathBuf>,
    /// HU volume (simulation mode).
    #[arg(long, requires = "method")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, requires = "input")]
    pub method: Option<Method>,
    /// Simulated draws.
    #[arg(long, default_value_t = 200)]
    pub draws: usize,
    #[arg(long, default_value_t = ctwindow_core::artifact::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub spec: SpecFlags,
    #[command(flatten)]
    pub transform: TransformFlags,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub range: Option<Vec<f64>>,
    /// Compare the base-window clip with this transform.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub spec: SpecFlags,
    #[command(flatten)]
    pub transform: TransformFlags,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// JSON phantom spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "phantom")]
    pub name: String,
    /// Cases to write; case `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = DtypeArg::F32)]
    pub dtype: DtypeArg,
    #[arg(long, num_args = 3, value_names = ["Z", "Y", "X"])]
    pub shape: Option<Vec<usize>>,
    #[arg(long, num_args = 3, value_names = ["Z", "Y", "X"])]
    pub spacing: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub body_hu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub liver_hu: Option<f64>,
    /// One tumor per occurrence.
    #[arg(long, allow_negative_numbers = true)]
    pub tumor_offset: Vec<f64>,
    #[arg(long)]
    pub tumor_radius: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub bone_hu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub air_hu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ce_offset: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs;
    match cli.command {
        Command::Stats(a) => commands::stats::stats(a, jobs),
        Command::Window(a) => commands::transform::window(a, jobs),
        Command::Augment(a) => commands::transform::augment(a, jobs),
        Command::Evaluate(a) => commands::evaluate::evaluate(a, jobs),
        Command::Classify(a) => commands::stats::classify(a, jobs),
        Command::ArtifactCheck(a) => commands::analysis::artifact_check(a),
        Command::Histogram(a) => commands::analysis::histogram(a),
        Command::Phantom(a) => commands::phantom::phantom(a),
    }
}
