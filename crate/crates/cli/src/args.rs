use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "hdcgan",
    version,
    about = "Train and evaluate SELU + BatchNorm GANs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crop, resize and catalogue a folder of images
    DatasetBuild(DatasetBuildArgs),
    /// Train a generator/discriminator pair
    Train(TrainArgs),
    /// Sample images from a checkpoint
    Generate(GenerateArgs),
    /// Average pairwise MS-SSIM of a folder of images
    EvalMsssim(EvalMsssimArgs),
    /// Fréchet distance between real and generated feature distributions
    EvalFd(EvalFdArgs),
    /// Nearest training images to a query image
    Nn(NnArgs),
    /// Iterate the SELU moment map and print the trajectory
    MomentsDemo(MomentsArgs),
    /// Tidy series, least-squares fits and an SVG plot from a CSV log
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random choice the command makes
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML file with flag values; explicit flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpolationArg {
    Bilinear,
    Nearest,
}

#[derive(Debug, Args)]
pub struct DatasetBuildArgs {
    /// Folder of PNG/PPM/PGM images
    #[arg(long)]
    pub input: PathBuf,
    /// Attribute CSV with a `file` column and optional crop boxes
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Output side length in pixels
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Append a mirrored copy of every image
    #[arg(long)]
    pub mirror: bool,
    #[arg(long, value_enum, default_value_t = InterpolationArg::Bilinear)]
    pub interpolation: InterpolationArg,
    /// Output folder
    #[arg(long, default_value = "dataset")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BsOrderArg {
    SeluThenNorm,
    NormThenSelu,
}

pub fn parse_telescope(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected Z1xZ2, got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&z| z >= 1)
            .ok_or_else(|| format!("bad factor {v:?} in {s:?}"))
    };
    Ok((parse(a)?, parse(b)?))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Folder written by dataset-build; synthetic two-class data if omitted
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Training image side length
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Input enlargement factors
    #[arg(long, value_parser = parse_telescope, default_value = "1x1")]
    pub telescope: (usize, usize),
    /// Latent dimension
    #[arg(long, default_value_t = 100)]
    pub latent: usize,
    /// Base filter count
    #[arg(long, default_value_t = 64)]
    pub filters: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.0002)]
    pub lr: f64,
    /// Total epochs, counting any already in the resumed checkpoint
    #[arg(long, default_value_t = 1)]
    pub epochs: u64,
    /// Stop after this many total steps (0 = no limit)
    #[arg(long, default_value_t = 0)]
    pub max_steps: u64,
    /// Standard deviation of the noise added to inputs
    #[arg(long, default_value_t = 0.1)]
    pub noise_amp: f64,
    #[arg(long)]
    pub no_input_noise: bool,
    #[arg(long)]
    pub no_latent_noise: bool,
    #[arg(long, value_enum, default_value_t = BsOrderArg::SeluThenNorm)]
    pub bs_order: BsOrderArg,
    /// Balance batches over the classes of this attribute
    #[arg(long)]
    pub balance: Option<String>,
    /// Number of synthetic images when no --data is given
    #[arg(long, default_value_t = 512)]
    pub synthetic_count: usize,
    /// Samples in each per-epoch grid
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    /// Also keep a numbered checkpoint every N epochs (0 = off)
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: u64,
    /// Resume from this checkpoint
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output folder
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    /// Grid columns
    #[arg(long, default_value_t = 8)]
    pub columns: usize,
    /// Also write each sample as its own PNG
    #[arg(long)]
    pub individual: bool,
    #[arg(long, default_value = "samples")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalMsssimArgs {
    /// Folder of images to score
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = hdcgan_core::metrics::DEFAULT_PAIRS)]
    pub pairs: usize,
    #[arg(long, default_value_t = hdcgan_core::metrics::DEFAULT_MSSSIM_RESIZE)]
    pub resize: usize,
    /// Include every pair's score in the JSON report
    #[arg(long)]
    pub keep_pairs: bool,
    #[arg(long, default_value = "msssim")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FdModeArg {
    Pooled,
    PerEpochMean,
}

#[derive(Debug, Args)]
pub struct EvalFdArgs {
    /// Folder of real images
    #[arg(long)]
    pub real: Option<PathBuf>,
    /// Folder of generated images; repeat once per epoch
    #[arg(long)]
    pub generated: Vec<PathBuf>,
    #[arg(long, default_value_t = hdcgan_core::metrics::DEFAULT_FD_RESIZE)]
    pub resize: usize,
    /// downsample:SIZE, projection:DIM[:SEED] or file:PATH
    #[arg(long, default_value = "downsample:8")]
    pub extractor: String,
    /// Precomputed real features; skips image loading
    #[arg(long)]
    pub features_file: Option<PathBuf>,
    /// Precomputed generated features; repeat once per epoch
    #[arg(long)]
    pub generated_features: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FdModeArg::Pooled)]
    pub mode: FdModeArg,
    #[arg(long, default_value = "fd")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct NnArgs {
    #[arg(long)]
    pub query: PathBuf,
    /// Folder of candidate images
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = hdcgan_core::metrics::DEFAULT_K)]
    pub k: usize,
    /// Resize everything to this side first (0 = keep sizes)
    #[arg(long, default_value_t = 0)]
    pub resize: usize,
    /// Also write the table to this CSV file
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    /// Starting activation mean
    #[arg(long, default_value_t = 0.5)]
    pub mean: f64,
    /// Starting activation variance
    #[arg(long, default_value_t = 1.5)]
    pub variance: f64,
    /// Mean of the incoming weights times fan-in
    #[arg(long, default_value_t = 0.0)]
    pub omega: f64,
    /// Second moment of the incoming weights times fan-in
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Monte Carlo draws per iteration
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Also write the trajectory to this CSV file
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Loss log or per-epoch metric CSV with a header row
    #[arg(long)]
    pub input: PathBuf,
    /// Column used as the x axis (default: `step` if present, else the first)
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value = "curves")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}
