//! `specfuse`: simulate test problems, fuse data with side information,
//! evaluate reconstructions and sweep regularization parameters.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use specfuse::solvers::Algorithm;

#[derive(Parser, Debug)]
#[command(name = "specfuse", version, about = "Blind image fusion with directional total variation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic problem bundle from an RGB image.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Reconstruct a high-resolution image and blur kernel per channel.
    #[command(args_override_self = true)]
    Fuse(FuseArgs),
    /// Compare reconstructions against ground truth (SSIM, MSE, PSNR).
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Solve and evaluate over a grid of (lambda_u, lambda_k, gamma).
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Disk,
    Gaussian,
    Dirac,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// RGB PNG to draw the ground truth from, or `desk` for the built-in scene.
    #[arg(long, default_value = "desk")]
    pub source: String,
    /// Seed of the built-in scene.
    #[arg(long, default_value_t = 7)]
    pub scene_seed: u64,
    #[arg(long, value_enum, default_value_t = KernelChoice::Disk)]
    pub kernel: KernelChoice,
    /// Disk radius in taps (default: kernel size / 6).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Gaussian standard deviation in taps (default: kernel size / 8).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Offset of the Gaussian from the kernel center (rows, cols).
    #[arg(long, num_args = 2, value_names = ["ROW", "COL"], default_values_t = [5.0, 5.0], allow_negative_numbers = true)]
    pub offset: Vec<f64>,
    /// Translation of the side information in high-resolution pixels.
    #[arg(long, num_args = 2, value_names = ["ROW", "COL"], default_values_t = [0, 0], allow_negative_numbers = true)]
    pub shift: Vec<i64>,
    #[arg(long, default_value_t = 0.001)]
    pub noise_variance: f64,
    /// Odd side length of the square kernel.
    #[arg(long, default_value_t = 41)]
    pub kernel_size: usize,
    #[arg(long, default_value_t = 4)]
    pub sampling: usize,
    /// Data shape (default: 100 x 100 for the built-in scene, otherwise the
    /// largest shape the source image supports).
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"])]
    pub data_size: Option<Vec<usize>>,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the data and side information come from.
#[derive(Args, Debug, Serialize)]
pub struct InputArgs {
    /// Problem bundle written by `simulate`.
    #[arg(long, conflicts_with_all = ["data", "side_info"])]
    pub bundle: Option<PathBuf>,
    /// Low-resolution data, one file per channel.
    #[arg(long, requires = "side_info")]
    pub data: Vec<PathBuf>,
    /// High-resolution side information image.
    #[arg(long)]
    pub side_info: Option<PathBuf>,
    /// Odd kernel side length (default: from the bundle, else 41).
    #[arg(long)]
    pub kernel_size: Option<usize>,
    /// Sampling factor (default: from the bundle, else 4).
    #[arg(long)]
    pub sampling: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value = "palm", value_parser = parse_algorithm)]
    pub algorithm: Algorithm,
    /// Inertia of iPALM; ignored by the other algorithms.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.1)]
    pub theta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.003)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: specfuse::Error| e.to_string())
}

#[derive(Args, Debug, Serialize)]
pub struct FuseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Channel indices to reconstruct (default: all).
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_u: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_k: f64,
    #[arg(long, default_value_t = 0.9995)]
    pub gamma: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    /// Output directory of `fuse`; evaluates every channel in it.
    #[arg(long, conflicts_with = "reconstruction")]
    pub run: Option<PathBuf>,
    /// Reconstruction files, one per channel.
    #[arg(long)]
    pub reconstruction: Vec<PathBuf>,
    /// Solver traces matching `--reconstruction`, for the final objective.
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    /// Ground-truth image; cropped centrally when larger than the reconstruction.
    #[arg(long, conflicts_with = "bundle")]
    pub truth: Option<PathBuf>,
    /// Bundle whose ground truth (in data units) is the reference.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Dynamic range for SSIM and PSNR.
    #[arg(long, default_value_t = 1.0)]
    pub range: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// Problem bundle written by `simulate`; its truth scores every cell.
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub kernel_size: Option<usize>,
    #[arg(long)]
    pub sampling: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub lambda_u: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub lambda_k: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.9995")]
    pub gamma: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
