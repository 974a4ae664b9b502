//! `esrpcb` — batch front end for the edge-guided super-resolution
//! pipeline: edge extraction, LR synthesis, dataset cropping, toy-scale
//! training, SR inference, detection fusion and evaluation.
//!
//! Exit codes: 0 success, 1 validation/runtime error, 2 usage error.

mod commands;
mod config;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "esrpcb",
    version,
    about = "Edge-guided PCB super-resolution, detection fusion and evaluation"
)]
struct Cli {
    /// JSON pipeline configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// RNG seed; overrides the config file and the ESRPCB_SEED variable.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for batch fan-out (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract Canny or Sobel edge maps from images.
    Edges(commands::EdgesArgs),
    /// Synthesize ×¼ low-resolution inputs by bicubic downscaling.
    Degrade(commands::DegradeArgs),
    /// Parse VOC annotations and run the 600×600 crop augmentation.
    CropDataset(commands::CropDatasetArgs),
    /// Train the super-resolution network at toy scale.
    Train(commands::TrainArgs),
    /// Apply trained weights to low-resolution images.
    Sr(commands::SrArgs),
    /// Peak signal-to-noise ratio between two images.
    Psnr(commands::PsnrArgs),
    /// Structural similarity between two images.
    Ssim(commands::SsimArgs),
    /// Fuse detection files with NMS, Soft-NMS or WBF.
    Fuse(commands::FuseArgs),
    /// Score predictions against ground truth (per-class AP, mAP50, CI).
    Evaluate(commands::EvaluateArgs),
    /// PSNR/SSIM sweep over Canny threshold pairs, per defect type.
    Sweep(commands::SweepArgs),
    /// Print the exact parameter count of a network configuration.
    ParamCount(commands::ParamCountArgs),
    /// Print multiply-accumulate counts at a given input resolution.
    Macs(commands::MacsArgs),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(commands::GradcheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let seed = config.resolve_seed(cli.seed);
    match cli.command {
        Command::Edges(args) => commands::run_edges(args, &config),
        Command::Degrade(args) => commands::run_degrade(args),
        Command::CropDataset(args) => commands::run_crop_dataset(args, seed),
        Command::Train(args) => commands::run_train(args, &config, seed),
        Command::Sr(args) => commands::run_sr(args, &config),
        Command::Psnr(args) => commands::run_psnr(args),
        Command::Ssim(args) => commands::run_ssim(args),
        Command::Fuse(args) => commands::run_fuse(args, &config),
        Command::Evaluate(args) => commands::run_evaluate(args, &config),
        Command::Sweep(args) => commands::run_sweep(args, &config),
        Command::ParamCount(args) => commands::run_param_count(args, &config),
        Command::Macs(args) => commands::run_macs(args, &config),
        Command::Gradcheck(args) => commands::run_gradcheck(args, seed),
    }
}
