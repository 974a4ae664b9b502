//! `train`: toy-scale training on synthetic patch sets or manifest images.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use esrpcb_core::dataset::DatasetManifest;
use esrpcb_core::image::load_image;
use esrpcb_core::nn::{save_weights, Network, NetworkConfig};
use esrpcb_core::train::{
    patch_pairs_from_images, prepare_inputs, synthetic_patch_pairs, train_on_pairs, TrainerConfig,
    TrainerPreset, TrainingRun,
};

use crate::commands::EdgeModeArg;
use crate::config::PipelineConfig;
use crate::util::atomic_write_json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PresetArg {
    Toy,
    Paper,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Trainer preset providing patch size, batch size, steps and schedule.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Train on a generated synthetic set with this many patches.
    #[arg(long, value_name = "COUNT", conflicts_with = "manifest")]
    synthetic: Option<usize>,
    /// Manifest of HR training images.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Root directory for image paths in the manifest (defaults to the
    /// manifest's directory, then an images/ sibling).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Patches sampled per manifest image.
    #[arg(long, default_value_t = 4)]
    per_image: usize,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    /// LR patch size in pixels.
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long, value_enum)]
    edge_mode: Option<EdgeModeArg>,
    /// Output weights file.
    #[arg(short, long)]
    out: PathBuf,
    /// Optional JSON training report (embeds the resolved config).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    config: &'a PipelineConfig,
    network: &'a NetworkConfig,
    trainer: &'a TrainerConfig,
    seed: u64,
    examples: usize,
    run: &'a TrainingRun,
}

pub fn run_train(args: TrainArgs, config: &PipelineConfig, seed: u64) -> Result<()> {
    let mut trainer = match args.preset {
        Some(PresetArg::Toy) => TrainerConfig::preset(TrainerPreset::Toy),
        Some(PresetArg::Paper) => TrainerConfig::preset(TrainerPreset::Paper),
        None => config.trainer,
    };
    if let Some(v) = args.steps {
        trainer.steps = v;
    }
    if let Some(v) = args.batch {
        trainer.batch_size = v;
    }
    if let Some(v) = args.patch {
        trainer.patch_size = v;
    }
    if let Some(v) = args.lr {
        trainer.lr = v;
    }
    trainer.seed = seed;

    let mut net_cfg = config.network_config();
    if let Some(v) = args.blocks {
        net_cfg.n_blocks = v;
    }
    if let Some(v) = args.filters {
        net_cfg.filters = v;
    }
    if let Some(v) = args.edge_mode {
        net_cfg.edge_mode = v.into();
    }

    let pairs = if let Some(count) = args.synthetic {
        synthetic_patch_pairs(count, trainer.patch_size, seed)?
    } else if let Some(manifest_path) = &args.manifest {
        let manifest = DatasetManifest::load(manifest_path)?;
        let roots = [
            args.images.clone(),
            manifest_path.parent().map(|p| p.to_path_buf()),
            manifest_path.parent().map(|p| p.join("images")),
        ];
        let mut images = Vec::new();
        for entry in &manifest.images {
            let path = roots
                .iter()
                .flatten()
                .map(|root| root.join(&entry.path))
                .find(|p| p.is_file())
                .with_context(|| format!("image {} not found", entry.path))?;
            images.push((entry.source_id(), load_image(&path)?));
        }
        patch_pairs_from_images(&images, trainer.patch_size, args.per_image, seed)?
    } else {
        bail!("either --synthetic COUNT or --manifest FILE is required");
    };
    let examples = prepare_inputs(&pairs, net_cfg.edge_mode, &config.canny)?;

    let mut net = Network::build_seeded(net_cfg, seed)?;
    let run = train_on_pairs(&mut net, &examples, &trainer)?;
    save_weights(&net, &args.out)?;

    println!(
        "trained {} steps on {} examples: loss {:.6} -> {:.6}; weights -> {}",
        run.steps,
        examples.len(),
        run.initial_loss,
        run.final_loss,
        args.out.display()
    );
    if let Some(report_path) = &args.report {
        atomic_write_json(
            report_path,
            &TrainReport {
                config,
                network: &net_cfg,
                trainer: &trainer,
                seed,
                examples: examples.len(),
                run: &run,
            },
        )?;
    }
    Ok(())
}
