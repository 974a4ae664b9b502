//! `fuse`: NMS / Soft-NMS / WBF over detection files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use esrpcb_core::fusion::{
    nms, read_detections_jsonl, soft_nms, wbf, write_detections_jsonl, ConfMode, Detection,
    SoftNmsMode,
};

use crate::config::{FusionConfig, FusionMethod, PipelineConfig};
use crate::util::atomic_write_bytes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ConfModeArg {
    AvgMin,
    AvgT,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SoftModeArg {
    Linear,
    Gaussian,
}

#[derive(Args)]
pub struct FuseArgs {
    /// Fusion algorithm; WBF treats each input file as one model.
    #[arg(long, value_enum)]
    method: Option<FusionMethod>,
    /// IoU threshold (match threshold for WBF, suppression for NMS).
    #[arg(long)]
    iou: Option<f32>,
    /// WBF confidence rescale: min(T,N)/N or T/N.
    #[arg(long, value_enum)]
    conf_mode: Option<ConfModeArg>,
    /// Soft-NMS decay: linear or gaussian.
    #[arg(long, value_enum)]
    soft_mode: Option<SoftModeArg>,
    /// Gaussian soft-NMS sigma.
    #[arg(long)]
    sigma: Option<f32>,
    /// Soft-NMS drop threshold.
    #[arg(long)]
    score_floor: Option<f32>,
    /// Detection files (JSON Lines), one per model.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Fused detections output (JSON Lines).
    #[arg(short, long)]
    out: PathBuf,
}

fn merge(config: &FusionConfig, args: &FuseArgs) -> FusionConfig {
    FusionConfig {
        method: args.method.unwrap_or(config.method),
        iou: args.iou.unwrap_or(config.iou),
        conf_mode: match args.conf_mode {
            Some(ConfModeArg::AvgMin) => ConfMode::AvgMin,
            Some(ConfModeArg::AvgT) => ConfMode::AvgT,
            None => config.conf_mode,
        },
        soft_mode: match args.soft_mode {
            Some(SoftModeArg::Linear) => SoftNmsMode::Linear,
            Some(SoftModeArg::Gaussian) => SoftNmsMode::Gaussian,
            None => config.soft_mode,
        },
        sigma: args.sigma.unwrap_or(config.sigma),
        score_floor: args.score_floor.unwrap_or(config.score_floor),
    }
}

/// Applies a per-list algorithm group-by-group over (image, class).
fn per_group(
    dets: Vec<Detection>,
    apply: impl Fn(&[Detection]) -> esrpcb_core::Result<Vec<Detection>>,
) -> esrpcb_core::Result<Vec<Detection>> {
    let mut groups: BTreeMap<(String, u32), Vec<Detection>> = BTreeMap::new();
    for d in dets {
        groups
            .entry((d.image_id.clone(), d.class_id))
            .or_default()
            .push(d);
    }
    let mut out = Vec::new();
    for group in groups.into_values() {
        out.extend(apply(&group)?);
    }
    Ok(out)
}

pub fn run_fuse(args: FuseArgs, config: &PipelineConfig) -> Result<()> {
    let fusion = merge(&config.fusion, &args);
    let mut model_outputs = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        model_outputs.push(
            read_detections_jsonl(path).with_context(|| format!("{}", path.display()))?,
        );
    }

    let fused = match fusion.method {
        FusionMethod::Wbf => wbf(&model_outputs, fusion.iou, fusion.conf_mode)?,
        FusionMethod::Nms => {
            let all: Vec<Detection> = model_outputs.into_iter().flatten().collect();
            per_group(all, |g| nms(g, fusion.iou))?
        }
        FusionMethod::SoftNms => {
            let all: Vec<Detection> = model_outputs.into_iter().flatten().collect();
            per_group(all, |g| {
                soft_nms(g, fusion.iou, fusion.sigma, fusion.soft_mode, fusion.score_floor)
            })?
        }
    };

    let mut bytes = Vec::new();
    write_detections_jsonl(&fused, &mut bytes)?;
    atomic_write_bytes(&args.out, &bytes)?;
    println!("{} fused detections -> {}", fused.len(), args.out.display());
    Ok(())
}
