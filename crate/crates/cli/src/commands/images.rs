//! Image-level commands: edges, degrade, sr, psnr, ssim.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;

use esrpcb_core::edge::{build_sr_input, canny, sobel_edge_map, CannyParams, EdgeChannels};
use esrpcb_core::image::{degrade, load_image, ColorSpace, ImageBuffer};
use esrpcb_core::metrics::{psnr, psnr_luma_cropped, ssim, SsimParams};
use esrpcb_core::nn::load_weights;

use crate::config::PipelineConfig;
use crate::util::{atomic_save_image, resolve_in_out, tag_path};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EdgeKind {
    Canny,
    Sobel,
}

#[derive(Args)]
pub struct EdgesArgs {
    /// Edge detector to run.
    #[arg(long, value_enum, default_value = "canny")]
    mode: EdgeKind,
    /// Canny low threshold (gradient-magnitude scale).
    #[arg(long)]
    low: Option<f32>,
    /// Canny high threshold.
    #[arg(long)]
    high: Option<f32>,
    /// Gaussian sigma for the Canny blur stage.
    #[arg(long)]
    sigma: Option<f32>,
    /// Gaussian kernel size (odd).
    #[arg(long)]
    ksize: Option<usize>,
    /// Input images (PNG, PPM or PGM); without -o, exactly two
    /// positionals are read as INPUT OUTPUT.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file for a single input, or directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

pub(crate) fn merge_canny(config: &PipelineConfig, args: &EdgesArgs) -> CannyParams {
    CannyParams {
        low: args.low.unwrap_or(config.canny.low),
        high: args.high.unwrap_or(config.canny.high),
        sigma: args.sigma.unwrap_or(config.canny.sigma),
        ksize: args.ksize.unwrap_or(config.canny.ksize),
    }
}

pub fn run_edges(args: EdgesArgs, config: &PipelineConfig) -> Result<()> {
    let params = merge_canny(config, &args);
    let (inputs, outs) = resolve_in_out(args.inputs, args.out, "_edges", "png")?;
    inputs
        .par_iter()
        .zip(&outs)
        .try_for_each(|(input, out)| -> Result<()> {
            let gray = load_image(input)?.to_luma_f32();
            match args.mode {
                EdgeKind::Canny => {
                    let map = canny(&gray, &params)?;
                    let EdgeChannels::CannyBinary { mask } = map.channels else {
                        unreachable!()
                    };
                    // binary map scaled onto the 8-bit range
                    atomic_save_image(&mask.to_image_affine(0.0, 1.0), out)?;
                    Ok(())
                }
                EdgeKind::Sobel => {
                    let map = sobel_edge_map(&gray);
                    let EdgeChannels::SobelXy { gx, gy } = map.channels else {
                        unreachable!()
                    };
                    atomic_save_image(&gx.to_image_affine(-1.0, 1.0), &tag_path(out, "gx"))?;
                    atomic_save_image(&gy.to_image_affine(-1.0, 1.0), &tag_path(out, "gy"))?;
                    Ok(())
                }
            }
        })?;
    Ok(())
}

#[derive(Args)]
pub struct DegradeArgs {
    /// High-resolution inputs with dimensions divisible by 4; without
    /// -o, exactly two positionals are read as INPUT OUTPUT.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file for a single input, or directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

pub fn run_degrade(args: DegradeArgs) -> Result<()> {
    let (inputs, outs) = resolve_in_out(args.inputs, args.out, "_lr", "png")?;
    inputs
        .par_iter()
        .zip(&outs)
        .try_for_each(|(input, out)| -> Result<()> {
            let img = load_image(input)?;
            atomic_save_image(&degrade(&img)?, out)?;
            Ok(())
        })?;
    Ok(())
}

#[derive(Args)]
pub struct SrArgs {
    /// Trained weights file; the edge mode is inferred from it.
    #[arg(long)]
    weights: PathBuf,
    /// Low-resolution RGB inputs; without -o, exactly two positionals
    /// are read as INPUT OUTPUT.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file for a single input, or directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

pub fn run_sr(args: SrArgs, config: &PipelineConfig) -> Result<()> {
    let net = load_weights(&args.weights)
        .with_context(|| format!("loading {}", args.weights.display()))?;
    let mode = net.config().edge_mode;
    let (inputs, outs) = resolve_in_out(args.inputs, args.out, "_sr", "png")?;
    for (input, out) in inputs.iter().zip(&outs) {
        let img = load_image(input)?;
        if img.colorspace() != ColorSpace::Rgb {
            bail!("{}: super-resolution expects RGB input", input.display());
        }
        let x = build_sr_input(&img, mode, &config.canny)?;
        let y = net.forward(&x)?;
        atomic_save_image(&ImageBuffer::from_tensor(&y)?, out)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct PsnrArgs {
    a: PathBuf,
    b: PathBuf,
    /// Compute on the BT.601 luma channel instead of pooled RGB.
    #[arg(long)]
    luma: bool,
    /// Crop this many border pixels before comparing (requires --luma).
    #[arg(long, default_value_t = 0, requires = "luma")]
    crop_border: usize,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

pub fn run_psnr(args: PsnrArgs) -> Result<()> {
    let a = load_image(&args.a)?;
    let b = load_image(&args.b)?;
    let value = if args.luma {
        psnr_luma_cropped(&a, &b, args.crop_border)?
    } else {
        psnr(&a, &b)?
    };
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "psnr_db": if value.is_finite() { Some(value) } else { None },
                "infinite": !value.is_finite(),
                "luma": args.luma,
                "crop_border": args.crop_border,
            })
        );
    } else if value.is_finite() {
        println!("{value:.4} dB");
    } else {
        println!("inf dB (identical images)");
    }
    Ok(())
}

#[derive(Args)]
pub struct SsimArgs {
    a: PathBuf,
    b: PathBuf,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

pub fn run_ssim(args: SsimArgs) -> Result<()> {
    let a = load_image(&args.a)?;
    let b = load_image(&args.b)?;
    let value = ssim(&a, &b, &SsimParams::default())?;
    if args.json {
        println!("{}", serde_json::json!({ "ssim": value }));
    } else {
        println!("{value:.5}");
    }
    Ok(())
}
