//! `sweep`: PSNR/SSIM per defect type for each Canny threshold pair,
//! reproducing the threshold-selection protocol on a given weights file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use esrpcb_core::dataset::{DatasetManifest, DefectClass};
use esrpcb_core::edge::{build_sr_input, CannyParams, EdgeMode};
use esrpcb_core::image::{degrade, load_image, ImageBuffer};
use esrpcb_core::metrics::{psnr, ssim, SsimParams};
use esrpcb_core::nn::load_weights;

use crate::config::PipelineConfig;
use crate::util::atomic_write_json;

const DEFAULT_PAIRS: [(f32, f32); 4] =
    [(100.0, 200.0), (100.0, 220.0), (80.0, 200.0), (80.0, 220.0)];

#[derive(Args)]
pub struct SweepArgs {
    /// Canny-guided weights file.
    #[arg(long)]
    weights: PathBuf,
    /// Manifest of HR evaluation images with their defect boxes.
    #[arg(long)]
    manifest: PathBuf,
    /// Root directory for manifest image paths (defaults to the manifest's
    /// directory, then an images/ sibling).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Threshold pairs as "low/high,low/high,..."; defaults to
    /// 100/200,100/220,80/200,80/220.
    #[arg(long)]
    pairs: Option<String>,
    /// Optional JSON report path.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Cell {
    psnr_db: f64,
    ssim: f64,
    images: usize,
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a PipelineConfig,
    weights: String,
    pairs: Vec<String>,
    /// `rows[class][pair]`, `null` when no image of that type was present
    rows: BTreeMap<String, Vec<Option<Cell>>>,
}

fn parse_pairs(spec: &str) -> Result<Vec<(f32, f32)>> {
    spec.split(',')
        .map(|p| {
            let (lo, hi) = p
                .trim()
                .split_once('/')
                .with_context(|| format!("pair {p:?} is not low/high"))?;
            Ok((lo.trim().parse()?, hi.trim().parse()?))
        })
        .collect()
}

pub fn run_sweep(args: SweepArgs, config: &PipelineConfig) -> Result<()> {
    let net = load_weights(&args.weights)
        .with_context(|| format!("loading {}", args.weights.display()))?;
    if net.config().edge_mode != EdgeMode::Canny {
        bail!(
            "threshold sweep needs canny-guided weights, these are {:?}",
            net.config().edge_mode
        );
    }
    let pairs = match &args.pairs {
        Some(spec) => parse_pairs(spec)?,
        None => DEFAULT_PAIRS.to_vec(),
    };

    let manifest = DatasetManifest::load(&args.manifest)?;
    if manifest.images.is_empty() {
        bail!("manifest {} lists no images", args.manifest.display());
    }
    let roots = [
        args.images.clone(),
        args.manifest.parent().map(|p| p.to_path_buf()),
        args.manifest.parent().map(|p| p.join("images")),
    ];

    // accumulate (psnr sum, ssim sum, count) per class per pair; an image
    // belongs to the defect-type row of its first box (the dataset keeps
    // one defect type per photograph)
    let mut acc: BTreeMap<DefectClass, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for entry in &manifest.images {
        let Some(first_box) = entry.boxes.first() else {
            continue;
        };
        let path = roots
            .iter()
            .flatten()
            .map(|root| root.join(&entry.path))
            .find(|p| p.is_file())
            .with_context(|| format!("image {} not found", entry.path))?;
        let hr = load_image(&path)?;
        let (w, h) = (hr.width() / 4 * 4, hr.height() / 4 * 4);
        if w == 0 || h == 0 {
            bail!("{}: too small for a x4 pipeline", entry.path);
        }
        let hr = hr.crop(0, 0, w, h)?;
        let lr = degrade(&hr)?;

        let row = acc
            .entry(first_box.class)
            .or_insert_with(|| vec![(0.0, 0.0, 0usize); pairs.len()]);
        for (k, &(low, high)) in pairs.iter().enumerate() {
            let params = CannyParams {
                low,
                high,
                ..config.canny
            };
            let x = build_sr_input(&lr, EdgeMode::Canny, &params)?;
            let sr = ImageBuffer::from_tensor(&net.forward(&x)?)?;
            let p = psnr(&sr, &hr)?;
            let s = ssim(&sr, &hr, &SsimParams::default())?;
            row[k].0 += p;
            row[k].1 += s;
            row[k].2 += 1;
        }
    }

    // report: always all six defect rows, pairs as columns
    let pair_names: Vec<String> = pairs.iter().map(|(l, h)| format!("{l}/{h}")).collect();
    let name_width = DefectClass::ALL
        .iter()
        .map(|c| c.as_str().len())
        .max()
        .unwrap();
    print!("{:<name_width$}", "defect");
    for name in &pair_names {
        print!("  {name:>14}");
    }
    println!();

    let mut rows = BTreeMap::new();
    for class in DefectClass::ALL {
        print!("{:<name_width$}", class.as_str());
        let mut row_cells = Vec::with_capacity(pairs.len());
        for k in 0..pairs.len() {
            match acc.get(&class) {
                Some(row) if row[k].2 > 0 => {
                    let (ps, ss, n) = row[k];
                    let cell = Cell {
                        psnr_db: ps / n as f64,
                        ssim: ss / n as f64,
                        images: n,
                    };
                    print!("  {:>14}", format!("{:.2}/{:.4}", cell.psnr_db, cell.ssim));
                    row_cells.push(Some(cell));
                }
                _ => {
                    print!("  {:>14}", "-");
                    row_cells.push(None);
                }
            }
        }
        println!();
        rows.insert(class.as_str().to_string(), row_cells);
    }

    if let Some(out) = &args.out {
        atomic_write_json(
            out,
            &Report {
                config,
                weights: args.weights.display().to_string(),
                pairs: pair_names,
                rows,
            },
        )?;
    }
    Ok(())
}
