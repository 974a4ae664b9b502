//! `crop-dataset`: VOC ingestion, crop augmentation, optional splitting.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use esrpcb_core::dataset::{
    crop_augment, parse_voc_xml, split_manifest, AnnotatedImage, CropParams, DatasetManifest,
};
use esrpcb_core::image::load_image;

use crate::util::{atomic_save_image, atomic_write_bytes};

#[derive(Args)]
pub struct CropDatasetArgs {
    /// Directory of VOC-style XML annotations (searched recursively).
    #[arg(long)]
    annotations: PathBuf,
    /// Directory of source images; when given, crop pixels are written as
    /// PNGs (sources must be PNG/PPM/PGM).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Square crop side in pixels.
    #[arg(long, default_value_t = 600)]
    crop: u32,
    /// Grid stride; equal to the crop size for non-overlapping tiles.
    #[arg(long)]
    stride: Option<u32>,
    /// Minimum surviving-area fraction for a clipped box.
    #[arg(long, default_value_t = 0.25)]
    min_box_frac: f32,
    /// Skip the extra defect-centered crop per ground-truth box.
    #[arg(long)]
    no_center_crops: bool,
    /// Comma-separated train,val,test ratios, e.g. 0.8,0.1,0.1.
    #[arg(long)]
    split: Option<String>,
    /// Output directory for manifests (and images/ when pixels are cut).
    #[arg(short, long)]
    out: PathBuf,
}

pub fn run_crop_dataset(args: CropDatasetArgs, seed: u64) -> Result<()> {
    let params = CropParams {
        crop: args.crop,
        stride: args.stride.unwrap_or(args.crop),
        min_box_frac: args.min_box_frac,
        center_crops: !args.no_center_crops,
    };

    let mut xml_files = Vec::new();
    walk(&args.annotations, &mut |p| {
        if p.extension().is_some_and(|e| e == "xml") {
            xml_files.push(p.to_path_buf());
        }
    })?;
    xml_files.sort();
    if xml_files.is_empty() {
        bail!("no XML annotations under {}", args.annotations.display());
    }

    // index source images by file name for pixel cutting
    let image_index: HashMap<String, PathBuf> = match &args.images {
        Some(dir) => {
            let mut index = HashMap::new();
            walk(dir, &mut |p| {
                if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
                    index.insert(name.to_string(), p.to_path_buf());
                }
            })?;
            index
        }
        None => HashMap::new(),
    };

    std::fs::create_dir_all(&args.out)?;
    let image_out = args.out.join("images");

    let mut crops: Vec<AnnotatedImage> = Vec::new();
    let mut pixels_written = 0usize;
    for xml in &xml_files {
        let annotated = parse_voc_xml(xml)?;
        let source_pixels = image_index
            .get(&annotated.path)
            .map(|p| load_image(p))
            .transpose()
            .with_context(|| format!("reading pixels for {}", annotated.path))?;
        for mut crop in crop_augment(&annotated, &params)? {
            if let Some(src) = &source_pixels {
                let origin = crop_origin(&crop.path)?;
                let cut = src.crop(
                    origin.0 as usize,
                    origin.1 as usize,
                    params.crop as usize,
                    params.crop as usize,
                )?;
                std::fs::create_dir_all(&image_out)?;
                let png_name = format!(
                    "{}.png",
                    Path::new(&crop.path)
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .unwrap_or(&crop.path)
                );
                atomic_save_image(&cut, &image_out.join(&png_name))?;
                crop.path = png_name;
                pixels_written += 1;
            }
            crops.push(crop);
        }
    }

    let manifest = DatasetManifest::new(crops, None);
    match &args.split {
        None => {
            atomic_write_bytes(&args.out.join("manifest.json"), manifest.to_json().as_bytes())?;
            summarize("all", &manifest);
        }
        Some(spec) => {
            let ratios = parse_ratios(spec)?;
            let (train, val, test) = split_manifest(&manifest, ratios, seed)?;
            for m in [&train, &val, &test] {
                let tag = m.split.as_deref().unwrap_or("part");
                atomic_write_bytes(
                    &args.out.join(format!("manifest_{tag}.json")),
                    m.to_json().as_bytes(),
                )?;
                summarize(tag, m);
            }
        }
    }
    if pixels_written > 0 {
        println!("wrote {pixels_written} crop images to {}", image_out.display());
    }
    Ok(())
}

fn summarize(tag: &str, manifest: &DatasetManifest) {
    let counts = manifest.per_class_counts();
    let detail: Vec<String> = counts.iter().map(|(c, n)| format!("{c}: {n}")).collect();
    println!(
        "{tag}: {} images, {} boxes ({})",
        manifest.images.len(),
        manifest.total_boxes(),
        detail.join(", ")
    );
}

fn parse_ratios(spec: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("invalid --split {spec:?}"))?;
    if parts.len() != 3 {
        bail!("--split needs exactly three ratios, got {}", parts.len());
    }
    Ok([parts[0], parts[1], parts[2]])
}

/// Recovers the crop origin from the `__cx{X}_cy{Y}` suffix.
fn crop_origin(path: &str) -> Result<(u32, u32)> {
    let stem = Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(path);
    let suffix = stem
        .rsplit("__c")
        .next()
        .with_context(|| format!("{path:?} is not a crop name"))?;
    let (x_part, y_part) = suffix
        .trim_start_matches('x')
        .split_once("_cy")
        .with_context(|| format!("{path:?} is not a crop name"))?;
    Ok((x_part.parse()?, y_part.parse()?))
}

fn walk(dir: &Path, visit: &mut impl FnMut(&Path)) -> Result<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, visit)?;
        } else {
            visit(&path);
        }
    }
    Ok(())
}
