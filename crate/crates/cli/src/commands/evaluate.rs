//! `evaluate`: per-class AP and mAP50 against ground truth, with a
//! Student-t 95% confidence interval over multiple prediction files.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use esrpcb_core::dataset::DefectClass;
use esrpcb_core::fusion::{read_detections_jsonl, read_ground_truth_jsonl};
use esrpcb_core::metrics::{evaluate_map, mean_ci95, EvalResult};

use crate::config::PipelineConfig;
use crate::util::atomic_write_json;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Ground-truth boxes (JSON Lines, no scores).
    #[arg(long)]
    gt: PathBuf,
    /// Prediction files; several files yield a mean and 95% CI.
    #[arg(long = "pred", required = true, num_args = 1..)]
    preds: Vec<PathBuf>,
    /// Matching IoU threshold.
    #[arg(long, default_value_t = 0.5)]
    iou: f32,
    /// Optional JSON report path.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FileResult {
    path: String,
    map50: f64,
    result: EvalResult,
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a PipelineConfig,
    iou: f32,
    files: Vec<FileResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_map50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci95: Option<(f64, f64)>,
}

fn class_name(id: u32) -> String {
    DefectClass::from_id(id)
        .map(|c| c.as_str().to_string())
        .unwrap_or_else(|| format!("class{id}"))
}

pub fn run_evaluate(args: EvaluateArgs, config: &PipelineConfig) -> Result<()> {
    let gts = read_ground_truth_jsonl(&args.gt)
        .with_context(|| format!("{}", args.gt.display()))?;
    let mut files = Vec::new();
    for path in &args.preds {
        let dets =
            read_detections_jsonl(path).with_context(|| format!("{}", path.display()))?;
        let result = evaluate_map(&dets, &gts, args.iou)?;
        files.push(FileResult {
            path: path.display().to_string(),
            map50: result.map50,
            result,
        });
    }

    // aligned text table: classes as rows, one AP column per file
    let mut class_ids: Vec<u32> = files
        .iter()
        .flat_map(|f| f.result.per_class.iter().map(|c| c.class_id))
        .collect();
    class_ids.sort_unstable();
    class_ids.dedup();

    let name_width = class_ids
        .iter()
        .map(|&id| class_name(id).len())
        .chain(["mAP50".len()])
        .max()
        .unwrap_or(8);
    let headers: Vec<String> = files
        .iter()
        .map(|f| {
            PathBuf::from(&f.path)
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or(&f.path)
                .to_string()
        })
        .collect();
    let col_width = headers.iter().map(|h| h.len()).max().unwrap_or(6).max(6);

    print!("{:<name_width$}", "class");
    for h in &headers {
        print!("  {h:>col_width$}");
    }
    println!();
    for &id in &class_ids {
        print!("{:<name_width$}", class_name(id));
        for f in &files {
            let ap = f
                .result
                .per_class
                .iter()
                .find(|c| c.class_id == id)
                .map(|c| format!("{:.4}", c.ap))
                .unwrap_or_else(|| "-".to_string());
            print!("  {ap:>col_width$}");
        }
        println!();
    }
    print!("{:<name_width$}", "mAP50");
    for f in &files {
        print!("  {:>col_width$.4}", f.map50);
    }
    println!();

    let (mean_map50, ci95) = if files.len() >= 2 {
        let values: Vec<f64> = files.iter().map(|f| f.map50).collect();
        let (mean, lo, hi) = mean_ci95(&values)?;
        println!("average mAP50 of {mean:.4} with a 95% CI: [{lo:.4}, {hi:.4}]");
        (Some(mean), Some((lo, hi)))
    } else {
        (None, None)
    };

    if let Some(out) = &args.out {
        atomic_write_json(
            out,
            &Report {
                config,
                iou: args.iou,
                files,
                mean_map50,
                ci95,
            },
        )?;
    }
    Ok(())
}
