//! Image-quality metrics (MSE, PSNR, SSIM), detection metrics (precision,
//! recall, AP, mAP50) and confidence-interval statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::fusion::{iou, Detection, GroundTruth};
use crate::image::{GrayMap, ImageBuffer};

/// Pooled mean squared error over all pixels and channels on the 0–255
/// scale.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_shape(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10·log10(255²/MSE)` in dB; identical images report `+∞`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// PSNR on the BT.601 luma channel with `border` pixels cropped from every
/// side; the cross-paper comparison mode.
pub fn psnr_luma_cropped(a: &ImageBuffer, b: &ImageBuffer, border: usize) -> Result<f64> {
    check_same_shape(a, b)?;
    if a.width() <= 2 * border || a.height() <= 2 * border {
        return Err(Error::arg(format!(
            "border {} leaves no pixels in a {}x{} image",
            border,
            a.width(),
            a.height()
        )));
    }
    let la = a.to_luma_f32();
    let lb = b.to_luma_f32();
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for y in border..a.height() - border {
        for x in border..a.width() - border {
            let d = la.at(x, y) as f64 - lb.at(x, y) as f64;
            sum += d * d;
            n += 1;
        }
    }
    Ok(psnr_from_mse(sum / n as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the samples.
    pub l: f64,
    /// Side of the square Gaussian window.
    pub window: usize,
    pub sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            k1: 0.01,
            k2: 0.03,
            l: 255.0,
            window: 11,
            sigma: 1.5,
        }
    }
}

/// Mean SSIM under a Gaussian window, evaluated at every position where the
/// window fits entirely inside the image. RGB inputs are converted to
/// BT.601 luma first.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, params: &SsimParams) -> Result<f64> {
    check_same_shape(a, b)?;
    if params.window.is_multiple_of(2) || params.window < 3 {
        return Err(Error::arg(format!(
            "SSIM window must be odd and >= 3, got {}",
            params.window
        )));
    }
    let la = a.to_luma_f32();
    let lb = b.to_luma_f32();
    ssim_luma(&la, &lb, params)
}

fn ssim_luma(a: &GrayMap, b: &GrayMap, params: &SsimParams) -> Result<f64> {
    let (w, h) = (a.width(), a.height());
    let win = params.window;
    if w < win || h < win {
        return Err(Error::arg(format!(
            "image {w}x{h} is smaller than the {win}x{win} SSIM window"
        )));
    }
    let c1 = (params.k1 * params.l).powi(2);
    let c2 = (params.k2 * params.l).powi(2);

    // normalized 2-D Gaussian window
    let r = (win / 2) as isize;
    let mut weights = vec![0.0f64; win * win];
    let mut wsum = 0.0f64;
    for j in 0..win {
        for i in 0..win {
            let dx = i as isize - r;
            let dy = j as isize - r;
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * params.sigma * params.sigma)).exp();
            weights[j * win + i] = v;
            wsum += v;
        }
    }
    for v in &mut weights {
        *v /= wsum;
    }

    let mut total = 0.0f64;
    let mut count = 0usize;
    for cy in 0..=h - win {
        for cx in 0..=w - win {
            let mut mu_x = 0.0f64;
            let mut mu_y = 0.0f64;
            let mut xx = 0.0f64;
            let mut yy = 0.0f64;
            let mut xy = 0.0f64;
            for j in 0..win {
                for i in 0..win {
                    let wv = weights[j * win + i];
                    let va = a.at(cx + i, cy + j) as f64;
                    let vb = b.at(cx + i, cy + j) as f64;
                    mu_x += wv * va;
                    mu_y += wv * vb;
                    xx += wv * va * va;
                    yy += wv * vb * vb;
                    xy += wv * va * vb;
                }
            }
            let var_x = xx - mu_x * mu_x;
            let var_y = yy - mu_y * mu_y;
            let cov = xy - mu_x * mu_y;
            let s = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn check_same_shape(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::shape(format!(
            "images {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

// --- detection metrics -------------------------------------------------------

/// A detection labelled true/false positive by [`match_detections`].
#[derive(Clone, Debug)]
pub struct LabeledDetection {
    pub det: Detection,
    pub is_tp: bool,
}

/// One point of a precision/recall curve, taken at the score of the
/// detection that produced it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

/// Greedy per-(class, image) matching: detections in descending-score order
/// claim the unmatched ground truth with the highest IoU `>= iou_min`; each
/// ground truth matches at most once, everything else is a false positive.
/// Output preserves the input detection order.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou_min: f32,
) -> Result<Vec<LabeledDetection>> {
    if !(iou_min > 0.0 && iou_min <= 1.0) {
        return Err(Error::arg(format!(
            "matching IoU threshold must lie in (0, 1], got {iou_min}"
        )));
    }
    type Key = (u32, String);
    let mut gt_groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        gt_groups
            .entry((g.class_id, g.image_id.clone()))
            .or_default()
            .push(i);
    }
    let mut det_groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        det_groups
            .entry((d.class_id, d.image_id.clone()))
            .or_default()
            .push(i);
    }

    let mut labels = vec![false; dets.len()];
    for (key, det_idx) in &mut det_groups {
        det_idx.sort_by(|&a, &b| {
            dets[b]
                .score
                .partial_cmp(&dets[a].score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let empty = Vec::new();
        let gt_idx = gt_groups.get(key).unwrap_or(&empty);
        let mut taken = vec![false; gt_idx.len()];
        for &di in det_idx.iter() {
            let mut best: Option<(usize, f32)> = None;
            for (slot, &gi) in gt_idx.iter().enumerate() {
                if taken[slot] {
                    continue;
                }
                let overlap = iou(&dets[di].bbox, &gts[gi].bbox);
                if overlap >= iou_min && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((slot, overlap));
                }
            }
            if let Some((slot, _)) = best {
                taken[slot] = true;
                labels[di] = true;
            }
        }
    }

    Ok(dets
        .iter()
        .zip(labels)
        .map(|(det, is_tp)| LabeledDetection {
            det: det.clone(),
            is_tp,
        })
        .collect())
}

/// Raw precision/recall curve of one class, ordered by descending score.
pub fn pr_curve(labeled: &[LabeledDetection], n_gt: usize) -> Vec<PrPoint> {
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.sort_by(|&a, &b| {
        labeled[b]
            .det
            .score
            .partial_cmp(&labeled[a].det.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut out = Vec::with_capacity(order.len());
    for idx in order {
        if labeled[idx].is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        out.push(PrPoint {
            precision: tp as f64 / (tp + fp) as f64,
            recall: if n_gt == 0 {
                0.0
            } else {
                tp as f64 / n_gt as f64
            },
            threshold: labeled[idx].det.score as f64,
        });
    }
    out
}

/// All-point-interpolated average precision: the precision envelope
/// (running maximum from the right) integrated over recall increments.
pub fn average_precision(labeled: &[LabeledDetection], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let curve = pr_curve(labeled, n_gt);
    if curve.is_empty() {
        return 0.0;
    }
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len() - 1).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0f64;
    let mut prev_recall = 0.0f64;
    for (point, env) in curve.iter().zip(envelope) {
        ap += (point.recall - prev_recall) * env;
        prev_recall = point.recall;
    }
    ap
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassAp {
    pub class_id: u32,
    pub ap: f64,
    pub n_gt: usize,
    pub n_det: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalResult {
    pub per_class: Vec<ClassAp>,
    pub map50: f64,
}

/// Per-class AP at the given IoU threshold and their unweighted mean.
/// Classes with no ground truth and no detections are excluded from the
/// mean; a class with detections but no ground truth counts as AP 0.
pub fn evaluate_map(dets: &[Detection], gts: &[GroundTruth], iou_min: f32) -> Result<EvalResult> {
    let labeled = match_detections(dets, gts, iou_min)?;
    let classes: BTreeSet<u32> = dets
        .iter()
        .map(|d| d.class_id)
        .chain(gts.iter().map(|g| g.class_id))
        .collect();
    let mut per_class = Vec::new();
    for class_id in classes {
        let class_dets: Vec<LabeledDetection> = labeled
            .iter()
            .filter(|l| l.det.class_id == class_id)
            .cloned()
            .collect();
        let n_gt = gts.iter().filter(|g| g.class_id == class_id).count();
        if n_gt == 0 && class_dets.is_empty() {
            continue;
        }
        per_class.push(ClassAp {
            class_id,
            ap: average_precision(&class_dets, n_gt),
            n_gt,
            n_det: class_dets.len(),
        });
    }
    let map50 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.ap).sum::<f64>() / per_class.len() as f64
    };
    Ok(EvalResult { per_class, map50 })
}

/// Two-sided Student-t 95% confidence interval:
/// `mean ± t(0.975, n−1) · s/√n` with the sample standard deviation `s`.
pub fn mean_ci95(values: &[f64]) -> Result<(f64, f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::arg(format!(
            "confidence interval needs at least 2 values, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.975);
    Ok((mean, mean - t * se, mean + t * se))
}
