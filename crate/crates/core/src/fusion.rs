//! Detection-ensemble algorithms: greedy NMS, Soft-NMS rescoring and
//! Weighted Boxes Fusion, plus the JSON Lines detection interchange.
//!
//! The fusion entry points group by `(image_id, class_id)` internally;
//! boxes of different classes or images never interact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corner-form box; normalized to `[0, 1]` in interchange files, but the
/// geometry below works on any consistent scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
}

impl BBox {
    pub fn new(x1: f32, y1: f32, x2: f32, y2: f32) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn area(&self) -> f32 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f32 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class_id: u32,
    pub score: f32,
    pub bbox: BBox,
}

/// A ground-truth box: same geometry as a [`Detection`] without a score.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BBox,
}

/// Greedy non-maximum suppression on one already-grouped detection list:
/// boxes are visited in (score desc, input index) order and kept iff their
/// IoU with every previously kept box is `< iou_thr`.
pub fn nms(dets: &[Detection], iou_thr: f32) -> Result<Vec<Detection>> {
    if !(iou_thr > 0.0 && iou_thr <= 1.0) {
        return Err(Error::arg(format!(
            "NMS IoU threshold must lie in (0, 1], got {iou_thr}"
        )));
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for idx in order {
        let cand = &dets[idx];
        if kept.iter().all(|k| iou(&k.bbox, &cand.bbox) < iou_thr) {
            kept.push(cand.clone());
        }
    }
    Ok(kept)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SoftNmsMode {
    Linear,
    #[default]
    Gaussian,
}

/// Soft-NMS: instead of removing overlaps, rescores them. Gaussian mode
/// decays by `exp(-IoU²/σ)` for every overlap; linear mode by `(1 - IoU)`
/// when `IoU > iou_thr`. Boxes fall out when their score sinks below
/// `score_floor`. Scores never increase.
pub fn soft_nms(
    dets: &[Detection],
    iou_thr: f32,
    sigma: f32,
    mode: SoftNmsMode,
    score_floor: f32,
) -> Result<Vec<Detection>> {
    if mode == SoftNmsMode::Gaussian && (!sigma.is_finite() || sigma <= 0.0) {
        return Err(Error::arg(format!(
            "gaussian soft-NMS needs sigma > 0, got {sigma}"
        )));
    }
    if !(iou_thr > 0.0 && iou_thr <= 1.0) {
        return Err(Error::arg(format!(
            "soft-NMS IoU threshold must lie in (0, 1], got {iou_thr}"
        )));
    }
    // (current score, input index); processed by descending current score,
    // ties by input index
    let mut pool: Vec<(f32, usize)> = dets.iter().map(|d| d.score).zip(0..).collect();
    let mut out = Vec::new();
    while !pool.is_empty() {
        let best = pool
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.1.cmp(&a.1))
            })
            .map(|(i, _)| i)
            .expect("pool is non-empty");
        let (score, idx) = pool.swap_remove(best);
        let kept = Detection {
            score,
            ..dets[idx].clone()
        };
        pool.retain_mut(|(s, i)| {
            let overlap = iou(&kept.bbox, &dets[*i].bbox);
            match mode {
                SoftNmsMode::Gaussian => *s *= (-overlap * overlap / sigma).exp(),
                SoftNmsMode::Linear => {
                    if overlap > iou_thr {
                        *s *= 1.0 - overlap;
                    }
                }
            }
            *s >= score_floor
        });
        out.push(kept);
    }
    Ok(out)
}

/// Final confidence rescale of a WBF cluster with `T` members across `N`
/// models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConfMode {
    /// `C · min(T, N) / N`.
    #[default]
    AvgMin,
    /// `C · T / N`. Note that this rescales a singleton cluster by `1/N`
    /// even when only one model could have produced it.
    AvgT,
}

/// A WBF cluster: its member boxes (insertion order), the model index each
/// member came from, and the fused box.
#[derive(Clone, Debug)]
pub struct FusionCluster {
    pub members: Vec<Detection>,
    pub source_models: Vec<usize>,
    pub fused: Detection,
}

/// Weighted Boxes Fusion over the outputs of `N` models.
///
/// Per (image, class) group: all boxes are merged and sorted by descending
/// confidence; each box joins the existing cluster whose current fused box
/// has the highest IoU `>= iou_thr` (ties to the lowest cluster index), or
/// opens a new cluster. After every insertion the cluster's fused box is
/// recomputed — confidence is the plain mean of member scores and each
/// coordinate the confidence-weighted mean — and once all boxes are placed
/// the fused confidences are rescaled per `conf_mode`.
pub fn wbf(
    model_outputs: &[Vec<Detection>],
    iou_thr: f32,
    conf_mode: ConfMode,
) -> Result<Vec<Detection>> {
    Ok(wbf_clusters(model_outputs, iou_thr, conf_mode)?
        .into_iter()
        .map(|c| c.fused)
        .collect())
}

/// As [`wbf`], but returns the full clusters for diagnostics.
pub fn wbf_clusters(
    model_outputs: &[Vec<Detection>],
    iou_thr: f32,
    conf_mode: ConfMode,
) -> Result<Vec<FusionCluster>> {
    if model_outputs.is_empty() {
        return Err(Error::arg(
            "WBF needs at least one model's detections".to_string(),
        ));
    }
    if !(iou_thr > 0.0 && iou_thr <= 1.0) {
        return Err(Error::arg(format!(
            "WBF IoU threshold must lie in (0, 1], got {iou_thr}"
        )));
    }
    let n_models = model_outputs.len();

    // group by (image, class), remembering (model, input index) for ordering
    type Key = (String, u32);
    let mut groups: BTreeMap<Key, Vec<(usize, usize)>> = BTreeMap::new();
    for (m, dets) in model_outputs.iter().enumerate() {
        for (i, d) in dets.iter().enumerate() {
            groups
                .entry((d.image_id.clone(), d.class_id))
                .or_default()
                .push((m, i));
        }
    }

    let mut out = Vec::new();
    for ((image_id, class_id), mut refs) in groups {
        refs.sort_by(|&(ma, ia), &(mb, ib)| {
            let sa = model_outputs[ma][ia].score;
            let sb = model_outputs[mb][ib].score;
            sb.partial_cmp(&sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ma.cmp(&mb))
                .then(ia.cmp(&ib))
        });

        let mut clusters: Vec<StreamingCluster> = Vec::new();
        for (m, i) in refs {
            let det = &model_outputs[m][i];
            let mut best: Option<(usize, f32)> = None;
            for (ci, cluster) in clusters.iter().enumerate() {
                let overlap = iou(&cluster.fused_box, &det.bbox);
                if overlap >= iou_thr && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((ci, overlap));
                }
            }
            match best {
                Some((ci, _)) => clusters[ci].insert(det, m),
                None => clusters.push(StreamingCluster::open(det, m)),
            }
        }

        for c in clusters {
            let t = c.members.len();
            let factor = match conf_mode {
                ConfMode::AvgMin => t.min(n_models) as f32 / n_models as f32,
                ConfMode::AvgT => t as f32 / n_models as f32,
            };
            out.push(FusionCluster {
                fused: Detection {
                    image_id: image_id.clone(),
                    class_id,
                    score: c.fused_score * factor,
                    bbox: c.fused_box,
                },
                members: c.members,
                source_models: c.source_models,
            });
        }
    }

    // deterministic output order: group order, then fused score descending,
    // ties by cluster creation order (stable sort)
    out.sort_by(|a, b| {
        (&a.fused.image_id, a.fused.class_id)
            .cmp(&(&b.fused.image_id, b.fused.class_id))
            .then(
                b.fused
                    .score
                    .partial_cmp(&a.fused.score)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    Ok(out)
}

/// Running cluster state: sums are accumulated in member-insertion order so
/// that an explicit recomputation over the member list reproduces the same
/// floating-point values bit for bit.
struct StreamingCluster {
    members: Vec<Detection>,
    source_models: Vec<usize>,
    sum_score: f32,
    sum_wx1: f32,
    sum_wy1: f32,
    sum_wx2: f32,
    sum_wy2: f32,
    fused_box: BBox,
    fused_score: f32,
}

impl StreamingCluster {
    fn open(det: &Detection, model: usize) -> Self {
        let mut c = StreamingCluster {
            members: Vec::new(),
            source_models: Vec::new(),
            sum_score: 0.0,
            sum_wx1: 0.0,
            sum_wy1: 0.0,
            sum_wx2: 0.0,
            sum_wy2: 0.0,
            fused_box: det.bbox,
            fused_score: det.score,
        };
        c.insert(det, model);
        c
    }

    fn insert(&mut self, det: &Detection, model: usize) {
        self.members.push(det.clone());
        self.source_models.push(model);
        self.sum_score += det.score;
        self.sum_wx1 += det.score * det.bbox.x1;
        self.sum_wy1 += det.score * det.bbox.y1;
        self.sum_wx2 += det.score * det.bbox.x2;
        self.sum_wy2 += det.score * det.bbox.y2;
        self.fused_score = self.sum_score / self.members.len() as f32;
        self.fused_box = BBox {
            x1: self.sum_wx1 / self.sum_score,
            y1: self.sum_wy1 / self.sum_score,
            x2: self.sum_wx2 / self.sum_score,
            y2: self.sum_wy2 / self.sum_score,
        };
    }
}

// --- JSON Lines interchange -------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    image_id: String,
    class_id: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f32>,
    #[serde(rename = "box")]
    bbox: [f32; 4],
}

fn validate_box(b: &[f32; 4], line: usize) -> Result<BBox> {
    let [x1, y1, x2, y2] = *b;
    for v in b {
        if !(0.0..=1.0).contains(v) {
            return Err(Error::Jsonl {
                line,
                message: format!("coordinate {v} outside [0, 1]"),
            });
        }
    }
    if !(x1 < x2 && y1 < y2) {
        return Err(Error::Jsonl {
            line,
            message: format!("degenerate box [{x1}, {y1}, {x2}, {y2}]"),
        });
    }
    Ok(BBox::new(x1, y1, x2, y2))
}

fn validate_class(class_id: u32, line: usize) -> Result<u32> {
    if class_id > 5 {
        return Err(Error::Jsonl {
            line,
            message: format!("class_id {class_id} outside the six defect classes (0-5)"),
        });
    }
    Ok(class_id)
}

fn parse_lines<T>(
    text: &str,
    mut convert: impl FnMut(DetectionRecord, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: DetectionRecord = serde_json::from_str(raw).map_err(|e| Error::Jsonl {
            line,
            message: e.to_string(),
        })?;
        out.push(convert(record, line)?);
    }
    Ok(out)
}

/// One detection per line: `{"image_id", "class_id", "score", "box"}` with
/// normalized corners; malformed records are rejected with their line
/// number.
pub fn read_detections_jsonl(path: &Path) -> Result<Vec<Detection>> {
    let text = fs::read_to_string(path)?;
    parse_lines(&text, |r, line| {
        let score = r.score.ok_or_else(|| Error::Jsonl {
            line,
            message: "missing \"score\"".to_string(),
        })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Jsonl {
                line,
                message: format!("score {score} outside [0, 1]"),
            });
        }
        Ok(Detection {
            image_id: r.image_id,
            class_id: validate_class(r.class_id, line)?,
            score,
            bbox: validate_box(&r.bbox, line)?,
        })
    })
}

/// Ground truth uses the same schema with `score` omitted.
pub fn read_ground_truth_jsonl(path: &Path) -> Result<Vec<GroundTruth>> {
    let text = fs::read_to_string(path)?;
    parse_lines(&text, |r, line| {
        Ok(GroundTruth {
            image_id: r.image_id,
            class_id: validate_class(r.class_id, line)?,
            bbox: validate_box(&r.bbox, line)?,
        })
    })
}

pub fn write_detections_jsonl(dets: &[Detection], writer: impl std::io::Write) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for d in dets {
        let record = DetectionRecord {
            image_id: d.image_id.clone(),
            class_id: d.class_id,
            score: Some(d.score),
            bbox: [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2],
        };
        serde_json::to_writer(&mut w, &record).map_err(|e| Error::Jsonl {
            line: 0,
            message: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ground_truth_jsonl(gts: &[GroundTruth], writer: impl std::io::Write) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for g in gts {
        let record = DetectionRecord {
            image_id: g.image_id.clone(),
            class_id: g.class_id,
            score: None,
            bbox: [g.bbox.x1, g.bbox.y1, g.bbox.x2, g.bbox.y2],
        };
        serde_json::to_writer(&mut w, &record).map_err(|e| Error::Jsonl {
            line: 0,
            message: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
