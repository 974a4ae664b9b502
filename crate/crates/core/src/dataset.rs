//! PCB defect dataset ingestion: VOC-style XML annotations over the six
//! defect classes, sliding-window crop augmentation and leakage-free
//! train/val/test splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six defect classes, in canonical id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectClass {
    MissingHole,
    MouseBite,
    OpenCircuit,
    Short,
    Spur,
    SpuriousCopper,
}

impl DefectClass {
    pub const ALL: [DefectClass; 6] = [
        DefectClass::MissingHole,
        DefectClass::MouseBite,
        DefectClass::OpenCircuit,
        DefectClass::Short,
        DefectClass::Spur,
        DefectClass::SpuriousCopper,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectClass::MissingHole => "missing_hole",
            DefectClass::MouseBite => "mouse_bite",
            DefectClass::OpenCircuit => "open_circuit",
            DefectClass::Short => "short",
            DefectClass::Spur => "spur",
            DefectClass::SpuriousCopper => "spurious_copper",
        }
    }

    pub fn id(self) -> u32 {
        DefectClass::ALL.iter().position(|&c| c == self).unwrap() as u32
    }

    pub fn from_id(id: u32) -> Option<DefectClass> {
        DefectClass::ALL.get(id as usize).copied()
    }

    /// Parses a class name, normalizing case, spaces and hyphens to
    /// snake_case first.
    pub fn parse(name: &str) -> Result<DefectClass> {
        let normalized: String = name
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        DefectClass::ALL
            .into_iter()
            .find(|c| c.as_str() == normalized)
            .ok_or_else(|| Error::annotation(None, format!("unknown class {name:?}")))
    }
}

impl std::fmt::Display for DefectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A ground-truth box in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub class: DefectClass,
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
}

impl GtBox {
    pub fn area(&self) -> f32 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }
}

/// Marker inserted into crop file names; everything before the last
/// occurrence is the source-image id. Class names use single underscores,
/// so the marker cannot collide.
const CROP_MARKER: &str = "__c";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub path: String,
    #[serde(rename = "w")]
    pub width: u32,
    #[serde(rename = "h")]
    pub height: u32,
    pub boxes: Vec<GtBox>,
}

impl AnnotatedImage {
    /// Identity of the original photograph this image (or crop) came from;
    /// crops of one source never land in different splits.
    pub fn source_id(&self) -> String {
        let stem = Path::new(&self.path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(&self.path);
        match stem.rfind(CROP_MARKER) {
            Some(pos) => stem[..pos].to_string(),
            None => stem.to_string(),
        }
    }
}

/// Parses one VOC-style annotation (`size`, `object` → `name`, `bndbox`).
/// Boxes are clamped to the image bounds; unknown classes, inverted boxes
/// and boxes left empty by clamping are rejected.
pub fn parse_voc_xml(path: &Path) -> Result<AnnotatedImage> {
    let text = std::fs::read_to_string(path)?;
    parse_voc_str(&text, path)
}

pub fn parse_voc_str(text: &str, path: &Path) -> Result<AnnotatedImage> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| Error::annotation(Some(path), e.to_string()))?;
    let root = doc.root_element();

    let child_text = |node: roxmltree::Node, tag: &str| -> Option<String> {
        node.children()
            .find(|c| c.has_tag_name(tag))
            .and_then(|c| c.text())
            .map(|t| t.trim().to_string())
    };

    let size = root
        .children()
        .find(|c| c.has_tag_name("size"))
        .ok_or_else(|| Error::annotation(Some(path), "missing <size>"))?;
    let dim = |tag: &str| -> Result<u32> {
        child_text(size, tag)
            .and_then(|t| t.parse::<u32>().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::annotation(Some(path), format!("bad <size>/<{tag}>")))
    };
    let width = dim("width")?;
    let height = dim("height")?;

    let file_name = child_text(root, "filename").unwrap_or_else(|| {
        Path::new(path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .to_string()
    });

    let mut boxes = Vec::new();
    for object in root.children().filter(|c| c.has_tag_name("object")) {
        let name = child_text(object, "name")
            .ok_or_else(|| Error::annotation(Some(path), "object without <name>"))?;
        let class = DefectClass::parse(&name)
            .map_err(|e| Error::annotation(Some(path), e.to_string()))?;
        let bndbox = object
            .children()
            .find(|c| c.has_tag_name("bndbox"))
            .ok_or_else(|| Error::annotation(Some(path), "object without <bndbox>"))?;
        let coord = |tag: &str| -> Result<f32> {
            child_text(bndbox, tag)
                .and_then(|t| t.parse::<f32>().ok())
                .ok_or_else(|| Error::annotation(Some(path), format!("bad <bndbox>/<{tag}>")))
        };
        let (x1, y1, x2, y2) = (coord("xmin")?, coord("ymin")?, coord("xmax")?, coord("ymax")?);
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::annotation(
                Some(path),
                format!("inverted box [{x1}, {y1}, {x2}, {y2}] for {class}"),
            ));
        }
        // tolerate off-by-one annotations at the border
        let gt = GtBox {
            class,
            x1: x1.clamp(0.0, width as f32),
            y1: y1.clamp(0.0, height as f32),
            x2: x2.clamp(0.0, width as f32),
            y2: y2.clamp(0.0, height as f32),
        };
        if gt.area() <= 0.0 {
            return Err(Error::annotation(
                Some(path),
                format!("box [{x1}, {y1}, {x2}, {y2}] lies outside the image"),
            ));
        }
        boxes.push(gt);
    }

    Ok(AnnotatedImage {
        path: file_name,
        width,
        height,
        boxes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropParams {
    /// Square crop side in pixels.
    pub crop: u32,
    /// Grid stride; the default equals the crop for non-overlapping tiles.
    pub stride: u32,
    /// A clipped box survives iff retained area / original area reaches
    /// this fraction.
    pub min_box_frac: f32,
    /// Additionally emit one crop centered on every ground-truth box.
    pub center_crops: bool,
}

impl Default for CropParams {
    fn default() -> Self {
        CropParams {
            crop: 600,
            stride: 600,
            min_box_frac: 0.25,
            center_crops: true,
        }
    }
}

/// Sliding-window crop augmentation. Boxes are clipped to each window and
/// kept when enough of their area survives; windows without any surviving
/// box are dropped. Emitted coordinates are crop-relative and crop names
/// carry a `__cx{X}_cy{Y}` suffix.
pub fn crop_augment(img: &AnnotatedImage, params: &CropParams) -> Result<Vec<AnnotatedImage>> {
    let crop = params.crop;
    if crop == 0 || params.stride == 0 {
        return Err(Error::arg("crop and stride must be positive".to_string()));
    }
    if !(0.0..=1.0).contains(&params.min_box_frac) {
        return Err(Error::arg(format!(
            "min_box_frac must lie in [0, 1], got {}",
            params.min_box_frac
        )));
    }
    if crop > img.width || crop > img.height {
        return Err(Error::arg(format!(
            "crop {} exceeds the {}x{} image",
            crop, img.width, img.height
        )));
    }

    let max_x = img.width - crop;
    let max_y = img.height - crop;
    let mut origins: BTreeSet<(u32, u32)> = BTreeSet::new();
    let grid = |limit: u32| -> Vec<u32> {
        let mut v: Vec<u32> = (0..=limit).step_by(params.stride as usize).collect();
        if v.last() != Some(&limit) {
            v.push(limit);
        }
        v
    };
    for y in grid(max_y) {
        for x in grid(max_x) {
            origins.insert((x, y));
        }
    }
    if params.center_crops {
        for b in &img.boxes {
            let cx = ((b.x1 + b.x2) / 2.0 - crop as f32 / 2.0).round();
            let cy = ((b.y1 + b.y2) / 2.0 - crop as f32 / 2.0).round();
            origins.insert((
                (cx.max(0.0) as u32).min(max_x),
                (cy.max(0.0) as u32).min(max_y),
            ));
        }
    }

    let stem = Path::new(&img.path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(&img.path)
        .to_string();
    let ext = Path::new(&img.path)
        .extension()
        .and_then(|s| s.to_str())
        .map(|e| format!(".{e}"))
        .unwrap_or_default();

    let mut out = Vec::new();
    for (ox, oy) in origins {
        let (fx, fy) = (ox as f32, oy as f32);
        let mut boxes = Vec::new();
        for b in &img.boxes {
            let clipped = GtBox {
                class: b.class,
                x1: b.x1.max(fx),
                y1: b.y1.max(fy),
                x2: b.x2.min(fx + crop as f32),
                y2: b.y2.min(fy + crop as f32),
            };
            if clipped.x1 >= clipped.x2 || clipped.y1 >= clipped.y2 {
                continue;
            }
            if clipped.area() / b.area() < params.min_box_frac {
                continue;
            }
            boxes.push(GtBox {
                class: clipped.class,
                x1: clipped.x1 - fx,
                y1: clipped.y1 - fy,
                x2: clipped.x2 - fx,
                y2: clipped.y2 - fy,
            });
        }
        if boxes.is_empty() {
            continue;
        }
        out.push(AnnotatedImage {
            path: format!("{stem}{CROP_MARKER}x{ox}_cy{oy}{ext}"),
            width: crop,
            height: crop,
            boxes,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub images: Vec<AnnotatedImage>,
    #[serde(default)]
    pub split: Option<String>,
}

impl DatasetManifest {
    pub fn new(images: Vec<AnnotatedImage>, split: Option<String>) -> Self {
        DatasetManifest { images, split }
    }

    pub fn per_class_counts(&self) -> BTreeMap<DefectClass, usize> {
        let mut counts = BTreeMap::new();
        for img in &self.images {
            for b in &img.boxes {
                *counts.entry(b.class).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn total_boxes(&self) -> usize {
        self.images.iter().map(|i| i.boxes.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::annotation(None, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::annotation(Some(path), e.to_string()))
    }
}

/// Seeded, deterministic train/val/test split. Images are grouped by
/// source id and whole groups are assigned to one split, so crops of the
/// same photograph cannot leak across splits.
pub fn split_manifest(
    manifest: &DatasetManifest,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest)> {
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::arg(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, img) in manifest.images.iter().enumerate() {
        groups.entry(img.source_id()).or_default().push(i);
    }
    let mut ids: Vec<String> = groups.keys().cloned().collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n = ids.len() as f64;
    let cut1 = ((n * ratios[0]).round() as usize).min(ids.len());
    let cut2 = ((n * (ratios[0] + ratios[1])).round() as usize).clamp(cut1, ids.len());

    let collect = |slice: &[String], tag: &str| -> DatasetManifest {
        let mut images = Vec::new();
        for id in slice {
            for &idx in &groups[id] {
                images.push(manifest.images[idx].clone());
            }
        }
        DatasetManifest::new(images, Some(tag.to_string()))
    };
    Ok((
        collect(&ids[..cut1], "train"),
        collect(&ids[cut1..cut2], "val"),
        collect(&ids[cut2..], "test"),
    ))
}
