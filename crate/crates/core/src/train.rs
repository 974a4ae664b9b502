//! Batch training driver: presets, deterministic patch scheduling and the
//! synthetic patch sets used for toy-scale runs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::edge::{build_sr_input, CannyParams, EdgeMode};
use crate::error::{Error, Result};
use crate::image::{degrade, sample_patch_pairs, ImageBuffer, PatchPair};
use crate::nn::{train_step, AdamParams, AdamState, Network};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainerPreset {
    /// Desk-scale smoke training: small patches, short runs.
    #[default]
    Toy,
    /// The full-scale recipe: 196-pixel patches, mini-batch 16, 300k
    /// iterations with the learning rate halved every 100k. Provided for
    /// completeness; it is far outside desk-scale runtimes.
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// LR patch side in pixels; HR patches are 4× larger.
    pub patch_size: usize,
    pub batch_size: usize,
    pub steps: u64,
    pub lr: f32,
    pub lr_halve_every: u64,
    pub seed: u64,
}

impl TrainerConfig {
    pub fn preset(preset: TrainerPreset) -> Self {
        match preset {
            TrainerPreset::Toy => TrainerConfig {
                patch_size: 48,
                batch_size: 4,
                steps: 500,
                lr: 1e-4,
                lr_halve_every: 100_000,
                seed: 0,
            },
            TrainerPreset::Paper => TrainerConfig {
                patch_size: 196,
                batch_size: 16,
                steps: 300_000,
                lr: 1e-4,
                lr_halve_every: 100_000,
                seed: 0,
            },
        }
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            lr: self.lr,
            lr_halve_every: self.lr_halve_every,
            ..AdamParams::default()
        }
    }
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig::preset(TrainerPreset::Toy)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainingRun {
    pub initial_loss: f32,
    pub final_loss: f32,
    pub steps: u64,
    /// Loss after every step.
    pub losses: Vec<f32>,
}

/// Converts patch pairs into (network input, HR target) tensors, attaching
/// the edge channels the network expects.
pub fn prepare_inputs(
    pairs: &[PatchPair],
    mode: EdgeMode,
    canny: &CannyParams,
) -> Result<Vec<(Tensor, Tensor)>> {
    pairs
        .iter()
        .map(|p| {
            let lr_img = ImageBuffer::from_tensor(&p.lr)?;
            Ok((build_sr_input(&lr_img, mode, canny)?, p.hr.clone()))
        })
        .collect()
}

/// Runs `cfg.steps` mini-batch updates over a fixed example set, cycling
/// through it in order. Deterministic for a given network and config.
pub fn train_on_pairs(
    net: &mut Network,
    examples: &[(Tensor, Tensor)],
    cfg: &TrainerConfig,
) -> Result<TrainingRun> {
    if examples.is_empty() {
        return Err(Error::arg("no training examples".to_string()));
    }
    let mut adam = AdamState::new(net, cfg.adam());
    let mut losses = Vec::with_capacity(cfg.steps as usize);
    let mut cursor = 0usize;
    for _ in 0..cfg.steps {
        let batch: Vec<(Tensor, Tensor)> = (0..cfg.batch_size)
            .map(|k| examples[(cursor + k) % examples.len()].clone())
            .collect();
        cursor = (cursor + cfg.batch_size) % examples.len();
        losses.push(train_step(net, &batch, &mut adam)?);
    }
    Ok(TrainingRun {
        initial_loss: *losses.first().expect("steps >= 1"),
        final_loss: *losses.last().expect("steps >= 1"),
        steps: cfg.steps,
        losses,
    })
}

/// Deterministic synthetic HR image: a smooth mixture of low-frequency
/// sinusoids per channel, on the full 8-bit range.
pub fn synthetic_hr_image(size: usize, rng: &mut ChaCha12Rng) -> ImageBuffer {
    let mut data = vec![0u8; size * size * 3];
    let mut waves = Vec::new();
    for _ in 0..3 {
        waves.push((
            rng.gen_range(0.2..1.2f32),          // cycles across the patch, x
            rng.gen_range(0.2..1.2f32),          // cycles across the patch, y
            rng.gen_range(0.0..std::f32::consts::TAU), // phase
            rng.gen_range(40.0..90.0f32),        // amplitude
        ));
    }
    let phase_shift = rng.gen_range(0.0..std::f32::consts::TAU);
    for y in 0..size {
        for x in 0..size {
            for c in 0..3 {
                let (fx, fy, phase, amp) = waves[c];
                let arg = std::f32::consts::TAU
                    * (fx * x as f32 / size as f32 + fy * y as f32 / size as f32)
                    + phase
                    + phase_shift * c as f32;
                let v = 127.5 + amp * arg.sin();
                data[(y * size + x) * 3 + c] = v.clamp(0.0, 255.0).round() as u8;
            }
        }
    }
    ImageBuffer::new(size, size, 3, data).expect("sized buffer")
}

/// A fixed synthetic patch set: smooth HR patterns with bicubic ×¼ LR
/// counterparts. Reproducible for a given seed.
pub fn synthetic_patch_pairs(count: usize, lr_size: usize, seed: u64) -> Result<Vec<PatchPair>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let hr_img = synthetic_hr_image(4 * lr_size, &mut rng);
        let lr_img = degrade(&hr_img)?;
        out.push(PatchPair {
            lr: lr_img.to_tensor(),
            hr: hr_img.to_tensor(),
            source_id: format!("synthetic_{i}"),
            lr_x: 0,
            lr_y: 0,
            hr_x: 0,
            hr_y: 0,
        });
    }
    Ok(out)
}

/// Samples aligned patch pairs from a set of HR images, degrading each to
/// its ×¼ LR counterpart first. Image dimensions are trimmed to the next
/// multiple of 4.
pub fn patch_pairs_from_images(
    images: &[(String, ImageBuffer)],
    patch: usize,
    per_image: usize,
    seed: u64,
) -> Result<Vec<PatchPair>> {
    let mut out = Vec::new();
    for (i, (id, hr)) in images.iter().enumerate() {
        let w = hr.width() / 4 * 4;
        let h = hr.height() / 4 * 4;
        if w == 0 || h == 0 {
            return Err(Error::arg(format!("image {id} too small to degrade")));
        }
        let hr = hr.crop(0, 0, w, h)?;
        let lr = degrade(&hr)?;
        out.extend(sample_patch_pairs(
            &hr,
            &lr,
            patch,
            per_image,
            seed.wrapping_add(i as u64),
            id,
        )?);
    }
    Ok(out)
}
