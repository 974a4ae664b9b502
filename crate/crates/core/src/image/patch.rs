//! Aligned LR/HR patch sampling for training.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::ImageBuffer;

/// An aligned pair of training patches; the HR patch covers exactly 4× the
/// LR patch, with `hr_xy = 4 · lr_xy`.
#[derive(Clone, Debug)]
pub struct PatchPair {
    /// `3×p×p` floats in `[0, 1]`.
    pub lr: Tensor,
    /// `3×4p×4p` floats in `[0, 1]`.
    pub hr: Tensor,
    pub source_id: String,
    pub lr_x: usize,
    pub lr_y: usize,
    pub hr_x: usize,
    pub hr_y: usize,
}

/// Draws `count` uniformly random aligned patch pairs; reproducible for a
/// given seed.
pub fn sample_patch_pairs(
    hr: &ImageBuffer,
    lr: &ImageBuffer,
    patch: usize,
    count: usize,
    seed: u64,
    source_id: &str,
) -> Result<Vec<PatchPair>> {
    if hr.width() != 4 * lr.width() || hr.height() != 4 * lr.height() {
        return Err(Error::shape(format!(
            "HR {}x{} is not 4x the LR {}x{}",
            hr.width(),
            hr.height(),
            lr.width(),
            lr.height()
        )));
    }
    if hr.channels() != 3 || lr.channels() != 3 {
        return Err(Error::arg("patch sampling expects RGB images".to_string()));
    }
    if patch == 0 || patch > lr.width() || patch > lr.height() {
        return Err(Error::arg(format!(
            "patch size {} exceeds the {}x{} LR image",
            patch,
            lr.width(),
            lr.height()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let lr_x = rng.gen_range(0..=lr.width() - patch);
        let lr_y = rng.gen_range(0..=lr.height() - patch);
        let (hr_x, hr_y) = (4 * lr_x, 4 * lr_y);
        out.push(PatchPair {
            lr: lr.crop(lr_x, lr_y, patch, patch)?.to_tensor(),
            hr: hr.crop(hr_x, hr_y, 4 * patch, 4 * patch)?.to_tensor(),
            source_id: source_id.to_string(),
            lr_x,
            lr_y,
            hr_x,
            hr_y,
        });
    }
    Ok(out)
}
