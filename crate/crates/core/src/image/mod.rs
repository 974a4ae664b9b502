//! Image buffers, color conversion, file I/O, bicubic resampling and
//! training-patch sampling.

mod io;
mod patch;
mod resample;

pub use io::{load_image, save_image};
pub use patch::{sample_patch_pairs, PatchPair};
pub use resample::{bicubic_resize, degrade, keys_kernel};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    Gray,
    Rgb,
}

/// 8-bit interleaved image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    colorspace: ColorSpace,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("image dimensions must be positive".to_string()));
        }
        let colorspace = match channels {
            1 => ColorSpace::Gray,
            3 => ColorSpace::Rgb,
            c => {
                return Err(Error::arg(format!(
                    "unsupported channel count {c}; expected 1 or 3"
                )))
            }
        };
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "{}x{}x{} image needs {} bytes, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            colorspace,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        ImageBuffer::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// BT.601 luma (0.299 R + 0.587 G + 0.114 B) as floats on the 0–255
    /// scale; grayscale images convert losslessly.
    pub fn to_luma_f32(&self) -> GrayMap {
        let mut out = Vec::with_capacity(self.width * self.height);
        match self.colorspace {
            ColorSpace::Gray => out.extend(self.data.iter().map(|&v| v as f32)),
            ColorSpace::Rgb => {
                for px in self.data.chunks_exact(3) {
                    out.push(
                        0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32,
                    );
                }
            }
        }
        GrayMap::from_parts(self.width, self.height, out)
    }

    /// `C×H×W` float tensor with values scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let n = self.width * self.height;
        let mut data = vec![0.0f32; self.channels * n];
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    data[c * n + y * self.width + x] =
                        self.get(x, y, c) as f32 / 255.0;
                }
            }
        }
        Tensor::from_parts(vec![self.channels, self.height, self.width], data)
    }

    /// Maps a `[0, 1]` float tensor back to 8-bit samples, clamping and
    /// rounding half away from zero.
    pub fn from_tensor(t: &Tensor) -> Result<ImageBuffer> {
        let (c, h, w) = match t.shape() {
            [c @ (1 | 3), h, w] => (*c, *h, *w),
            s => {
                return Err(Error::shape(format!(
                    "expected 1×H×W or 3×H×W tensor, got {:?}",
                    s
                )))
            }
        };
        let n = h * w;
        let mut data = vec![0u8; c * n];
        for ch in 0..c {
            for i in 0..n {
                let v = (t.data()[ch * n + i] * 255.0).clamp(0.0, 255.0).round();
                data[i * c + ch] = v as u8;
            }
        }
        ImageBuffer::new(w, h, c, data)
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<ImageBuffer> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::arg(format!(
                "crop {}x{}+{}+{} outside {}x{} image",
                w, h, x, y, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for row in y..y + h {
            let start = (row * self.width + x) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        ImageBuffer::new(w, h, self.channels, data)
    }
}

/// Single-channel float image on the 0–255 value scale, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("map dimensions must be positive".to_string()));
        }
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{}x{} map needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(GrayMap {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_parts(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        GrayMap {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        GrayMap::from_parts(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// 8-bit image via an affine map of `[lo, hi]` onto `[0, 255]`.
    pub fn to_image_affine(&self, lo: f32, hi: f32) -> ImageBuffer {
        let scale = 255.0 / (hi - lo);
        let data = self
            .data
            .iter()
            .map(|&v| ((v - lo) * scale).clamp(0.0, 255.0).round() as u8)
            .collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("dims already validated")
    }
}

/// Reflects an out-of-range index back into `0..n` (edge sample repeated:
/// −1 → 0, n → n−1).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as isize;
    let period = 2 * n;
    let mut j = i % period;
    if j < 0 {
        j += period;
    }
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}
