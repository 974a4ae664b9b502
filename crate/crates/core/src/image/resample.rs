//! Bicubic resampling with the Keys cubic-convolution kernel (a = −0.5).

use crate::error::{Error, Result};

use super::{reflect_index, ImageBuffer};

/// Keys interpolation kernel with a = −0.5. Interpolating: 1 at offset 0,
/// 0 at every other integer offset, supported on (−2, 2).
pub fn keys_kernel(t: f32) -> f32 {
    const A: f32 = -0.5;
    let t = t.abs();
    if t < 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Separable bicubic resize with reflected borders; output samples are
/// clamped to `[0, 255]` and rounded half away from zero.
pub fn bicubic_resize(img: &ImageBuffer, out_w: usize, out_h: usize) -> Result<ImageBuffer> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::arg("output dimensions must be positive".to_string()));
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());

    // horizontal pass: w×h → out_w×h, kept in f32
    let x_taps = tap_table(w, out_w);
    let mut mid = vec![0.0f32; out_w * h * ch];
    for y in 0..h {
        for (ox, taps) in x_taps.iter().enumerate() {
            for c in 0..ch {
                let mut acc = 0.0f32;
                for &(src_x, weight) in taps {
                    acc += weight * img.get(src_x, y, c) as f32;
                }
                mid[(y * out_w + ox) * ch + c] = acc;
            }
        }
    }

    // vertical pass: out_w×h → out_w×out_h
    let y_taps = tap_table(h, out_h);
    let mut out = vec![0u8; out_w * out_h * ch];
    for (oy, taps) in y_taps.iter().enumerate() {
        for ox in 0..out_w {
            for c in 0..ch {
                let mut acc = 0.0f32;
                for &(src_y, weight) in taps {
                    acc += weight * mid[(src_y * out_w + ox) * ch + c];
                }
                out[(oy * out_w + ox) * ch + c] = acc.clamp(0.0, 255.0).round() as u8;
            }
        }
    }
    ImageBuffer::new(out_w, out_h, ch, out)
}

/// The four (index, weight) taps for every output position along one axis,
/// with pixel centres aligned (`src = (i + 0.5)·n/m − 0.5`).
fn tap_table(n: usize, m: usize) -> Vec<[(usize, f32); 4]> {
    let scale = n as f32 / m as f32;
    (0..m)
        .map(|i| {
            let src = (i as f32 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut taps = [(0usize, 0.0f32); 4];
            for (k, tap) in taps.iter_mut().enumerate() {
                let offset = k as f32 - 1.0;
                *tap = (
                    reflect_index(base as isize + k as isize - 1, n),
                    keys_kernel(frac - offset),
                );
            }
            taps
        })
        .collect()
}

/// Synthesises the low-resolution input by a ×¼ bicubic downscale.
pub fn degrade(hr: &ImageBuffer) -> Result<ImageBuffer> {
    if !hr.width().is_multiple_of(4) || !hr.height().is_multiple_of(4) {
        return Err(Error::arg(format!(
            "degrade needs dimensions divisible by 4, got {}x{}",
            hr.width(),
            hr.height()
        )));
    }
    bicubic_resize(hr, hr.width() / 4, hr.height() / 4)
}
