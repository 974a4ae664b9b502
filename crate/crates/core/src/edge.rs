//! Classical edge detection (Sobel, Canny) and assembly of the
//! edge-augmented network input.
//!
//! All filters use reflected borders, so constant images never produce
//! phantom edges. Canny thresholds live on the raw gradient-magnitude scale
//! of 8-bit images (Sobel responses up to 4·255 = 1020 per axis).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayMap, ImageBuffer};
use crate::tensor::Tensor;

/// Largest |Gx| or |Gy| a Sobel kernel can produce on 0–255 inputs; used to
/// normalise edge channels into the same numeric regime as image channels.
pub const SOBEL_MAX_RESPONSE: f32 = 1020.0;

/// Which edge representation is concatenated onto the RGB input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    None,
    #[default]
    Canny,
    Sobel,
}

impl EdgeMode {
    /// Channels appended to RGB: none → 0, canny → 1 (binary map),
    /// sobel → 2 (signed Gx, Gy).
    pub fn extra_channels(self) -> usize {
        match self {
            EdgeMode::None => 0,
            EdgeMode::Canny => 1,
            EdgeMode::Sobel => 2,
        }
    }
}

impl std::fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeMode::None => "none",
            EdgeMode::Canny => "canny",
            EdgeMode::Sobel => "sobel",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CannyParams {
    /// Gaussian standard deviation in pixels.
    pub sigma: f32,
    /// Gaussian kernel size; odd, at least 3.
    pub ksize: usize,
    /// Low hysteresis threshold on the gradient-magnitude scale.
    pub low: f32,
    /// High hysteresis threshold; strong edges satisfy `G > high`.
    pub high: f32,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.4,
            ksize: 5,
            low: 100.0,
            high: 200.0,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::arg(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.ksize.is_multiple_of(2) || self.ksize < 3 {
            return Err(Error::arg(format!(
                "kernel size must be odd and >= 3, got {}",
                self.ksize
            )));
        }
        if !(self.low > 0.0 && self.low <= self.high) {
            return Err(Error::arg(format!(
                "thresholds must satisfy 0 < low <= high, got {}/{}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// The edge channels fed to the network.
#[derive(Clone, Debug)]
pub enum EdgeChannels {
    /// Signed gradients normalised to `[-1, 1]`.
    SobelXy { gx: GrayMap, gy: GrayMap },
    /// Values exactly 0 or 1.
    CannyBinary { mask: GrayMap },
}

/// Edge-extraction result plus the gradient magnitude and direction kept
/// for diagnostics.
#[derive(Clone, Debug)]
pub struct EdgeMap {
    pub channels: EdgeChannels,
    pub magnitude: GrayMap,
    /// Full-quadrant atan2 direction in radians; 0 where the gradient
    /// vanishes.
    pub direction: GrayMap,
}

/// Separable Gaussian blur; the sampled kernel is renormalised to sum 1 and
/// borders reflect.
pub fn gaussian_blur(gray: &GrayMap, sigma: f32, ksize: usize) -> Result<GrayMap> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::arg(format!("sigma must be > 0, got {sigma}")));
    }
    if ksize.is_multiple_of(2) || ksize < 3 {
        return Err(Error::arg(format!(
            "kernel size must be odd and >= 3, got {ksize}"
        )));
    }
    let kernel = gaussian_kernel(sigma, ksize);
    let radius = (ksize / 2) as isize;
    let (w, h) = (gray.width(), gray.height());

    // horizontal then vertical pass, accumulated in f64
    let mut mid = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = crate::image::reflect_index(x as isize + k as isize - radius, w);
                acc += kv * gray.at(sx, y) as f64;
            }
            mid[y * w + x] = acc;
        }
    }
    let mut out = GrayMap::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = crate::image::reflect_index(y as isize + k as isize - radius, h);
                acc += kv * mid[sy * w + x];
            }
            out.set(x, y, acc as f32);
        }
    }
    Ok(out)
}

/// Samples `exp(-x²/2σ²)` at integer offsets and renormalises to sum 1.
pub fn gaussian_kernel(sigma: f32, ksize: usize) -> Vec<f64> {
    let radius = (ksize / 2) as i32;
    let sigma = sigma as f64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-f64::from(i * i) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}

const SOBEL_X: [[f32; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f32; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Raw horizontal and vertical Sobel responses (cross-correlation with the
/// standard kernels, reflected borders).
pub fn sobel_gradients(gray: &GrayMap) -> (GrayMap, GrayMap) {
    let (w, h) = (gray.width(), gray.height());
    let mut gx = GrayMap::zeros(w, h);
    let mut gy = GrayMap::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut ax = 0.0f32;
            let mut ay = 0.0f32;
            for (j, (rx, ry)) in SOBEL_X.iter().zip(&SOBEL_Y).enumerate() {
                let sy = crate::image::reflect_index(y as isize + j as isize - 1, h);
                for i in 0..3 {
                    let sx = crate::image::reflect_index(x as isize + i as isize - 1, w);
                    let v = gray.at(sx, sy);
                    ax += rx[i] * v;
                    ay += ry[i] * v;
                }
            }
            gx.set(x, y, ax);
            gy.set(x, y, ay);
        }
    }
    (gx, gy)
}

/// Gradient magnitude `√(Gx²+Gy²)` and full-quadrant direction
/// `atan2(Gy, Gx)`; the direction of a zero gradient is pinned to 0.
pub fn gradient_polar(gx: &GrayMap, gy: &GrayMap) -> Result<(GrayMap, GrayMap)> {
    if (gx.width(), gx.height()) != (gy.width(), gy.height()) {
        return Err(Error::shape(format!(
            "gradient components {}x{} vs {}x{}",
            gx.width(),
            gx.height(),
            gy.width(),
            gy.height()
        )));
    }
    let (w, h) = (gx.width(), gx.height());
    let mut mag = GrayMap::zeros(w, h);
    let mut dir = GrayMap::zeros(w, h);
    for (i, (&x, &y)) in gx.data().iter().zip(gy.data()).enumerate() {
        mag.data_mut()[i] = x.hypot(y);
        dir.data_mut()[i] = if x == 0.0 && y == 0.0 {
            0.0
        } else {
            y.atan2(x)
        };
    }
    Ok((mag, dir))
}

/// Full Canny pipeline: Gaussian blur, Sobel gradients, non-maximum
/// suppression along the quantised gradient direction, double threshold and
/// 8-connected hysteresis from strong pixels through weak ones.
pub fn canny(gray: &GrayMap, params: &CannyParams) -> Result<EdgeMap> {
    params.validate()?;
    let blurred = gaussian_blur(gray, params.sigma, params.ksize)?;
    let (gx, gy) = sobel_gradients(&blurred);
    let (magnitude, direction) = gradient_polar(&gx, &gy)?;
    let thinned = non_max_suppress(&magnitude, &direction);
    let mask = hysteresis(&thinned, params.low, params.high);
    Ok(EdgeMap {
        channels: EdgeChannels::CannyBinary { mask },
        magnitude,
        direction,
    })
}

/// The non-maximum-suppression stage of [`canny`]: keeps the pixels whose
/// magnitude is >= both neighbours along the quantised gradient direction
/// (0°, 45°, 90°, 135°; ties survive); border pixels, where a neighbour
/// would fall outside the image, are suppressed.
pub fn non_max_suppress(mag: &GrayMap, dir: &GrayMap) -> GrayMap {
    let (w, h) = (mag.width(), mag.height());
    let mut out = GrayMap::zeros(w, h);
    if w < 3 || h < 3 {
        return out;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let m = mag.at(x, y);
            let (dx, dy) = quantised_offsets(dir.at(x, y));
            let n1 = mag.at((x as isize + dx) as usize, (y as isize + dy) as usize);
            let n2 = mag.at((x as isize - dx) as usize, (y as isize - dy) as usize);
            if m >= n1 && m >= n2 {
                out.set(x, y, m);
            }
        }
    }
    out
}

/// Quantises a gradient direction to one of 0°, 45°, 90°, 135° and returns
/// the pixel offset along it (y grows downwards).
fn quantised_offsets(theta: f32) -> (isize, isize) {
    let mut deg = theta.to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if !(22.5..157.5).contains(&deg) {
        (1, 0) // 0°: east-west
    } else if deg < 67.5 {
        (1, 1) // 45°
    } else if deg < 112.5 {
        (0, 1) // 90°: north-south
    } else {
        (-1, 1) // 135°
    }
}

/// Double threshold plus breadth-first edge tracking: strong pixels
/// (`G > high`) seed the output; weak pixels (`low <= G <= high`) join when
/// 8-connected to it.
fn hysteresis(thinned: &GrayMap, low: f32, high: f32) -> GrayMap {
    let (w, h) = (thinned.width(), thinned.height());
    let mut mask = GrayMap::zeros(w, h);
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if thinned.at(x, y) > high && mask.at(x, y) == 0.0 {
                mask.set(x, y, 1.0);
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if mask.at(nx, ny) == 0.0 && thinned.at(nx, ny) >= low {
                                mask.set(nx, ny, 1.0);
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    mask
}

/// Sobel edge map with channels normalised to `[-1, 1]`.
pub fn sobel_edge_map(gray: &GrayMap) -> EdgeMap {
    let (gx, gy) = sobel_gradients(gray);
    let (magnitude, direction) = gradient_polar(&gx, &gy).expect("components share a shape");
    let norm = |g: &GrayMap| {
        GrayMap::new(
            g.width(),
            g.height(),
            g.data().iter().map(|&v| v / SOBEL_MAX_RESPONSE).collect(),
        )
        .expect("shape preserved")
    };
    EdgeMap {
        channels: EdgeChannels::SobelXy {
            gx: norm(&gx),
            gy: norm(&gy),
        },
        magnitude,
        direction,
    }
}

/// Stacks the network input: RGB scaled to `[0, 1]` as channels 0–2, then
/// the edge channels for the requested mode. Edges are computed on the
/// BT.601 grayscale of the input.
pub fn build_sr_input(rgb: &ImageBuffer, mode: EdgeMode, params: &CannyParams) -> Result<Tensor> {
    let base = rgb.to_tensor();
    let (c, h, w) = (base.shape()[0], base.shape()[1], base.shape()[2]);
    if c != 3 {
        return Err(Error::arg("network input assembly expects RGB".to_string()));
    }
    let mut data = base.into_data();
    match mode {
        EdgeMode::None => {}
        EdgeMode::Canny => {
            let edges = canny(&rgb.to_luma_f32(), params)?;
            let EdgeChannels::CannyBinary { mask } = edges.channels else {
                unreachable!()
            };
            data.extend_from_slice(mask.data());
        }
        EdgeMode::Sobel => {
            let edges = sobel_edge_map(&rgb.to_luma_f32());
            let EdgeChannels::SobelXy { gx, gy } = edges.channels else {
                unreachable!()
            };
            data.extend_from_slice(gx.data());
            data.extend_from_slice(gy.data());
        }
    }
    Ok(Tensor::from_parts(
        vec![3 + mode.extra_channels(), h, w],
        data,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_from(w: usize, h: usize, f: impl Fn(usize, usize) -> f32) -> GrayMap {
        let mut m = GrayMap::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                m.set(x, y, f(x, y));
            }
        }
        m
    }

    /// A step edge rendered at a pixel centre: 0 left of the transition
    /// column, 128 on it, 255 right of it.
    fn step_image(w: usize, h: usize, step_col: usize) -> GrayMap {
        gray_from(w, h, |x, _| match x.cmp(&step_col) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 128.0,
            std::cmp::Ordering::Greater => 255.0,
        })
    }

    #[test]
    fn blur_preserves_constants() {
        let img = gray_from(9, 7, |_, _| 42.0);
        let out = gaussian_blur(&img, 1.4, 5).unwrap();
        for &v in out.data() {
            assert_eq!(v, 42.0);
        }
    }

    #[test]
    fn blur_of_impulse_is_kernel() {
        let mut img = GrayMap::zeros(11, 11);
        img.set(5, 5, 1.0);
        let out = gaussian_blur(&img, 1.0, 5).unwrap();
        let k = gaussian_kernel(1.0, 5);
        for j in 0..5 {
            for i in 0..5 {
                let expect = (k[i] * k[j]) as f32;
                assert!((out.at(3 + i, 3 + j) - expect).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.3f32, 1.0, 1.4, 3.7] {
            for ksize in [3usize, 5, 9] {
                let s: f64 = gaussian_kernel(sigma, ksize).iter().sum();
                assert!((s - 1.0).abs() < 1e-9, "sigma {sigma} ksize {ksize}: {s}");
            }
        }
    }

    #[test]
    fn blur_rejects_even_kernel() {
        let img = GrayMap::zeros(4, 4);
        assert!(gaussian_blur(&img, 1.0, 4).is_err());
        assert!(gaussian_blur(&img, 0.0, 5).is_err());
    }

    #[test]
    fn sobel_on_vertical_step() {
        // columns [0, 0, 255, 255]: the two middle columns see 4·255 = 1020
        let img = gray_from(4, 5, |x, _| if x < 2 { 0.0 } else { 255.0 });
        let (gx, gy) = sobel_gradients(&img);
        for y in 1..4 {
            assert_eq!(gx.at(1, y), 1020.0);
            assert_eq!(gx.at(2, y), 1020.0);
            assert_eq!(gx.at(0, y), 0.0);
            assert_eq!(gx.at(3, y), 0.0);
            for x in 0..4 {
                assert_eq!(gy.at(x, y), 0.0);
            }
        }
    }

    #[test]
    fn sobel_of_constant_is_zero() {
        let img = gray_from(6, 6, |_, _| 99.0);
        let (gx, gy) = sobel_gradients(&img);
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(gy.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sobel_transpose_symmetry() {
        let img = gray_from(5, 5, |x, y| ((x * 31 + y * 17) % 97) as f32);
        let transposed = gray_from(5, 5, |x, y| img.at(y, x));
        let (gx_t, _) = sobel_gradients(&transposed);
        let (_, gy) = sobel_gradients(&img);
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(gx_t.at(y, x), gy.at(x, y));
            }
        }
    }

    #[test]
    fn polar_examples() {
        let gx = GrayMap::new(1, 1, vec![3.0]).unwrap();
        let gy = GrayMap::new(1, 1, vec![4.0]).unwrap();
        let (m, t) = gradient_polar(&gx, &gy).unwrap();
        assert_eq!(m.at(0, 0), 5.0);
        assert!((t.at(0, 0) - 0.9273).abs() < 1e-4);

        let zero = GrayMap::new(1, 1, vec![0.0]).unwrap();
        let (m, t) = gradient_polar(&zero, &zero).unwrap();
        assert_eq!(m.at(0, 0), 0.0);
        assert_eq!(t.at(0, 0), 0.0);

        let neg = GrayMap::new(1, 1, vec![-1.0]).unwrap();
        let (_, t) = gradient_polar(&neg, &zero).unwrap();
        assert_eq!(t.at(0, 0), std::f32::consts::PI);
    }

    #[test]
    fn polar_shape_mismatch() {
        let a = GrayMap::zeros(2, 2);
        let b = GrayMap::zeros(3, 2);
        assert!(gradient_polar(&a, &b).is_err());
    }

    #[test]
    fn canny_constant_is_empty() {
        let img = gray_from(20, 20, |_, _| 77.0);
        let out = canny(&img, &CannyParams::default()).unwrap();
        let EdgeChannels::CannyBinary { mask } = out.channels else {
            panic!()
        };
        assert!(mask.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn canny_step_gives_one_pixel_line() {
        let img = step_image(24, 16, 12);
        let out = canny(&img, &CannyParams::default()).unwrap();
        let EdgeChannels::CannyBinary { mask } = out.channels else {
            panic!()
        };
        // interior rows carry exactly one edge pixel, at the step column
        for y in 3..13 {
            let cols: Vec<usize> = (0..24).filter(|&x| mask.at(x, y) == 1.0).collect();
            assert_eq!(cols, vec![12], "row {y}");
        }
    }

    #[test]
    fn canny_output_is_binary() {
        let img = gray_from(32, 32, |x, y| ((x * 53 + y * 29) % 256) as f32);
        let out = canny(&img, &CannyParams::default()).unwrap();
        let EdgeChannels::CannyBinary { mask } = out.channels else {
            panic!()
        };
        assert!(mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn canny_rejects_bad_thresholds() {
        let img = GrayMap::zeros(8, 8);
        let bad = CannyParams {
            low: 200.0,
            high: 100.0,
            ..CannyParams::default()
        };
        assert!(canny(&img, &bad).is_err());
        let zero_low = CannyParams {
            low: 0.0,
            ..CannyParams::default()
        };
        assert!(canny(&img, &zero_low).is_err());
    }

    #[test]
    fn sobel_edge_map_range() {
        let img = gray_from(10, 10, |x, y| if (x + y) % 2 == 0 { 0.0 } else { 255.0 });
        let map = sobel_edge_map(&img);
        let EdgeChannels::SobelXy { gx, gy } = map.channels else {
            panic!()
        };
        for v in gx.data().iter().chain(gy.data()) {
            assert!((-1.0..=1.0).contains(v));
        }
    }

    #[test]
    fn sr_input_channel_counts() {
        let img = ImageBuffer::new(
            12,
            10,
            3,
            (0..360).map(|v| (v * 7 % 256) as u8).collect(),
        )
        .unwrap();
        let params = CannyParams::default();

        let none = build_sr_input(&img, EdgeMode::None, &params).unwrap();
        assert_eq!(none.shape(), &[3, 10, 12]);
        for (i, &v) in none.data().iter().enumerate() {
            let c = i / 120;
            let px = i % 120;
            assert_eq!(v, img.data()[px * 3 + c] as f32 / 255.0);
        }

        let canny_t = build_sr_input(&img, EdgeMode::Canny, &params).unwrap();
        assert_eq!(canny_t.shape(), &[4, 10, 12]);
        assert!(canny_t.data()[360..].iter().all(|&v| v == 0.0 || v == 1.0));

        let sobel_t = build_sr_input(&img, EdgeMode::Sobel, &params).unwrap();
        assert_eq!(sobel_t.shape(), &[5, 10, 12]);
    }
}
