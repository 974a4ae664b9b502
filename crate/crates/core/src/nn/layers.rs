//! Layer primitives: 2-D convolution, ReLU, pixel shuffle and channel
//! concatenation, each with an exact reverse-mode backward pass.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Element, TensorOf};

/// Zero-padding policy for convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Pad with `floor(k/2)` zeros so spatial dims are preserved.
    Same,
    /// No padding; output shrinks by `k - 1`.
    Valid,
}

/// A convolution with an `out×in×kH×kW` kernel and an optional per-channel
/// bias. Only the 3×3 and 1×1 kernels used by the architecture are allowed.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub weight: TensorOf<T>,
    pub bias: Option<TensorOf<T>>,
}

/// Work threshold below which convolutions stay single-threaded.
const PAR_MACS_THRESHOLD: usize = 1 << 22;

impl<T: Element> Conv2d<T> {
    pub fn new(weight: TensorOf<T>, bias: Option<TensorOf<T>>) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 4 {
            return Err(Error::shape(format!(
                "conv weight must be rank 4, got {:?}",
                ws
            )));
        }
        let (kh, kw) = (ws[2], ws[3]);
        if !((kh == 3 && kw == 3) || (kh == 1 && kw == 1)) {
            return Err(Error::shape(format!(
                "unsupported kernel size {}x{}; only 3x3 and 1x1 are used",
                kh, kw
            )));
        }
        if let Some(b) = &bias {
            if b.shape() != [ws[0]] {
                return Err(Error::shape(format!(
                    "bias shape {:?} does not match {} output channels",
                    b.shape(),
                    ws[0]
                )));
            }
        }
        Ok(Conv2d { weight, bias })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, k: usize, bias: bool) -> Self {
        Conv2d::new(
            TensorOf::zeros(&[out_ch, in_ch, k, k]),
            bias.then(|| TensorOf::zeros(&[out_ch])),
        )
        .expect("valid kernel size")
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn param_count(&self) -> u64 {
        self.weight.len() as u64 + self.bias.as_ref().map_or(0, |b| b.len() as u64)
    }

    /// Multiply-accumulates per forward pass at the given output resolution:
    /// `k²·C_in` per output element, plus one for the bias when present.
    pub fn macs(&self, out_h: usize, out_w: usize) -> u64 {
        let per_elem = self.kernel() as u64 * self.kernel() as u64 * self.in_channels() as u64
            + u64::from(self.bias.is_some());
        self.out_channels() as u64 * out_h as u64 * out_w as u64 * per_elem
    }

    /// Cross-correlation of `input` (`C_in×H×W`) with the kernel plus bias.
    pub fn forward(&self, input: &TensorOf<T>, padding: Padding) -> Result<TensorOf<T>> {
        let (c_in, h, w) = dims3(input)?;
        if c_in != self.in_channels() {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {}",
                self.in_channels(),
                c_in
            )));
        }
        let k = self.kernel();
        let pad = match padding {
            Padding::Same => k / 2,
            Padding::Valid => 0,
        };
        if padding == Padding::Valid && (h < k || w < k) {
            return Err(Error::shape(format!(
                "valid conv needs input at least {}x{}, got {}x{}",
                k, k, h, w
            )));
        }
        let (out_h, out_w) = (h + 2 * pad - k + 1, w + 2 * pad - k + 1);
        let padded = pad_input(input, c_in, h, w, pad);
        let (ph, pw) = (h + 2 * pad, w + 2 * pad);

        let out_ch = self.out_channels();
        let mut out = vec![T::zero(); out_ch * out_h * out_w];
        let wdata = self.weight.data();
        let plane = out_h * out_w;

        let run_channel = |oc: usize, chunk: &mut [T]| {
            if let Some(b) = &self.bias {
                chunk.fill(b.data()[oc]);
            }
            for ic in 0..c_in {
                let in_plane = &padded[ic * ph * pw..(ic + 1) * ph * pw];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wdata[((oc * c_in + ic) * k + ky) * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        for y in 0..out_h {
                            let src = &in_plane[(y + ky) * pw + kx..(y + ky) * pw + kx + out_w];
                            let dst = &mut chunk[y * out_w..(y + 1) * out_w];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d = *d + wv * *s;
                            }
                        }
                    }
                }
            }
        };

        if out.len() * k * k * c_in > PAR_MACS_THRESHOLD {
            out.par_chunks_mut(plane)
                .enumerate()
                .for_each(|(oc, chunk)| run_channel(oc, chunk));
        } else {
            for (oc, chunk) in out.chunks_mut(plane).enumerate() {
                run_channel(oc, chunk);
            }
        }

        Ok(TensorOf::from_parts(vec![out_ch, out_h, out_w], out))
    }

    /// Gradients of the convolution: weight, bias (when present) and input.
    pub fn backward(
        &self,
        input: &TensorOf<T>,
        grad_out: &TensorOf<T>,
        padding: Padding,
    ) -> Result<ConvGrads<T>> {
        let (c_in, h, w) = dims3(input)?;
        let (c_out, out_h, out_w) = dims3(grad_out)?;
        if c_in != self.in_channels() || c_out != self.out_channels() {
            return Err(Error::shape("conv backward channel mismatch".to_string()));
        }
        let k = self.kernel();
        let pad = match padding {
            Padding::Same => k / 2,
            Padding::Valid => 0,
        };
        if (out_h, out_w) != (h + 2 * pad - k + 1, w + 2 * pad - k + 1) {
            return Err(Error::shape(
                "grad_out size inconsistent with conv output".to_string(),
            ));
        }
        let padded = pad_input(input, c_in, h, w, pad);
        let (ph, pw) = (h + 2 * pad, w + 2 * pad);
        let go = grad_out.data();

        let grad_bias = self.bias.as_ref().map(|_| {
            let mut gb = vec![T::zero(); c_out];
            for (oc, g) in gb.iter_mut().enumerate() {
                let mut acc = T::zero();
                for v in &go[oc * out_h * out_w..(oc + 1) * out_h * out_w] {
                    acc = acc + *v;
                }
                *g = acc;
            }
            TensorOf::from_parts(vec![c_out], gb)
        });

        // dL/dw[oc,ic,ky,kx] = sum_{y,x} go[oc,y,x] * padded[ic,y+ky,x+kx]
        let mut gw = vec![T::zero(); c_out * c_in * k * k];
        let kernel_block = c_in * k * k;
        let compute_gw = |oc: usize, block: &mut [T]| {
            let go_plane = &go[oc * out_h * out_w..(oc + 1) * out_h * out_w];
            for ic in 0..c_in {
                let in_plane = &padded[ic * ph * pw..(ic + 1) * ph * pw];
                for ky in 0..k {
                    for kx in 0..k {
                        let mut acc = T::zero();
                        for y in 0..out_h {
                            let src = &in_plane[(y + ky) * pw + kx..(y + ky) * pw + kx + out_w];
                            let g = &go_plane[y * out_w..(y + 1) * out_w];
                            for (gv, sv) in g.iter().zip(src) {
                                acc = acc + *gv * *sv;
                            }
                        }
                        block[(ic * k + ky) * k + kx] = acc;
                    }
                }
            }
        };
        if go.len() * kernel_block > PAR_MACS_THRESHOLD {
            gw.par_chunks_mut(kernel_block)
                .enumerate()
                .for_each(|(oc, block)| compute_gw(oc, block));
        } else {
            for (oc, block) in gw.chunks_mut(kernel_block).enumerate() {
                compute_gw(oc, block);
            }
        }

        // dL/dpadded[ic,y+ky,x+kx] += w[oc,ic,ky,kx] * go[oc,y,x]
        let wdata = self.weight.data();
        let mut gpad = vec![T::zero(); c_in * ph * pw];
        let compute_gin = |ic: usize, plane: &mut [T]| {
            for oc in 0..c_out {
                let go_plane = &go[oc * out_h * out_w..(oc + 1) * out_h * out_w];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wdata[((oc * c_in + ic) * k + ky) * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        for y in 0..out_h {
                            let g = &go_plane[y * out_w..(y + 1) * out_w];
                            let dst =
                                &mut plane[(y + ky) * pw + kx..(y + ky) * pw + kx + out_w];
                            for (d, gv) in dst.iter_mut().zip(g) {
                                *d = *d + wv * *gv;
                            }
                        }
                    }
                }
            }
        };
        if go.len() * k * k * c_in > PAR_MACS_THRESHOLD {
            gpad.par_chunks_mut(ph * pw)
                .enumerate()
                .for_each(|(ic, plane)| compute_gin(ic, plane));
        } else {
            for (ic, plane) in gpad.chunks_mut(ph * pw).enumerate() {
                compute_gin(ic, plane);
            }
        }

        let grad_input = if pad == 0 {
            TensorOf::from_parts(vec![c_in, h, w], gpad)
        } else {
            let mut gin = vec![T::zero(); c_in * h * w];
            for ic in 0..c_in {
                for y in 0..h {
                    let src = &gpad[ic * ph * pw + (y + pad) * pw + pad..][..w];
                    gin[ic * h * w + y * w..ic * h * w + (y + 1) * w].copy_from_slice(src);
                }
            }
            TensorOf::from_parts(vec![c_in, h, w], gin)
        };

        Ok(ConvGrads {
            weight: TensorOf::from_parts(vec![c_out, c_in, k, k], gw),
            bias: grad_bias,
            input: grad_input,
        })
    }
}

pub struct ConvGrads<T> {
    pub weight: TensorOf<T>,
    pub bias: Option<TensorOf<T>>,
    pub input: TensorOf<T>,
}

fn pad_input<T: Element>(input: &TensorOf<T>, c: usize, h: usize, w: usize, pad: usize) -> Vec<T> {
    if pad == 0 {
        return input.data().to_vec();
    }
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut padded = vec![T::zero(); c * ph * pw];
    let data = input.data();
    for ic in 0..c {
        for y in 0..h {
            let src = &data[ic * h * w + y * w..ic * h * w + (y + 1) * w];
            padded[ic * ph * pw + (y + pad) * pw + pad..][..w].copy_from_slice(src);
        }
    }
    padded
}

pub(crate) fn dims3<T: Element>(t: &TensorOf<T>) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [c, h, w] => Ok((*c, *h, *w)),
        s => Err(Error::shape(format!("expected C×H×W tensor, got {:?}", s))),
    }
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Element>(input: &TensorOf<T>) -> TensorOf<T> {
    TensorOf::from_parts(
        input.shape().to_vec(),
        input
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { T::zero() })
            .collect(),
    )
}

/// Passes the upstream gradient where the forward input was strictly
/// positive; the subgradient at 0 is pinned to 0.
pub fn relu_backward<T: Element>(input: &TensorOf<T>, grad_out: &TensorOf<T>) -> TensorOf<T> {
    debug_assert_eq!(input.shape(), grad_out.shape());
    TensorOf::from_parts(
        input.shape().to_vec(),
        input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
            .collect(),
    )
}

/// Rearranges `C×H×W` into `(C/r²)×(rH)×(rW)`:
/// `out(c, h·r+i, w·r+j) = in(c·r² + i·r + j, h, w)`.
pub fn pixel_shuffle<T: Element>(input: &TensorOf<T>, r: usize) -> Result<TensorOf<T>> {
    if r == 0 {
        return Err(Error::arg("pixel_shuffle factor must be >= 1".to_string()));
    }
    let (c, h, w) = dims3(input)?;
    if c % (r * r) != 0 {
        return Err(Error::shape(format!(
            "pixel_shuffle: {} channels not divisible by r²={}",
            c,
            r * r
        )));
    }
    if r == 1 {
        return Ok(input.clone());
    }
    let out_c = c / (r * r);
    let (out_h, out_w) = (h * r, w * r);
    let mut out = vec![T::zero(); out_c * out_h * out_w];
    let data = input.data();
    for oc in 0..out_c {
        for i in 0..r {
            for j in 0..r {
                let in_plane = &data[(oc * r * r + i * r + j) * h * w..][..h * w];
                for y in 0..h {
                    for x in 0..w {
                        out[oc * out_h * out_w + (y * r + i) * out_w + (x * r + j)] =
                            in_plane[y * w + x];
                    }
                }
            }
        }
    }
    Ok(TensorOf::from_parts(vec![out_c, out_h, out_w], out))
}

/// Inverse of [`pixel_shuffle`]; also serves as its backward pass.
pub fn pixel_unshuffle<T: Element>(input: &TensorOf<T>, r: usize) -> Result<TensorOf<T>> {
    if r == 0 {
        return Err(Error::arg("pixel_unshuffle factor must be >= 1".to_string()));
    }
    let (c, h, w) = dims3(input)?;
    if h % r != 0 || w % r != 0 {
        return Err(Error::shape(format!(
            "pixel_unshuffle: {}x{} not divisible by r={}",
            h, w, r
        )));
    }
    if r == 1 {
        return Ok(input.clone());
    }
    let (in_h, in_w) = (h / r, w / r);
    let out_c = c * r * r;
    let mut out = vec![T::zero(); out_c * in_h * in_w];
    let data = input.data();
    for ic in 0..c {
        for i in 0..r {
            for j in 0..r {
                let out_plane = &mut out[(ic * r * r + i * r + j) * in_h * in_w..][..in_h * in_w];
                for y in 0..in_h {
                    for x in 0..in_w {
                        out_plane[y * in_w + x] = data[ic * h * w + (y * r + i) * w + (x * r + j)];
                    }
                }
            }
        }
    }
    Ok(TensorOf::from_parts(vec![out_c, in_h, in_w], out))
}

/// Stacks `a` then `b` along the channel axis.
pub fn concat_channels<T: Element>(a: &TensorOf<T>, b: &TensorOf<T>) -> Result<TensorOf<T>> {
    let (ca, ha, wa) = dims3(a)?;
    let (cb, hb, wb) = dims3(b)?;
    if (ha, wa) != (hb, wb) {
        return Err(Error::shape(format!(
            "concat: spatial dims {}x{} vs {}x{}",
            ha, wa, hb, wb
        )));
    }
    let mut data = Vec::with_capacity((ca + cb) * ha * wa);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Ok(TensorOf::from_parts(vec![ca + cb, ha, wa], data))
}

/// Backward of [`concat_channels`]: splits the gradient after `c_first`
/// channels.
pub fn split_channels<T: Element>(
    grad: &TensorOf<T>,
    c_first: usize,
) -> Result<(TensorOf<T>, TensorOf<T>)> {
    let (c, h, w) = dims3(grad)?;
    if c_first == 0 || c_first >= c {
        return Err(Error::shape(format!(
            "split at {} outside 1..{}",
            c_first, c
        )));
    }
    let data = grad.data();
    let first = TensorOf::from_parts(vec![c_first, h, w], data[..c_first * h * w].to_vec());
    let second = TensorOf::from_parts(
        vec![c - c_first, h, w],
        data[c_first * h * w..].to_vec(),
    );
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn ones_conv(out_ch: usize, in_ch: usize, k: usize) -> Conv2d<f32> {
        Conv2d::new(
            Tensor::filled(&[out_ch, in_ch, k, k], 1.0),
            Some(Tensor::zeros(&[out_ch])),
        )
        .unwrap()
    }

    #[test]
    fn conv_all_ones_same_padding() {
        // 1×3×3 all-ones input, one 3×3 all-ones kernel, bias 0:
        // centre sums 9 contributions, corners 4.
        let input = Tensor::filled(&[1, 3, 3], 1.0);
        let out = ones_conv(1, 1, 3).forward(&input, Padding::Same).unwrap();
        assert_eq!(out.shape(), &[1, 3, 3]);
        let d = out.data();
        assert_eq!(d[4], 9.0);
        assert_eq!(d[0], 4.0);
        assert_eq!(d[2], 4.0);
        assert_eq!(d[6], 4.0);
        assert_eq!(d[8], 4.0);
        assert_eq!(d[1], 6.0);
    }

    #[test]
    fn conv_zero_weights_gives_bias() {
        let input = Tensor::from_vec(&[2, 2, 2], (0..8).map(|v| v as f32).collect()).unwrap();
        let conv = Conv2d::new(
            Tensor::zeros(&[3, 2, 3, 3]),
            Some(Tensor::from_vec(&[3], vec![1.5, -2.0, 0.0]).unwrap()),
        )
        .unwrap();
        let out = conv.forward(&input, Padding::Same).unwrap();
        for (oc, &b) in [1.5f32, -2.0, 0.0].iter().enumerate() {
            assert!(out.data()[oc * 4..(oc + 1) * 4].iter().all(|&v| v == b));
        }
    }

    #[test]
    fn conv_1x1_scales() {
        let input = Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let conv = Conv2d::new(
            Tensor::from_vec(&[1, 1, 1, 1], vec![2.5]).unwrap(),
            Some(Tensor::zeros(&[1])),
        )
        .unwrap();
        let out = conv.forward(&input, Padding::Same).unwrap();
        assert_eq!(out.data(), &[2.5, 5.0, 7.5, 10.0]);
    }

    #[test]
    fn conv_channel_mismatch_errors() {
        let input = Tensor::zeros(&[2, 4, 4]);
        let conv = ones_conv(1, 3, 3);
        assert!(matches!(
            conv.forward(&input, Padding::Same),
            Err(crate::error::Error::Shape(_))
        ));
    }

    #[test]
    fn conv_same_preserves_dims() {
        for (h, w) in [(1, 1), (1, 5), (4, 3), (7, 7)] {
            let input = Tensor::filled(&[2, h, w], 0.5);
            let out = ones_conv(3, 2, 3).forward(&input, Padding::Same).unwrap();
            assert_eq!(out.shape(), &[3, h, w]);
        }
    }

    #[test]
    fn conv_rejects_bad_kernel() {
        assert!(Conv2d::new(Tensor::zeros(&[1, 1, 5, 5]), None).is_err());
        assert!(Conv2d::new(Tensor::zeros(&[1, 1, 3, 1]), None).is_err());
    }

    #[test]
    fn conv_valid_padding_shrinks() {
        let input = Tensor::filled(&[1, 4, 5], 1.0);
        let out = ones_conv(1, 1, 3).forward(&input, Padding::Valid).unwrap();
        assert_eq!(out.shape(), &[1, 2, 3]);
        // every output element sees a full 3x3 window of ones
        assert!(out.data().iter().all(|&v| v == 9.0));
        // too-small input is rejected
        let tiny = Tensor::filled(&[1, 2, 2], 1.0);
        assert!(ones_conv(1, 1, 3).forward(&tiny, Padding::Valid).is_err());
    }

    #[test]
    fn relu_examples() {
        let t = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);

        let neg = Tensor::filled(&[2, 2], -3.0);
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));

        let pos = Tensor::from_vec(&[4], vec![0.0, 1.0, 2.0, 3.5]).unwrap();
        assert_eq!(relu(&pos).data(), pos.data());
    }

    #[test]
    fn relu_backward_subgradient() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        let g = Tensor::from_vec(&[3], vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(relu_backward(&x, &g).data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn pixel_shuffle_shape_and_mapping() {
        let t = Tensor::from_vec(&[4, 2, 2], (0..16).map(|v| v as f32).collect()).unwrap();
        let out = pixel_shuffle(&t, 2).unwrap();
        assert_eq!(out.shape(), &[1, 4, 4]);
        // channels [a,b,c,d] at pixel (0,0) land as [[a,b],[c,d]]
        let a = t.data()[0];
        let b = t.data()[4];
        let c = t.data()[8];
        let d = t.data()[12];
        assert_eq!(out.data()[0], a);
        assert_eq!(out.data()[1], b);
        assert_eq!(out.data()[4], c);
        assert_eq!(out.data()[5], d);
    }

    #[test]
    fn pixel_shuffle_r1_identity() {
        let t = Tensor::from_vec(&[3, 2, 2], (0..12).map(|v| v as f32).collect()).unwrap();
        assert_eq!(pixel_shuffle(&t, 1).unwrap().data(), t.data());
    }

    #[test]
    fn pixel_shuffle_divisibility_error() {
        let t = Tensor::zeros(&[3, 2, 2]);
        assert!(pixel_shuffle(&t, 2).is_err());
    }

    #[test]
    fn pixel_shuffle_unshuffle_round_trip() {
        let t = Tensor::from_vec(&[8, 3, 2], (0..48).map(|v| v as f32).collect()).unwrap();
        let s = pixel_shuffle(&t, 2).unwrap();
        let back = pixel_unshuffle(&s, 2).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert_eq!(back.data(), t.data());
        // value multiset preserved (rearrangement only)
        let mut a: Vec<_> = t.data().to_vec();
        let mut b: Vec<_> = s.data().to_vec();
        a.sort_by(f32::total_cmp);
        b.sort_by(f32::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn concat_split_round_trip() {
        let a = Tensor::filled(&[2, 3, 3], 1.0);
        let b = Tensor::filled(&[3, 3, 3], 2.0);
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[5, 3, 3]);
        let (ga, gb) = split_channels(&c, 2).unwrap();
        assert_eq!(ga.data(), a.data());
        assert_eq!(gb.data(), b.data());
    }

    #[test]
    fn conv_backward_matches_fd_spot_check() {
        // Small deterministic f64 check of all three gradient paths.
        let input: TensorOf<f64> = TensorOf::from_vec(
            &[2, 4, 4],
            (0..32).map(|v| ((v * 7 % 13) as f64) / 13.0 - 0.4).collect(),
        )
        .unwrap();
        let conv = Conv2d::new(
            TensorOf::<f64>::from_vec(
                &[2, 2, 3, 3],
                (0..36).map(|v| ((v * 5 % 11) as f64) / 11.0 - 0.5).collect(),
            )
            .unwrap(),
            Some(TensorOf::<f64>::from_vec(&[2], vec![0.1, -0.2]).unwrap()),
        )
        .unwrap();
        let loss = |c: &Conv2d<f64>, x: &TensorOf<f64>| -> f64 {
            let y = c.forward(x, Padding::Same).unwrap();
            y.data().iter().map(|v| v * v).sum::<f64>()
        };
        let y = conv.forward(&input, Padding::Same).unwrap();
        let grad_out = TensorOf::from_parts(
            y.shape().to_vec(),
            y.data().iter().map(|v| 2.0 * v).collect(),
        );
        let grads = conv.backward(&input, &grad_out, Padding::Same).unwrap();

        let h = 1e-6;
        // weight gradient
        for idx in [0usize, 7, 17, 35] {
            let mut cp = conv.clone();
            cp.weight.data_mut()[idx] += h;
            let up = loss(&cp, &input);
            cp.weight.data_mut()[idx] -= 2.0 * h;
            let dn = loss(&cp, &input);
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - grads.weight.data()[idx]).abs() < 1e-5);
        }
        // bias gradient
        for idx in [0usize, 1] {
            let mut cp = conv.clone();
            cp.bias.as_mut().unwrap().data_mut()[idx] += h;
            let up = loss(&cp, &input);
            cp.bias.as_mut().unwrap().data_mut()[idx] -= 2.0 * h;
            let dn = loss(&cp, &input);
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - grads.bias.as_ref().unwrap().data()[idx]).abs() < 1e-5);
        }
        // input gradient
        for idx in [0usize, 5, 21, 31] {
            let mut xp = input.clone();
            xp.data_mut()[idx] += h;
            let up = loss(&conv, &xp);
            xp.data_mut()[idx] -= 2.0 * h;
            let dn = loss(&conv, &xp);
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - grads.input.data()[idx]).abs() < 1e-5);
        }
    }
}
