//! Network assembly: shallow feature extraction, a chain of residual
//! blocks, a global additive skip, two ×2 upsampling stages and a final
//! reconstruction convolution, for an overall ×4 scale.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::edge::EdgeMode;
use crate::error::{Error, Result};
use crate::nn::layers::{
    concat_channels, dims3, pixel_shuffle, pixel_unshuffle, relu, relu_backward, split_channels,
    Conv2d, Padding,
};
use crate::tensor::{Element, TensorOf};

/// Residual block flavour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// conv3×3 → ReLU → conv3×3, channel-concat with the block input,
    /// 1×1 reduction, additive skip. All convolutions carry biases.
    #[default]
    ResCat,
    /// Plain conv3×3 → ReLU → conv3×3 with additive skip and no biases;
    /// the network gains an extra post-body conv3×3 before the global add.
    EdsrBaseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of residual blocks.
    #[serde(default = "default_n_blocks")]
    pub n_blocks: usize,
    /// Feature-map width.
    #[serde(default = "default_filters")]
    pub filters: usize,
    /// Upscaling factor; only ×4 (two ×2 pixel-shuffle stages) is supported.
    #[serde(default = "default_scale")]
    pub scale: usize,
    /// Edge channels appended to the RGB input: none → 3 channels,
    /// canny → 4, sobel → 5.
    #[serde(default)]
    pub edge_mode: EdgeMode,
    #[serde(default)]
    pub block_kind: BlockKind,
}

fn default_n_blocks() -> usize {
    16
}
fn default_filters() -> usize {
    64
}
fn default_scale() -> usize {
    4
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig::esrpcb_c()
    }
}

impl NetworkConfig {
    /// Canny-guided variant: 4 input channels.
    pub fn esrpcb_c() -> Self {
        NetworkConfig {
            n_blocks: 16,
            filters: 64,
            scale: 4,
            edge_mode: EdgeMode::Canny,
            block_kind: BlockKind::ResCat,
        }
    }

    /// Sobel-guided variant: 5 input channels.
    pub fn esrpcb_s() -> Self {
        NetworkConfig {
            edge_mode: EdgeMode::Sobel,
            ..NetworkConfig::esrpcb_c()
        }
    }

    /// Plain-RGB baseline with bias-less plain blocks and a post-body conv.
    pub fn edsr_baseline() -> Self {
        NetworkConfig {
            edge_mode: EdgeMode::None,
            block_kind: BlockKind::EdsrBaseline,
            ..NetworkConfig::esrpcb_c()
        }
    }

    pub fn input_channels(&self) -> usize {
        3 + self.edge_mode.extra_channels()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale != 4 {
            return Err(Error::config(format!(
                "unsupported scale {}; only 4 is implemented",
                self.scale
            )));
        }
        if self.n_blocks == 0 {
            return Err(Error::config("n_blocks must be >= 1".to_string()));
        }
        if self.filters == 0 {
            return Err(Error::config("filters must be >= 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Block<T> {
    ResCat {
        conv1: Conv2d<T>,
        conv2: Conv2d<T>,
        fuse: Conv2d<T>,
    },
    Edsr {
        conv1: Conv2d<T>,
        conv2: Conv2d<T>,
    },
}

impl<T: Element> Block<T> {
    fn param_count(&self) -> u64 {
        match self {
            Block::ResCat { conv1, conv2, fuse } => {
                conv1.param_count() + conv2.param_count() + fuse.param_count()
            }
            Block::Edsr { conv1, conv2 } => conv1.param_count() + conv2.param_count(),
        }
    }

    fn macs(&self, h: usize, w: usize) -> u64 {
        match self {
            Block::ResCat { conv1, conv2, fuse } => {
                conv1.macs(h, w) + conv2.macs(h, w) + fuse.macs(h, w)
            }
            Block::Edsr { conv1, conv2 } => conv1.macs(h, w) + conv2.macs(h, w),
        }
    }

    fn forward(&self, x: &TensorOf<T>) -> Result<(TensorOf<T>, BlockCache<T>)> {
        match self {
            Block::ResCat { conv1, conv2, fuse } => {
                let pre1 = conv1.forward(x, Padding::Same)?;
                let act1 = relu(&pre1);
                let out2 = conv2.forward(&act1, Padding::Same)?;
                let cat = concat_channels(x, &out2)?;
                let fused = fuse.forward(&cat, Padding::Same)?;
                let out = fused.add(x)?;
                Ok((
                    out.clone(),
                    BlockCache {
                        pre1,
                        act1,
                        out2,
                        out,
                    },
                ))
            }
            Block::Edsr { conv1, conv2 } => {
                let pre1 = conv1.forward(x, Padding::Same)?;
                let act1 = relu(&pre1);
                let out2 = conv2.forward(&act1, Padding::Same)?;
                let out = out2.add(x)?;
                Ok((
                    out.clone(),
                    BlockCache {
                        pre1,
                        act1,
                        out2,
                        out,
                    },
                ))
            }
        }
    }

    /// Returns the block's parameter gradients (canonical order) and the
    /// gradient with respect to the block input.
    fn backward(
        &self,
        block_in: &TensorOf<T>,
        cache: &BlockCache<T>,
        grad_out: &TensorOf<T>,
    ) -> Result<(Vec<TensorOf<T>>, TensorOf<T>)> {
        match self {
            Block::ResCat { conv1, conv2, fuse } => {
                let filters = block_in.shape()[0];
                let cat = concat_channels(block_in, &cache.out2)?;
                let g_fuse = fuse.backward(&cat, grad_out, Padding::Same)?;
                let (g_skip, g_out2) = split_channels(&g_fuse.input, filters)?;
                let g_conv2 = conv2.backward(&cache.act1, &g_out2, Padding::Same)?;
                let g_pre1 = relu_backward(&cache.pre1, &g_conv2.input);
                let g_conv1 = conv1.backward(block_in, &g_pre1, Padding::Same)?;
                // Residual add + concat skip + conv1 path all fan into the input.
                let mut g_in = grad_out.clone();
                g_in.add_assign(&g_skip)?;
                g_in.add_assign(&g_conv1.input)?;
                let params = vec![
                    g_conv1.weight,
                    g_conv1.bias.expect("rescat convs carry biases"),
                    g_conv2.weight,
                    g_conv2.bias.expect("rescat convs carry biases"),
                    g_fuse.weight,
                    g_fuse.bias.expect("rescat convs carry biases"),
                ];
                Ok((params, g_in))
            }
            Block::Edsr { conv1, conv2 } => {
                let g_conv2 = conv2.backward(&cache.act1, grad_out, Padding::Same)?;
                let g_pre1 = relu_backward(&cache.pre1, &g_conv2.input);
                let g_conv1 = conv1.backward(block_in, &g_pre1, Padding::Same)?;
                let mut g_in = grad_out.clone();
                g_in.add_assign(&g_conv1.input)?;
                Ok((vec![g_conv1.weight, g_conv2.weight], g_in))
            }
        }
    }
}

struct BlockCache<T> {
    pre1: TensorOf<T>,
    act1: TensorOf<T>,
    out2: TensorOf<T>,
    out: TensorOf<T>,
}

/// Recorded activations from [`NetworkOf::forward_cached`], consumed by
/// [`NetworkOf::backward`].
pub struct ForwardCache<T> {
    input: TensorOf<T>,
    f0: TensorOf<T>,
    blocks: Vec<BlockCache<T>>,
    ff: TensorOf<T>,
    s1: TensorOf<T>,
    s2: TensorOf<T>,
}

impl<T: Element> ForwardCache<T> {
    /// Activation pattern of every ReLU in the pass. Two passes whose
    /// patterns differ are separated by at least one ReLU kink, where the
    /// loss is not differentiable.
    pub fn relu_mask(&self) -> Vec<bool> {
        self.blocks
            .iter()
            .flat_map(|b| b.pre1.data().iter().map(|&v| v > T::zero()))
            .collect()
    }
}

/// Parameter gradients in the network's canonical parameter order (the
/// order of [`NetworkOf::param_names`]).
pub struct Gradients<T> {
    tensors: Vec<TensorOf<T>>,
}

impl<T: Element> Gradients<T> {
    pub fn tensors(&self) -> &[TensorOf<T>] {
        &self.tensors
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::shape("gradient count mismatch".to_string()));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }
}

/// The assembled super-resolution network.
#[derive(Clone, Debug)]
pub struct NetworkOf<T> {
    config: NetworkConfig,
    sfe: Conv2d<T>,
    blocks: Vec<Block<T>>,
    body: Option<Conv2d<T>>,
    up1: Conv2d<T>,
    up2: Conv2d<T>,
    last: Conv2d<T>,
}

pub type Network = NetworkOf<f32>;

impl<T: Element> NetworkOf<T> {
    /// Builds the layer graph with Kaiming-uniform (fan-in) weights and zero
    /// biases drawn from `rng`.
    pub fn build_with_rng<R: Rng>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        Self::build_impl(config, &mut |shape: &[usize]| {
            let fan_in = shape[1] * shape[2] * shape[3];
            let bound = (6.0 / fan_in as f64).sqrt();
            let data = (0..shape.iter().product::<usize>())
                .map(|_| T::of_f64(rng.gen_range(-bound..bound)))
                .collect();
            TensorOf::from_parts(shape.to_vec(), data)
        })
    }

    /// All-zero weights and biases; used by tests and as a deterministic
    /// canvas for loading weights into.
    pub fn zeroed(config: NetworkConfig) -> Result<Self> {
        Self::build_impl(config, &mut |shape: &[usize]| TensorOf::zeros(shape))
    }

    fn build_impl(
        config: NetworkConfig,
        init: &mut dyn FnMut(&[usize]) -> TensorOf<T>,
    ) -> Result<Self> {
        config.validate()?;
        let f = config.filters;
        let mut conv = |out: usize, inp: usize, k: usize, bias: bool| -> Result<Conv2d<T>> {
            Conv2d::new(
                init(&[out, inp, k, k]),
                bias.then(|| TensorOf::zeros(&[out])),
            )
        };
        let sfe = conv(f, config.input_channels(), 3, true)?;
        let block_bias = config.block_kind == BlockKind::ResCat;
        let mut blocks = Vec::with_capacity(config.n_blocks);
        for _ in 0..config.n_blocks {
            blocks.push(match config.block_kind {
                BlockKind::ResCat => Block::ResCat {
                    conv1: conv(f, f, 3, block_bias)?,
                    conv2: conv(f, f, 3, block_bias)?,
                    fuse: conv(f, 2 * f, 1, block_bias)?,
                },
                BlockKind::EdsrBaseline => Block::Edsr {
                    conv1: conv(f, f, 3, false)?,
                    conv2: conv(f, f, 3, false)?,
                },
            });
        }
        let body = match config.block_kind {
            BlockKind::EdsrBaseline => Some(conv(f, f, 3, true)?),
            BlockKind::ResCat => None,
        };
        let up1 = conv(4 * f, f, 3, true)?;
        let up2 = conv(4 * f, f, 3, true)?;
        let last = conv(3, f, 3, true)?;
        Ok(NetworkOf {
            config,
            sfe,
            blocks,
            body,
            up1,
            up2,
            last,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Converts all weights to another element type (e.g. `f64` for the
    /// finite-difference gradient check).
    pub fn cast<U: Element>(&self) -> NetworkOf<U> {
        let conv = |c: &Conv2d<T>| Conv2d {
            weight: c.weight.cast::<U>(),
            bias: c.bias.as_ref().map(|b| b.cast::<U>()),
        };
        NetworkOf {
            config: self.config,
            sfe: conv(&self.sfe),
            blocks: self
                .blocks
                .iter()
                .map(|b| match b {
                    Block::ResCat { conv1, conv2, fuse } => Block::ResCat {
                        conv1: conv(conv1),
                        conv2: conv(conv2),
                        fuse: conv(fuse),
                    },
                    Block::Edsr { conv1, conv2 } => Block::Edsr {
                        conv1: conv(conv1),
                        conv2: conv(conv2),
                    },
                })
                .collect(),
            body: self.body.as_ref().map(&conv),
            up1: conv(&self.up1),
            up2: conv(&self.up2),
            last: conv(&self.last),
        }
    }

    /// Exact parameter total over all layers.
    pub fn count_params(&self) -> u64 {
        let mut total = self.sfe.param_count();
        for b in &self.blocks {
            total += b.param_count();
        }
        if let Some(body) = &self.body {
            total += body.param_count();
        }
        total + self.up1.param_count() + self.up2.param_count() + self.last.param_count()
    }

    /// Multiply-accumulates for one forward pass on an `h×w` input, counting
    /// every convolution at the resolution it actually runs.
    pub fn count_macs(&self, h: usize, w: usize) -> u64 {
        let mut total = self.sfe.macs(h, w);
        for b in &self.blocks {
            total += b.macs(h, w);
        }
        if let Some(body) = &self.body {
            total += body.macs(h, w);
        }
        total += self.up1.macs(h, w);
        total += self.up2.macs(2 * h, 2 * w);
        total += self.last.macs(4 * h, 4 * w);
        total
    }

    /// Pure forward pass; `C_in×H×W` in, `3×4H×4W` out.
    pub fn forward(&self, input: &TensorOf<T>) -> Result<TensorOf<T>> {
        self.forward_cached(input).map(|(y, _)| y)
    }

    /// Forward pass that records the activations needed by [`Self::backward`].
    pub fn forward_cached(
        &self,
        input: &TensorOf<T>,
    ) -> Result<(TensorOf<T>, ForwardCache<T>)> {
        let (c, _, _) = dims3(input)?;
        if c != self.config.input_channels() {
            return Err(Error::shape(format!(
                "network expects {} input channels ({:?} edge mode), got {}",
                self.config.input_channels(),
                self.config.edge_mode,
                c
            )));
        }
        let f0 = self.sfe.forward(input, Padding::Same)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut h = f0.clone();
        for b in &self.blocks {
            let (out, cache) = b.forward(&h)?;
            h = out;
            blocks.push(cache);
        }
        let body_out = match &self.body {
            Some(body) => body.forward(&h, Padding::Same)?,
            None => h,
        };
        let ff = body_out.add(&f0)?;
        let u1 = self.up1.forward(&ff, Padding::Same)?;
        let s1 = pixel_shuffle(&u1, 2)?;
        let u2 = self.up2.forward(&s1, Padding::Same)?;
        let s2 = pixel_shuffle(&u2, 2)?;
        let y = self.last.forward(&s2, Padding::Same)?;
        Ok((
            y,
            ForwardCache {
                input: input.clone(),
                f0,
                blocks,
                ff,
                s1,
                s2,
            },
        ))
    }

    /// Exact reverse-mode gradients for every parameter plus the gradient
    /// with respect to the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_output: &TensorOf<T>,
    ) -> Result<(Gradients<T>, TensorOf<T>)> {
        let g_last = self.last.backward(&cache.s2, grad_output, Padding::Same)?;
        let g_u2 = pixel_unshuffle(&g_last.input, 2)?;
        let g_up2 = self.up2.backward(&cache.s1, &g_u2, Padding::Same)?;
        let g_u1 = pixel_unshuffle(&g_up2.input, 2)?;
        let g_up1 = self.up1.backward(&cache.ff, &g_u1, Padding::Same)?;

        // ff = body(blocks_out) + f0: the gradient fans out to both addends.
        let g_ff = g_up1.input;
        let mut g_f0 = g_ff.clone();

        let blocks_out = match cache.blocks.last() {
            Some(b) => &b.out,
            None => &cache.f0,
        };
        let (g_body, mut g_chain) = match &self.body {
            Some(body) => {
                let g = body.backward(blocks_out, &g_ff, Padding::Same)?;
                (Some((g.weight, g.bias)), g.input)
            }
            None => (None, g_ff),
        };

        let mut block_grads_rev: Vec<Vec<TensorOf<T>>> = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate().rev() {
            let block_in = if i == 0 {
                &cache.f0
            } else {
                &cache.blocks[i - 1].out
            };
            let (params, g_in) = b.backward(block_in, &cache.blocks[i], &g_chain)?;
            block_grads_rev.push(params);
            g_chain = g_in;
        }
        g_f0.add_assign(&g_chain)?;

        let g_sfe = self.sfe.backward(&cache.input, &g_f0, Padding::Same)?;

        let mut tensors = Vec::new();
        tensors.push(g_sfe.weight);
        tensors.push(g_sfe.bias.expect("sfe carries a bias"));
        for params in block_grads_rev.into_iter().rev() {
            tensors.extend(params);
        }
        if let Some((w, b)) = g_body {
            tensors.push(w);
            tensors.push(b.expect("body conv carries a bias"));
        }
        tensors.push(g_up1.weight);
        tensors.push(g_up1.bias.expect("up1 carries a bias"));
        tensors.push(g_up2.weight);
        tensors.push(g_up2.bias.expect("up2 carries a bias"));
        tensors.push(g_last.weight);
        tensors.push(g_last.bias.expect("final conv carries a bias"));
        Ok((Gradients { tensors }, g_sfe.input))
    }

    /// Canonical parameter names, matching the order of [`Self::params`] and
    /// the weights-file layout.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["sfe.w".to_string(), "sfe.b".to_string()];
        for (i, b) in self.blocks.iter().enumerate() {
            let n = i + 1;
            match b {
                Block::ResCat { .. } => {
                    for part in ["conv1.w", "conv1.b", "conv2.w", "conv2.b", "fuse.w", "fuse.b"] {
                        names.push(format!("block{}.{}", n, part));
                    }
                }
                Block::Edsr { .. } => {
                    names.push(format!("block{}.conv1.w", n));
                    names.push(format!("block{}.conv2.w", n));
                }
            }
        }
        if self.body.is_some() {
            names.push("body.w".to_string());
            names.push("body.b".to_string());
        }
        for part in ["up1.w", "up1.b", "up2.w", "up2.b", "final.w", "final.b"] {
            names.push(part.to_string());
        }
        names
    }

    pub fn params(&self) -> Vec<&TensorOf<T>> {
        let mut out: Vec<&TensorOf<T>> = Vec::new();
        out.push(&self.sfe.weight);
        out.push(self.sfe.bias.as_ref().expect("sfe carries a bias"));
        for b in &self.blocks {
            match b {
                Block::ResCat { conv1, conv2, fuse } => {
                    for c in [conv1, conv2, fuse] {
                        out.push(&c.weight);
                        out.push(c.bias.as_ref().expect("rescat convs carry biases"));
                    }
                }
                Block::Edsr { conv1, conv2 } => {
                    out.push(&conv1.weight);
                    out.push(&conv2.weight);
                }
            }
        }
        if let Some(body) = &self.body {
            out.push(&body.weight);
            out.push(body.bias.as_ref().expect("body conv carries a bias"));
        }
        for c in [&self.up1, &self.up2, &self.last] {
            out.push(&c.weight);
            out.push(c.bias.as_ref().expect("tail convs carry biases"));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut TensorOf<T>> {
        let mut out: Vec<&mut TensorOf<T>> = Vec::new();
        out.push(&mut self.sfe.weight);
        out.push(self.sfe.bias.as_mut().expect("sfe carries a bias"));
        for b in &mut self.blocks {
            match b {
                Block::ResCat { conv1, conv2, fuse } => {
                    for c in [conv1, conv2, fuse] {
                        out.push(&mut c.weight);
                        out.push(c.bias.as_mut().expect("rescat convs carry biases"));
                    }
                }
                Block::Edsr { conv1, conv2 } => {
                    out.push(&mut conv1.weight);
                    out.push(&mut conv2.weight);
                }
            }
        }
        if let Some(body) = &mut self.body {
            out.push(&mut body.weight);
            out.push(body.bias.as_mut().expect("body conv carries a bias"));
        }
        for c in [&mut self.up1, &mut self.up2, &mut self.last] {
            out.push(&mut c.weight);
            out.push(c.bias.as_mut().expect("tail convs carry biases"));
        }
        out
    }

    /// Replaces the parameter identified by `name`; shapes must match.
    pub(crate) fn set_param(&mut self, name: &str, tensor: TensorOf<T>) -> Result<()> {
        let names = self.param_names();
        let idx = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config(format!("unknown parameter {name:?}")))?;
        let mut params = self.params_mut();
        let slot = &mut params[idx];
        if slot.shape() != tensor.shape() {
            return Err(Error::shape(format!(
                "parameter {name:?} has shape {:?}, file provides {:?}",
                slot.shape(),
                tensor.shape()
            )));
        }
        **slot = tensor;
        Ok(())
    }
}

impl Network {
    /// Convenience seeded builder used by the CLI and the toy trainer.
    pub fn build_seeded(config: NetworkConfig, seed: u64) -> Result<Network> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        NetworkOf::build_with_rng(config, &mut rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;

    fn toy_config() -> NetworkConfig {
        NetworkConfig {
            n_blocks: 2,
            filters: 8,
            scale: 4,
            edge_mode: EdgeMode::None,
            block_kind: BlockKind::ResCat,
        }
    }

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_parts(
            shape.to_vec(),
            (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        )
    }

    #[test]
    fn rescat_zero_weights_is_identity() {
        let block: Block<f32> = Block::ResCat {
            conv1: Conv2d::zeros(8, 8, 3, true),
            conv2: Conv2d::zeros(8, 8, 3, true),
            fuse: Conv2d::zeros(8, 16, 1, true),
        };
        let x = random_tensor(&[8, 6, 5], 3);
        let (out, _) = block.forward(&x).unwrap();
        assert_eq!(out.data(), x.data());
        // two stacked zero blocks compose to the identity as well
        let (out2, _) = block.forward(&out).unwrap();
        assert_eq!(out2.data(), x.data());
    }

    #[test]
    fn rescat_block_param_count() {
        let block: Block<f32> = Block::ResCat {
            conv1: Conv2d::zeros(64, 64, 3, true),
            conv2: Conv2d::zeros(64, 64, 3, true),
            fuse: Conv2d::zeros(64, 128, 1, true),
        };
        assert_eq!(block.param_count(), 82_112);
    }

    #[test]
    fn full_network_param_counts() {
        let c = Network::zeroed(NetworkConfig::esrpcb_c()).unwrap();
        assert_eq!(c.count_params(), 1_613_315);
        let s = Network::zeroed(NetworkConfig::esrpcb_s()).unwrap();
        assert_eq!(s.count_params(), 1_613_891);
        let e = Network::zeroed(NetworkConfig::edsr_baseline()).unwrap();
        assert_eq!(e.count_params(), 1_515_523);
    }

    #[test]
    fn mac_counts_at_150() {
        let c = Network::zeroed(NetworkConfig::esrpcb_c()).unwrap();
        let macs = c.count_macs(150, 150) as f64;
        assert!((macs / 46.88e9 - 1.0).abs() < 0.02, "got {macs}");
        let e = Network::zeroed(NetworkConfig::edsr_baseline()).unwrap();
        let macs = e.count_macs(150, 150) as f64;
        assert!((macs / 44.64e9 - 1.0).abs() < 0.02, "got {macs}");
    }

    #[test]
    fn forward_scales_by_four() {
        // Full-width config on a small input.
        let net = Network::zeroed(NetworkConfig::esrpcb_c()).unwrap();
        let x = Tensor::zeros(&[4, 12, 12]);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[3, 48, 48]);

        // Small-filter config at the 150×150 evaluation resolution.
        let cfg = NetworkConfig {
            edge_mode: EdgeMode::Canny,
            ..toy_config()
        };
        let net = Network::build_seeded(cfg, 7).unwrap();
        let x = random_tensor(&[4, 150, 150], 11);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[3, 600, 600]);
    }

    #[test]
    fn zero_network_maps_to_zero() {
        let net = Network::zeroed(toy_config()).unwrap();
        let x = random_tensor(&[3, 9, 7], 5);
        let y = net.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::build_seeded(toy_config(), 42).unwrap();
        let x = random_tensor(&[3, 8, 8], 9);
        let y1 = net.forward(&x).unwrap();
        let y2 = net.forward(&x).unwrap();
        assert_eq!(y1.data(), y2.data());
    }

    #[test]
    fn wrong_input_channels_rejected() {
        let net = Network::zeroed(toy_config()).unwrap();
        let x = Tensor::zeros(&[4, 8, 8]);
        assert!(matches!(net.forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn unsupported_scale_rejected() {
        let cfg = NetworkConfig {
            scale: 2,
            ..toy_config()
        };
        assert!(matches!(Network::zeroed(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn network_is_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Network>();
        assert_send_sync::<NetworkOf<f64>>();
    }

    #[test]
    fn param_names_align_with_params() {
        for cfg in [toy_config(), NetworkConfig::edsr_baseline()] {
            let cfg = NetworkConfig {
                n_blocks: 2,
                filters: 4,
                ..cfg
            };
            let net = Network::zeroed(cfg).unwrap();
            assert_eq!(net.param_names().len(), net.params().len());
        }
    }

    #[test]
    fn gradient_order_matches_params() {
        let net = Network::build_seeded(toy_config(), 1).unwrap();
        let x = random_tensor(&[3, 6, 6], 2);
        let (y, cache) = net.forward_cached(&x).unwrap();
        let g = Tensor::filled(y.shape(), 1.0);
        let (grads, gin) = net.backward(&cache, &g).unwrap();
        assert_eq!(grads.tensors().len(), net.params().len());
        for (gt, pt) in grads.tensors().iter().zip(net.params()) {
            assert_eq!(gt.shape(), pt.shape());
        }
        assert_eq!(gin.shape(), x.shape());
    }
}
