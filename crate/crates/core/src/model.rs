//! Generator and discriminator construction, the depth-from-size rule and
//! telescope enlargement.

use hdcgan_tensor::{Real, RngStream, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{images_from_tensor, images_to_tensor, Interpolation};
use crate::layers::{BatchNormState, BsBlock, BsOrder, ConvKind, ConvLayer, SeluParams};

pub const KERNEL: usize = 4;

/// Smallest supported effective image size.
pub const MIN_SIZE: usize = 8;

/// Number of blocks in each network for a square image of side `size`:
/// `log2(size) − 1`.
pub fn layer_count(size: usize) -> Result<usize> {
    if size < MIN_SIZE || !size.is_power_of_two() {
        return Err(Error::Config(format!(
            "effective size {size} must be a power of two and at least {MIN_SIZE}"
        )));
    }
    Ok(size.trailing_zeros() as usize - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Source image height and width before enlargement.
    pub base_size: (usize, usize),
    /// Integer enlargement factors for height and width.
    pub telescope: (usize, usize),
    pub latent_dim: usize,
    pub n_filters: usize,
    pub channels: usize,
    pub bs_order: BsOrder,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            base_size: (64, 64),
            telescope: (1, 1),
            latent_dim: 100,
            n_filters: 64,
            channels: 3,
            bs_order: BsOrder::default(),
        }
    }
}

impl NetworkConfig {
    pub fn square(size: usize) -> Self {
        Self {
            base_size: (size, size),
            ..Self::default()
        }
    }

    /// Enlarged `(height, width)`.
    pub fn effective_dims(&self) -> (usize, usize) {
        (
            self.base_size.0 * self.telescope.0,
            self.base_size.1 * self.telescope.1,
        )
    }

    /// Side of the (square) images the networks produce and consume.
    pub fn effective_size(&self) -> Result<usize> {
        self.validate()?;
        Ok(self.effective_dims().0)
    }

    pub fn layer_count(&self) -> Result<usize> {
        layer_count(self.effective_size()?)
    }

    pub fn validate(&self) -> Result<()> {
        let (z1, z2) = self.telescope;
        if z1 == 0 || z2 == 0 {
            return Err(Error::Config(format!(
                "telescope factors must be ≥ 1, got {z1}x{z2}"
            )));
        }
        if self.latent_dim == 0 || self.n_filters == 0 || self.channels == 0 {
            return Err(Error::Config(
                "latent_dim, n_filters and channels must be ≥ 1".into(),
            ));
        }
        let (h, w) = self.effective_dims();
        if h != w {
            return Err(Error::Config(format!(
                "effective size {h}x{w} is not square"
            )));
        }
        layer_count(h).map(|_| ())
    }
}

/// Resizes an `[N, C, H, W]` batch by the telescope factors.
pub fn apply_glasses<T: Real>(
    images: &Tensor<T>,
    telescope: (usize, usize),
    interp: Interpolation,
) -> Result<Tensor<T>> {
    let (z1, z2) = telescope;
    if z1 == 0 || z2 == 0 {
        return Err(Error::Config(format!(
            "telescope factors must be ≥ 1, got {z1}x{z2}"
        )));
    }
    let [_, _, h, w] = *images.shape() else {
        return Err(Error::Config(format!(
            "expected [N, C, H, W], got {:?}",
            images.shape()
        )));
    };
    let (nh, nw) = (h * z1, w * z2);
    if !nh.is_power_of_two() || !nw.is_power_of_two() {
        return Err(Error::Config(format!(
            "enlarged size {nh}x{nw} is not a power of two"
        )));
    }
    if (z1, z2) == (1, 1) {
        return Ok(images.clone());
    }
    let resized: Vec<_> = images_from_tensor(images)?
        .iter()
        .map(|im| im.resize(nh, nw, interp))
        .collect();
    images_to_tensor(&resized)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Generator,
    Discriminator,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Generator => "generator",
            Role::Discriminator => "discriminator",
        }
    }
}

/// A stack of BS blocks followed by a biased convolution with a squashing
/// output (tanh for the generator, sigmoid for the discriminator).
#[derive(Debug, Clone)]
pub struct Network<T: Real = f32> {
    pub role: Role,
    pub config: NetworkConfig,
    pub blocks: Vec<BsBlock<T>>,
    pub head: ConvLayer<T>,
}

fn transpose_fan_in(in_channels: usize, in_size: usize, stride: usize) -> usize {
    let taps = (KERNEL / stride).min(in_size);
    in_channels * taps * taps
}

/// Generator: `latent → 4×4 → … → size×size`, channel count shrinking
/// toward the image end.
pub fn build_generator<T: Real>(cfg: &NetworkConfig, rng: &mut RngStream) -> Result<Network<T>> {
    let layers = cfg.layer_count()?;
    let nf = cfg.n_filters;
    let width = |i: usize| (nf << (layers - 2 - i)).min(nf * 8);
    let mut blocks = Vec::with_capacity(layers - 1);
    let mut in_ch = cfg.latent_dim;
    let mut spatial = 1;
    for i in 0..layers - 1 {
        let (stride, pad) = if i == 0 { (1, 0) } else { (2, 1) };
        let out = width(i);
        let conv = ConvLayer::new(
            ConvKind::ConvTranspose,
            in_ch,
            out,
            KERNEL,
            stride,
            pad,
            transpose_fan_in(in_ch, spatial, stride),
            false,
            rng,
        );
        blocks.push(BsBlock::new(conv, cfg.bs_order));
        spatial = if i == 0 { 4 } else { spatial * 2 };
        in_ch = out;
    }
    let head = ConvLayer::new(
        ConvKind::ConvTranspose,
        in_ch,
        cfg.channels,
        KERNEL,
        2,
        1,
        transpose_fan_in(in_ch, spatial, 2),
        true,
        rng,
    );
    Ok(Network {
        role: Role::Generator,
        config: cfg.clone(),
        blocks,
        head,
    })
}

/// Discriminator: `size×size → … → 4×4 → 1`, channel count growing with
/// depth.
pub fn build_discriminator<T: Real>(
    cfg: &NetworkConfig,
    rng: &mut RngStream,
) -> Result<Network<T>> {
    let layers = cfg.layer_count()?;
    let nf = cfg.n_filters;
    let mut blocks = Vec::with_capacity(layers - 1);
    let mut in_ch = cfg.channels;
    for j in 0..layers - 1 {
        let out = (nf << j).min(nf * 8);
        let conv = ConvLayer::new(
            ConvKind::Conv,
            in_ch,
            out,
            KERNEL,
            2,
            1,
            in_ch * KERNEL * KERNEL,
            false,
            rng,
        );
        blocks.push(BsBlock::new(conv, cfg.bs_order));
        in_ch = out;
    }
    let head = ConvLayer::new(
        ConvKind::Conv,
        in_ch,
        1,
        KERNEL,
        1,
        0,
        in_ch * KERNEL * KERNEL,
        true,
        rng,
    );
    Ok(Network {
        role: Role::Discriminator,
        config: cfg.clone(),
        blocks,
        head,
    })
}

impl<T: Real> Network<T> {
    /// Blocks including the output convolution.
    pub fn block_count(&self) -> usize {
        self.blocks.len() + 1
    }

    pub fn kernel_sizes(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|b| b.conv.kernel_size())
            .chain(std::iter::once(self.head.kernel_size()))
            .collect()
    }

    /// Generator: `[N, latent]` or `[N, latent, 1, 1]` → `[N, C, s, s]`.
    /// Discriminator: `[N, C, s, s]` → `[N]`.
    pub fn forward(&mut self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        let name = self.role.name();
        let wrap = |e: Error| match e {
            Error::Tensor(source) => Error::Network {
                network: name,
                source,
            },
            other => other,
        };
        let mut h = match self.role {
            Role::Generator => {
                let n = x.shape().first().copied().unwrap_or(0);
                x.reshape(&[n, self.config.latent_dim, 1, 1])
                    .map_err(|e| wrap(e.into()))?
            }
            Role::Discriminator => x.clone(),
        };
        for block in &mut self.blocks {
            h = block.forward(&h, training).map_err(wrap)?;
        }
        let out = self.head.forward(&h).map_err(wrap)?;
        let y = match self.role {
            Role::Generator => out.tanh(),
            Role::Discriminator => {
                let n = out.shape()[0];
                out.sigmoid().and_then(|s| s.reshape(&[n]))
            }
        };
        y.map_err(|e| wrap(e.into()))
    }

    /// Trainable tensors in a fixed order.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([&b.conv.weight, &b.norm.gamma, &b.norm.beta]);
        }
        out.push(&self.head.weight);
        out.extend(self.head.bias.as_ref());
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv.weight);
            out.push(&mut b.norm.gamma);
            out.push(&mut b.norm.beta);
        }
        out.push(&mut self.head.weight);
        if let Some(bias) = self.head.bias.as_mut() {
            out.push(bias);
        }
        out
    }

    pub fn zero_grad(&self) {
        self.parameters().iter().for_each(|p| p.zero_grad());
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.numel()).sum()
    }

    /// Every tensor that defines the network's behavior, parameters and
    /// running statistics alike, under stable dotted names.
    pub fn state_dict(&self) -> Vec<(String, Tensor<T>)> {
        let prefix = self.role.name();
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("{prefix}.block{i}");
            let c = b.norm.channels();
            out.push((format!("{p}.weight"), b.conv.weight.detach()));
            out.push((format!("{p}.bn.gamma"), b.norm.gamma.detach()));
            out.push((format!("{p}.bn.beta"), b.norm.beta.detach()));
            out.push((
                format!("{p}.bn.running_mean"),
                Tensor::from_vec(b.norm.running_mean.clone(), &[c]).expect("channel vector"),
            ));
            out.push((
                format!("{p}.bn.running_var"),
                Tensor::from_vec(b.norm.running_var.clone(), &[c]).expect("channel vector"),
            ));
        }
        out.push((format!("{prefix}.head.weight"), self.head.weight.detach()));
        if let Some(bias) = &self.head.bias {
            out.push((format!("{prefix}.head.bias"), bias.detach()));
        }
        out
    }

    /// Replaces every tensor named by [`Network::state_dict`]; names and
    /// shapes must match exactly.
    pub fn load_state_dict(&mut self, entries: &[(String, Tensor<T>)]) -> Result<()> {
        let expected = self.state_dict();
        if expected.len() != entries.len() {
            return Err(Error::Checkpoint(format!(
                "{} expects {} tensors, found {}",
                self.role.name(),
                expected.len(),
                entries.len()
            )));
        }
        for ((name, want), (got_name, got)) in expected.iter().zip(entries) {
            if name != got_name || want.shape() != got.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {got_name} {:?} does not match {name} {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        let mut it = entries.iter().map(|(_, t)| t.clone());
        let mut next = || it.next().expect("length checked");
        for b in &mut self.blocks {
            b.conv.weight = next().requires_grad();
            b.norm.gamma = next().requires_grad();
            b.norm.beta = next().requires_grad();
            b.norm.running_mean = next().into_data();
            b.norm.running_var = next().into_data();
        }
        self.head.weight = next().requires_grad();
        if self.head.bias.is_some() {
            self.head.bias = Some(next().requires_grad());
        }
        Ok(())
    }

    /// Sets the SELU constants of every block.
    pub fn set_selu(&mut self, p: SeluParams) {
        self.blocks.iter_mut().for_each(|b| b.selu = p);
    }

    pub fn batch_norms(&self) -> impl Iterator<Item = &BatchNormState<T>> {
        self.blocks.iter().map(|b| &b.norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(size: usize) -> NetworkConfig {
        NetworkConfig {
            base_size: (size, size),
            latent_dim: 8,
            n_filters: 4,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn layer_count_rule() {
        assert_eq!(layer_count(32).unwrap(), 4);
        assert_eq!(layer_count(256).unwrap(), 7);
        assert_eq!(layer_count(64).unwrap(), 5);
        assert!(layer_count(48).is_err());
        assert!(layer_count(4).is_err());
    }

    #[test]
    fn config_rejects_non_square_and_zero_factors() {
        let mut cfg = small(32);
        cfg.telescope = (2, 1);
        assert!(cfg.validate().is_err());
        cfg.telescope = (0, 0);
        assert!(cfg.validate().is_err());
        let cfg = NetworkConfig {
            base_size: (32, 64),
            telescope: (4, 2),
            ..small(32)
        };
        assert_eq!(cfg.effective_size().unwrap(), 128);
    }

    #[test]
    fn shapes_and_ranges() {
        let cfg = small(32);
        let mut rng = RngStream::new(0, 0);
        let mut g = build_generator::<f64>(&cfg, &mut rng).unwrap();
        let mut d = build_discriminator::<f64>(&cfg, &mut rng).unwrap();
        assert_eq!(g.block_count(), 4);
        assert_eq!(d.block_count(), 4);
        let z = rng.normal_tensor::<f64>(&[2, 8], 0.0, 1.0);
        let x = g.forward(&z, true).unwrap();
        assert_eq!(x.shape(), &[2, 3, 32, 32]);
        assert!(x.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        let p = d.forward(&x, true).unwrap();
        assert_eq!(p.shape(), &[2]);
        assert!(p.data().iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn zero_latent_gives_finite_output() {
        let cfg = small(16);
        let mut g = build_generator::<f64>(&cfg, &mut RngStream::new(1, 0)).unwrap();
        let x = g.forward(&Tensor::zeros(&[2, 8]), true).unwrap();
        assert!(x.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn state_dict_round_trip() {
        let cfg = small(16);
        let mut a = build_generator::<f32>(&cfg, &mut RngStream::new(2, 0)).unwrap();
        let mut b = build_generator::<f32>(&cfg, &mut RngStream::new(3, 0)).unwrap();
        b.load_state_dict(&a.state_dict()).unwrap();
        let z = RngStream::new(4, 0).normal_tensor::<f32>(&[2, 8], 0.0, 1.0);
        assert_eq!(
            a.forward(&z, false).unwrap().data(),
            b.forward(&z, false).unwrap().data()
        );
        let mut sd = a.state_dict();
        sd.pop();
        assert!(b.load_state_dict(&sd).is_err());
    }

    #[test]
    fn glasses_resizes() {
        let x = Tensor::<f64>::ones(&[1, 3, 32, 64]);
        let y = apply_glasses(&x, (4, 2), Interpolation::Bilinear).unwrap();
        assert_eq!(y.shape(), &[1, 3, 128, 128]);
        assert!(y.data().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let same = apply_glasses(&x, (1, 1), Interpolation::Bilinear).unwrap();
        assert_eq!(same.data(), x.data());
        assert!(apply_glasses(&x, (3, 1), Interpolation::Nearest).is_err());
    }
}
