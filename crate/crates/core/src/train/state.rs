use std::path::Path;

use hdcgan_tensor::{Real, RngStream, Tensor, TensorError};
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::config::TrainConfig;
use super::loss::{d_loss, g_loss};
use crate::error::{Error, Result};
use crate::model::{build_discriminator, build_generator, Network, NetworkConfig};

/// Stream numbers derived from the run seed.
pub(crate) const WEIGHT_STREAM: u64 = 0;
pub(crate) const TRAIN_STREAM: u64 = 1;
const EPOCH_STREAM_BASE: u64 = 1000;

/// Adds `sigma·ε`, `ε ~ N(0, 1)` i.i.d., to every element of `x`.
pub fn inject_noise<T: Real>(x: &Tensor<T>, sigma: f64, rng: &mut RngStream) -> Result<Tensor<T>> {
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!(
            "noise amplitude must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let noise = rng.normal_tensor::<T>(x.shape(), 0.0, sigma);
    Ok(x.add(&noise)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub epoch: u64,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub d_loss: f64,
    pub g_loss: f64,
}

/// Everything needed to continue a run bit for bit.
#[derive(Debug, Clone)]
pub struct TrainState<T: Real = f32> {
    pub network: NetworkConfig,
    pub config: TrainConfig,
    pub generator: Network<T>,
    pub discriminator: Network<T>,
    pub g_adam: AdamState<T>,
    pub d_adam: AdamState<T>,
    /// Completed epochs.
    pub epoch: u64,
    /// Completed steps.
    pub step: u64,
    pub rng: RngStream,
    pub history: Vec<LossRecord>,
}

impl<T: Real> TrainState<T> {
    /// Fresh networks and optimizer state; all randomness derives from
    /// `config.seed`.
    pub fn new(network: NetworkConfig, config: TrainConfig) -> Result<Self> {
        network.validate()?;
        config.validate()?;
        let mut init = RngStream::new(config.seed, WEIGHT_STREAM);
        let generator = build_generator(&network, &mut init)?;
        let discriminator = build_discriminator(&network, &mut init)?;
        let adam = AdamConfig {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.adam_epsilon,
        };
        Ok(Self {
            g_adam: AdamState::new(&generator.parameters(), adam),
            d_adam: AdamState::new(&discriminator.parameters(), adam),
            rng: RngStream::new(config.seed, TRAIN_STREAM),
            network,
            config,
            generator,
            discriminator,
            epoch: 0,
            step: 0,
            history: Vec::new(),
        })
    }

    pub fn sample_latent(&mut self, n: usize) -> Tensor<T> {
        self.rng
            .normal_tensor(&[n, self.network.latent_dim], 0.0, 1.0)
    }

    /// Generator samples in inference mode (running batch statistics).
    pub fn generate(&mut self, z: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.generator.forward(z, false)?.detach())
    }

    /// Runs one pass over `data` (`[N, C, s, s]`) in the given index
    /// batches.
    pub fn train_epoch(&mut self, data: &Tensor<T>, batches: &[Vec<usize>]) -> Result<()> {
        for idx in batches {
            let batch = gather_batch(data, idx)?;
            train_step(self, &batch)?;
        }
        self.epoch += 1;
        Ok(())
    }
}

/// Shuffled index batches for one epoch; the trailing partial batch is
/// dropped. The order depends only on `(seed, epoch)`.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::new(seed, EPOCH_STREAM_BASE + epoch).shuffle(&mut order);
    order
        .chunks_exact(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Selects samples along the first axis.
pub fn gather_batch<T: Real>(data: &Tensor<T>, idx: &[usize]) -> Result<Tensor<T>> {
    let n = data.shape().first().copied().unwrap_or(0);
    let per = if n == 0 { 0 } else { data.numel() / n };
    let mut out = Vec::with_capacity(idx.len() * per);
    for &i in idx {
        if i >= n {
            return Err(Error::Config(format!(
                "batch index {i} out of range for {n} samples"
            )));
        }
        out.extend_from_slice(&data.data()[i * per..(i + 1) * per]);
    }
    let mut shape = data.shape().to_vec();
    shape[0] = idx.len();
    Ok(Tensor::from_vec(out, &shape)?)
}

fn in_network<X>(network: &'static str, r: std::result::Result<X, TensorError>) -> Result<X> {
    r.map_err(|source| Error::Network { network, source })
}

fn finite_loss<T: Real>(network: &'static str, loss: &Tensor<T>, step: u64) -> Result<f64> {
    let v = loss.item().to_f64_lossless();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { network, step })
    }
}

fn tag(network: &'static str, e: Error) -> Error {
    match e {
        Error::Tensor(source) => Error::Network { network, source },
        other => other,
    }
}

/// One discriminator update on a real batch and a detached fake batch,
/// then one generator update on fresh latents.
pub fn train_step<T: Real>(state: &mut TrainState<T>, real: &Tensor<T>) -> Result<StepLosses> {
    const D: &str = "discriminator";
    const G: &str = "generator";
    let size = state.network.effective_size()?;
    let n = real.shape().first().copied().unwrap_or(0);
    let want = [n, state.network.channels, size, size];
    if real.shape() != want || n < 2 {
        return Err(Error::Config(format!(
            "real batch has shape {:?}, expected [N ≥ 2, {}, {size}, {size}]",
            real.shape(),
            state.network.channels
        )));
    }
    let sigma = state.config.noise_amplitude;
    let d_sigma = if state.config.noise_on_d_input {
        sigma
    } else {
        0.0
    };
    let z_sigma = if state.config.noise_on_latent {
        sigma
    } else {
        0.0
    };
    let step = state.step + 1;

    // Discriminator.
    let z = state.sample_latent(n);
    let z = inject_noise(&z, z_sigma, &mut state.rng)?;
    let fake = state.generator.forward(&z, true)?.detach();
    let real_in = inject_noise(real, d_sigma, &mut state.rng).map_err(|e| tag(D, e))?;
    let fake_in = inject_noise(&fake, d_sigma, &mut state.rng).map_err(|e| tag(D, e))?;
    let d_real = state.discriminator.forward(&real_in, true)?;
    let d_fake = state.discriminator.forward(&fake_in, true)?;
    let ld = d_loss(&d_real, &d_fake).map_err(|e| tag(D, e))?;
    let d_value = finite_loss(D, &ld, step)?;
    state.discriminator.zero_grad();
    in_network(D, ld.backward())?;
    state
        .d_adam
        .step(state.discriminator.parameters_mut())
        .map_err(|e| tag(D, e))?;

    // Generator.
    let z = state.sample_latent(n);
    let z = inject_noise(&z, z_sigma, &mut state.rng)?;
    let fake = state.generator.forward(&z, true)?;
    let fake_in = inject_noise(&fake, d_sigma, &mut state.rng).map_err(|e| tag(G, e))?;
    let p = state.discriminator.forward(&fake_in, true)?;
    let lg = g_loss(&p).map_err(|e| tag(G, e))?;
    let g_value = finite_loss(G, &lg, step)?;
    state.generator.zero_grad();
    in_network(G, lg.backward())?;
    state
        .g_adam
        .step(state.generator.parameters_mut())
        .map_err(|e| tag(G, e))?;
    state.discriminator.zero_grad();

    state.step = step;
    state.history.push(LossRecord {
        step,
        epoch: state.epoch,
        d_loss: d_value,
        g_loss: g_value,
    });
    Ok(StepLosses {
        d_loss: d_value,
        g_loss: g_value,
    })
}

pub fn write_loss_csv(history: &[LossRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in history {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
