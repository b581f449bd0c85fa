//! SELU, batch normalization, the BS (SELU + BatchNorm) block, and the
//! moment diagnostics behind self-normalization.

use hdcgan_tensor::{Real, RngStream, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale and saturation of the SELU activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeluParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl SeluParams {
    /// The pair for which zero-mean, unit-variance Gaussian inputs map to
    /// zero-mean, unit-variance outputs.
    pub const STANDARD: SeluParams = SeluParams {
        lambda: 1.050_700_987_355_480_5,
        alpha: 1.673_263_242_354_377_2,
    };

    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda > 1.0 && alpha > 0.0) {
            return Err(Error::Config(format!(
                "SELU needs lambda > 1 and alpha > 0, got ({lambda}, {alpha})"
            )));
        }
        Ok(Self { lambda, alpha })
    }

    /// Scalar SELU.
    pub fn apply(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.lambda * x
        } else {
            self.lambda * self.alpha * x.exp_m1()
        }
    }
}

impl Default for SeluParams {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// `λx` for `x > 0`, `λα(eˣ − 1)` otherwise. At zero the right derivative
/// `λ` is used.
pub fn selu<T: Real>(x: &Tensor<T>, p: SeluParams) -> Result<Tensor<T>> {
    let (l, la) = (T::lit(p.lambda), T::lit(p.lambda * p.alpha));
    Ok(x.map_differentiable(
        "selu",
        move |v| {
            if v > T::zero() {
                l * v
            } else {
                la * v.exp_m1()
            }
        },
        move |v, _| if v >= T::zero() { l } else { la * v.exp() },
    )?)
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Learned affine parameters and running statistics of a per-channel batch
/// normalization.
#[derive(Debug, Clone)]
pub struct BatchNormState<T: Real> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Vec<T>,
    /// Unbiased estimate, as accumulated from batch statistics.
    pub running_var: Vec<T>,
    pub eps: f64,
    pub momentum: f64,
}

impl<T: Real> BatchNormState<T> {
    /// `γ = 1`, `β = 0`, running statistics `(0, 1)`.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::ones(&[channels]).requires_grad(),
            beta: Tensor::zeros(&[channels]).requires_grad(),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

/// Normalizes `x` (`[N, C, H, W]`) per channel.
///
/// In training mode the batch mean and biased variance over `(N, H, W)`
/// standardize the input and the running statistics move toward the batch
/// values by `momentum`. In inference mode the running statistics are used.
pub fn batchnorm2d<T: Real>(
    x: &Tensor<T>,
    s: &mut BatchNormState<T>,
    training: bool,
) -> Result<Tensor<T>> {
    if !training {
        return Ok(x.batch_norm_eval(&s.gamma, &s.beta, &s.running_mean, &s.running_var, s.eps)?);
    }
    let (y, stats) = x.batch_norm_train(&s.gamma, &s.beta, s.eps)?;
    let m = T::lit(s.momentum);
    let keep = T::one() - m;
    let unbias = T::lit(stats.count as f64 / (stats.count - 1) as f64);
    for c in 0..s.channels() {
        s.running_mean[c] = keep * s.running_mean[c] + m * stats.mean[c];
        s.running_var[c] = keep * s.running_var[c] + m * stats.var[c] * unbias;
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvKind {
    /// Strided cross-correlation (down-sampling).
    Conv,
    /// Transposed convolution (up-sampling).
    ConvTranspose,
}

/// Convolution weights plus geometry. Weight layout is `[out, in, k, k]`
/// for `Conv` and `[in, out, k, k]` for `ConvTranspose`.
#[derive(Debug, Clone)]
pub struct ConvLayer<T: Real> {
    pub kind: ConvKind,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Real> ConvLayer<T> {
    /// Centered Gaussian weights with variance `1 / fan_in`.
    pub fn new(
        kind: ConvKind,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        fan_in: usize,
        with_bias: bool,
        rng: &mut RngStream,
    ) -> Self {
        let shape = match kind {
            ConvKind::Conv => [out_channels, in_channels, kernel, kernel],
            ConvKind::ConvTranspose => [in_channels, out_channels, kernel, kernel],
        };
        let std = (1.0 / fan_in.max(1) as f64).sqrt();
        Self {
            kind,
            weight: rng.normal_tensor(&shape, 0.0, std).requires_grad(),
            bias: with_bias.then(|| Tensor::zeros(&[out_channels, 1, 1]).requires_grad()),
            stride,
            padding,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self.kind {
            ConvKind::Conv => self.weight.shape()[1],
            ConvKind::ConvTranspose => self.weight.shape()[0],
        }
    }

    pub fn out_channels(&self) -> usize {
        match self.kind {
            ConvKind::Conv => self.weight.shape()[0],
            ConvKind::ConvTranspose => self.weight.shape()[1],
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = match self.kind {
            ConvKind::Conv => x.conv2d(&self.weight, self.stride, self.padding)?,
            ConvKind::ConvTranspose => {
                x.conv_transpose2d(&self.weight, self.stride, self.padding)?
            }
        };
        match &self.bias {
            Some(b) => Ok(y.add(b)?),
            None => Ok(y),
        }
    }
}

/// Where the nonlinearity sits relative to the normalization in a BS block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BsOrder {
    /// conv → SELU → BatchNorm
    #[default]
    SeluThenNorm,
    /// conv → BatchNorm → SELU
    NormThenSelu,
}

/// Convolution followed by SELU and batch normalization.
#[derive(Debug, Clone)]
pub struct BsBlock<T: Real> {
    pub conv: ConvLayer<T>,
    pub norm: BatchNormState<T>,
    pub selu: SeluParams,
    pub order: BsOrder,
}

impl<T: Real> BsBlock<T> {
    pub fn new(conv: ConvLayer<T>, order: BsOrder) -> Self {
        let norm = BatchNormState::new(conv.out_channels());
        Self {
            conv,
            norm,
            selu: SeluParams::STANDARD,
            order,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, training: bool) -> Result<Tensor<T>> {
        bs_block(
            x,
            &self.conv,
            &mut self.norm,
            self.selu,
            self.order,
            training,
        )
    }
}

pub fn bs_block<T: Real>(
    x: &Tensor<T>,
    conv: &ConvLayer<T>,
    norm: &mut BatchNormState<T>,
    selu_params: SeluParams,
    order: BsOrder,
    training: bool,
) -> Result<Tensor<T>> {
    let h = conv.forward(x)?;
    match order {
        BsOrder::SeluThenNorm => batchnorm2d(&selu(&h, selu_params)?, norm, training),
        BsOrder::NormThenSelu => selu(&batchnorm2d(&h, norm, training)?, selu_params),
    }
}

/// Mean and variance of a scalar activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: f64,
    pub variance: f64,
}

impl MomentPair {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::Config(format!(
                "variance must be non-negative, got {variance}"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn distance(&self, other: &MomentPair) -> f64 {
        (self.mean - other.mean).hypot(self.variance - other.variance)
    }
}

/// Sum and sum of squares of a weight vector: `n` times its mean and `n`
/// times its second moment.
pub fn weight_moments(w: &[f64]) -> Result<(f64, f64)> {
    if w.is_empty() {
        return Err(Error::Config("weight vector is empty".into()));
    }
    Ok((w.iter().sum(), w.iter().map(|v| v * v).sum()))
}

/// Monte-Carlo estimate of the next layer's moments with its standard
/// errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub moments: MomentPair,
    /// Standard error of the mean and of the variance estimate.
    pub mean_se: f64,
    pub variance_se: f64,
}

pub const MIN_MOMENT_SAMPLES: usize = 10_000;

/// Estimates the moments of `selu(w·x)` when the inputs `x` are
/// independent with the given mean and variance and `(omega, tau)` are the
/// sum and sum of squares of the weights.
///
/// The pre-activation is taken as Gaussian with mean `μ·ω` and variance
/// `ν·τ`. The estimator draws `samples` standard normals from `rng`.
pub fn moment_map(
    input: MomentPair,
    omega: f64,
    tau: f64,
    p: SeluParams,
    samples: usize,
    rng: &mut RngStream,
) -> Result<MomentEstimate> {
    let eps: Vec<f64> = (0..samples.max(MIN_MOMENT_SAMPLES))
        .map(|_| rng.normal())
        .collect();
    moment_map_with_draws(input, omega, tau, p, &eps)
}

/// [`moment_map`] with caller-supplied standard-normal draws, so repeated
/// applications can share random numbers.
pub fn moment_map_with_draws(
    input: MomentPair,
    omega: f64,
    tau: f64,
    p: SeluParams,
    draws: &[f64],
) -> Result<MomentEstimate> {
    if !(input.variance >= 0.0) {
        return Err(Error::Config(format!(
            "input variance must be non-negative, got {}",
            input.variance
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::Config(format!(
            "tau must be non-negative, got {tau}"
        )));
    }
    if draws.len() < MIN_MOMENT_SAMPLES {
        return Err(Error::Config(format!(
            "moment_map needs at least {MIN_MOMENT_SAMPLES} samples, got {}",
            draws.len()
        )));
    }
    let mu = input.mean * omega;
    let sd = (input.variance * tau).sqrt();
    if sd == 0.0 {
        return Ok(MomentEstimate {
            moments: MomentPair {
                mean: p.apply(mu),
                variance: 0.0,
            },
            mean_se: 0.0,
            variance_se: 0.0,
        });
    }
    let n = draws.len() as f64;
    let ys: Vec<f64> = draws.iter().map(|e| p.apply(mu + sd * e)).collect();
    let mean = ys.iter().sum::<f64>() / n;
    let centered: Vec<f64> = ys.iter().map(|y| y - mean).collect();
    let m2 = centered.iter().map(|d| d * d).sum::<f64>() / n;
    let m4 = centered.iter().map(|d| d.powi(4)).sum::<f64>() / n;
    Ok(MomentEstimate {
        moments: MomentPair { mean, variance: m2 },
        mean_se: (m2 / n).sqrt(),
        variance_se: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selu_reference_points() {
        let p = SeluParams::STANDARD;
        let x = Tensor::<f64>::from_vec(vec![0.0, 1.0, -1.0], &[3]).unwrap();
        let y = selu(&x, p).unwrap();
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 1.050701).abs() < 1e-6);
        assert!((y.data()[2] - -1.111330).abs() < 1e-6);
    }

    #[test]
    fn selu_one_sided_derivatives_at_zero() {
        let p = SeluParams::STANDARD;
        let h = 1e-7;
        let right = (p.apply(h) - p.apply(0.0)) / h;
        let left = (p.apply(0.0) - p.apply(-h)) / h;
        assert!((right - p.lambda).abs() < 1e-6);
        assert!((left - p.lambda * p.alpha).abs() < 1e-5);
        // autodiff uses the right derivative at exactly zero
        let x = Tensor::<f64>::zeros(&[1]).requires_grad();
        selu(&x, p).unwrap().sum().unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![p.lambda]);
    }

    #[test]
    fn selu_params_validated() {
        assert!(SeluParams::new(0.9, 1.0).is_err());
        assert!(SeluParams::new(1.1, 0.0).is_err());
        assert!(SeluParams::new(1.1, 1.0).is_ok());
    }

    #[test]
    fn weight_moments_examples() {
        assert_eq!(weight_moments(&[0.0, 0.0, 0.0]).unwrap(), (0.0, 0.0));
        assert_eq!(weight_moments(&[1.0, -1.0]).unwrap(), (0.0, 2.0));
        assert!(weight_moments(&[]).is_err());
    }

    #[test]
    fn moment_map_zero_variance_is_deterministic() {
        let mut rng = RngStream::new(0, 0);
        let p = SeluParams::STANDARD;
        let est = moment_map(
            MomentPair::new(0.7, 0.0).unwrap(),
            2.0,
            1.0,
            p,
            10_000,
            &mut rng,
        )
        .unwrap();
        assert_eq!(est.moments.variance, 0.0);
        assert_eq!(est.moments.mean, p.apply(1.4));
    }

    #[test]
    fn moment_map_rejects_negative_variance_and_few_samples() {
        let p = SeluParams::STANDARD;
        let bad = MomentPair {
            mean: 0.0,
            variance: -1.0,
        };
        assert!(moment_map_with_draws(bad, 0.0, 1.0, p, &vec![0.0; 10_000]).is_err());
        let ok = MomentPair::new(0.0, 1.0).unwrap();
        assert!(moment_map_with_draws(ok, 0.0, 1.0, p, &vec![0.0; 10]).is_err());
    }

    #[test]
    fn running_stats_track_batches() {
        let mut s = BatchNormState::<f64>::new(1);
        let x = Tensor::from_vec(vec![1.0, 3.0], &[2, 1, 1, 1]).unwrap();
        batchnorm2d(&x, &mut s, true).unwrap();
        assert!((s.running_mean[0] - 0.2).abs() < 1e-12);
        // unbiased batch variance 2.0
        assert!((s.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-12);
        let y = batchnorm2d(&x, &mut s, false).unwrap();
        assert!(y.data().iter().all(|v| v.is_finite()));
    }
}
