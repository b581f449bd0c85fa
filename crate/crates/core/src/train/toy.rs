//! Small known distributions and a discriminator trained against a frozen
//! generator, for checking the best-response formula.

use hdcgan_tensor::{RngStream, Tensor};
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::loss::{d_loss, optimal_discriminator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ToyDistribution {
    /// Probability mass `probs[i]` on `points[i]`.
    Discrete { points: Vec<f64>, probs: Vec<f64> },
    GaussianMixture1d {
        means: Vec<f64>,
        variances: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Isotropic components in the plane.
    GaussianMixture2d {
        means: Vec<[f64; 2]>,
        variances: Vec<f64>,
        weights: Vec<f64>,
    },
}

fn check_probs(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&w| !(w >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(Error::Config(format!(
            "probabilities {p:?} must be non-negative and sum to 1"
        )));
    }
    Ok(())
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

impl ToyDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Discrete { points, probs } => {
                if points.len() != probs.len() {
                    return Err(Error::Config("points and probs differ in length".into()));
                }
                check_probs(probs)
            }
            Self::GaussianMixture1d {
                means,
                variances,
                weights,
            } => {
                if means.len() != variances.len() || means.len() != weights.len() {
                    return Err(Error::Config("mixture parameter lengths differ".into()));
                }
                if variances.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Config("mixture variances must be positive".into()));
                }
                check_probs(weights)
            }
            Self::GaussianMixture2d {
                means,
                variances,
                weights,
            } => {
                if means.len() != variances.len() || means.len() != weights.len() {
                    return Err(Error::Config("mixture parameter lengths differ".into()));
                }
                if variances.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Config("mixture variances must be positive".into()));
                }
                check_probs(weights)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianMixture2d { .. } => 2,
            _ => 1,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        match self {
            Self::Discrete { points, probs } => vec![points[pick(probs, rng.uniform())]],
            Self::GaussianMixture1d {
                means,
                variances,
                weights,
            } => {
                let k = pick(weights, rng.uniform());
                vec![means[k] + variances[k].sqrt() * rng.normal()]
            }
            Self::GaussianMixture2d {
                means,
                variances,
                weights,
            } => {
                let k = pick(weights, rng.uniform());
                let s = variances[k].sqrt();
                vec![
                    means[k][0] + s * rng.normal(),
                    means[k][1] + s * rng.normal(),
                ]
            }
        }
    }

    /// Probability mass (discrete) or density (mixtures) at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            Self::Discrete { points, probs } => points
                .iter()
                .zip(probs)
                .filter(|(p, _)| **p == x[0])
                .map(|(_, w)| w)
                .sum(),
            Self::GaussianMixture1d {
                means,
                variances,
                weights,
            } => (0..means.len())
                .map(|k| {
                    let d = x[0] - means[k];
                    weights[k] * (-d * d / (2.0 * variances[k])).exp()
                        / (2.0 * PI * variances[k]).sqrt()
                })
                .sum(),
            Self::GaussianMixture2d {
                means,
                variances,
                weights,
            } => (0..means.len())
                .map(|k| {
                    let d2 = (x[0] - means[k][0]).powi(2) + (x[1] - means[k][1]).powi(2);
                    weights[k] * (-d2 / (2.0 * variances[k])).exp() / (2.0 * PI * variances[k])
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            batch_size: 512,
            steps: 2000,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyOutcome {
    pub probes: Vec<Vec<f64>>,
    /// Trained discriminator output at each probe.
    pub learned: Vec<f64>,
    /// `p_data / (p_data + p_g)` at each probe.
    pub optimal: Vec<f64>,
    pub final_loss: f64,
}

impl ToyOutcome {
    pub fn max_abs_error(&self) -> f64 {
        self.learned
            .iter()
            .zip(&self.optimal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Discrete supports are one-hot encoded; continuous samples are used as
/// raw coordinates.
struct Encoder {
    support: Option<Vec<f64>>,
    dim: usize,
}

impl Encoder {
    fn new(p_data: &ToyDistribution, p_g: &ToyDistribution) -> Result<Self> {
        match (p_data, p_g) {
            (
                ToyDistribution::Discrete { points: a, .. },
                ToyDistribution::Discrete { points: b, .. },
            ) => {
                let mut support: Vec<f64> = a.iter().chain(b).copied().collect();
                support.sort_by(f64::total_cmp);
                support.dedup();
                Ok(Self {
                    dim: support.len(),
                    support: Some(support),
                })
            }
            (a, b)
                if a.dim() == b.dim()
                    && !matches!(a, ToyDistribution::Discrete { .. })
                    && !matches!(b, ToyDistribution::Discrete { .. }) =>
            {
                Ok(Self {
                    support: None,
                    dim: a.dim(),
                })
            }
            _ => Err(Error::Config(
                "data and generator distributions are incompatible".into(),
            )),
        }
    }

    fn encode(&self, xs: &[Vec<f64>]) -> Result<Tensor<f64>> {
        let mut out = Vec::with_capacity(xs.len() * self.dim);
        for x in xs {
            match &self.support {
                Some(s) => {
                    let k = s
                        .iter()
                        .position(|&p| p == x[0])
                        .expect("sample lies on the support");
                    out.extend((0..self.dim).map(|j| if j == k { 1.0 } else { 0.0 }));
                }
                None => out.extend_from_slice(x),
            }
        }
        Ok(Tensor::from_vec(out, &[xs.len(), self.dim])?)
    }
}

struct Mlp {
    w1: Tensor<f64>,
    b1: Tensor<f64>,
    w2: Tensor<f64>,
    b2: Tensor<f64>,
}

impl Mlp {
    fn new(input: usize, hidden: usize, rng: &mut RngStream) -> Self {
        Self {
            w1: rng
                .normal_tensor(&[input, hidden], 0.0, (1.0 / input as f64).sqrt())
                .requires_grad(),
            b1: Tensor::zeros(&[hidden]).requires_grad(),
            w2: rng
                .normal_tensor(&[hidden, 1], 0.0, (1.0 / hidden as f64).sqrt())
                .requires_grad(),
            b2: Tensor::zeros(&[1]).requires_grad(),
        }
    }

    fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        let n = x.shape()[0];
        let h = x.matmul(&self.w1)?.add(&self.b1)?.leaky_relu(0.2)?;
        Ok(h.matmul(&self.w2)?
            .add(&self.b2)?
            .sigmoid()?
            .reshape(&[n])?)
    }

    fn params(&mut self) -> Vec<&mut Tensor<f64>> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Trains an MLP discriminator against samples of `p_data` and a frozen
/// generator distribution `p_g` with the discriminator loss, then compares
/// its outputs at `probes` with the best-response ratio.
pub fn train_toy_discriminator(
    p_data: &ToyDistribution,
    p_g: &ToyDistribution,
    probes: &[Vec<f64>],
    cfg: &ToyConfig,
) -> Result<ToyOutcome> {
    p_data.validate()?;
    p_g.validate()?;
    let enc = Encoder::new(p_data, p_g)?;
    let mut rng = RngStream::new(cfg.seed, 0);
    let mut mlp = Mlp::new(enc.dim, cfg.hidden, &mut rng);
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = {
        let ps: Vec<&Tensor<f64>> = vec![&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2];
        AdamState::new(&ps, adam_cfg)
    };
    let mut final_loss = f64::NAN;
    for _ in 0..cfg.steps {
        let real: Vec<Vec<f64>> = (0..cfg.batch_size)
            .map(|_| p_data.sample(&mut rng))
            .collect();
        let fake: Vec<Vec<f64>> = (0..cfg.batch_size).map(|_| p_g.sample(&mut rng)).collect();
        let loss = d_loss(
            &mlp.forward(&enc.encode(&real)?)?,
            &mlp.forward(&enc.encode(&fake)?)?,
        )?;
        final_loss = loss.item();
        loss.backward()?;
        adam.step(mlp.params())?;
    }
    let learned = mlp.forward(&enc.encode(probes)?)?.to_f64_vec();
    let optimal = probes
        .iter()
        .map(|x| optimal_discriminator(p_data.density(x), p_g.density(x)))
        .collect::<Result<_>>()?;
    Ok(ToyOutcome {
        probes: probes.to_vec(),
        learned,
        optimal,
        final_loss,
    })
}
