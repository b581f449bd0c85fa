use hdcgan_tensor::{is_checked, Real, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update applied in place. `t` is the 1-based
/// step number.
pub fn adam_update<T: Real>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("Adam step counter starts at 1".into()));
    }
    if grad.len() != theta.len() || m.len() != theta.len() || v.len() != theta.len() {
        return Err(Error::Config(format!(
            "Adam shape mismatch: param {}, grad {}, moments {}/{}",
            theta.len(),
            grad.len(),
            m.len(),
            v.len()
        )));
    }
    if is_checked() && grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Config("non-finite gradient passed to Adam".into()));
    }
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one, lr, eps) = (T::one(), T::lit(cfg.learning_rate), T::lit(cfg.epsilon));
    let c1 = one - T::lit(cfg.beta1.powf(t as f64));
    let c2 = one - T::lit(cfg.beta2.powf(t as f64));
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// First and second moment estimates for an ordered list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real> {
    pub config: AdamConfig,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    /// Number of updates applied so far.
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[&Tensor<T>], config: AdamConfig) -> Self {
        Self {
            config,
            m: params.iter().map(|p| vec![T::zero(); p.numel()]).collect(),
            v: params.iter().map(|p| vec![T::zero(); p.numel()]).collect(),
            t: 0,
        }
    }

    /// Applies one update using each parameter's accumulated gradient
    /// (absent gradients count as zero) and swaps in fresh leaf tensors.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Config(format!(
                "Adam tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        for (i, p) in params.into_iter().enumerate() {
            let grad = p.grad().unwrap_or_else(|| vec![T::zero(); p.numel()]);
            let mut theta = p.data().to_vec();
            adam_update(
                &mut theta,
                &grad,
                &mut self.m[i],
                &mut self.v[i],
                self.t,
                &self.config,
            )?;
            *p = Tensor::from_vec(theta, p.shape())?.requires_grad();
        }
        Ok(())
    }
}
