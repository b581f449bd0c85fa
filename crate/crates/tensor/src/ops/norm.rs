//! Per-channel batch normalization over `[N, C, H, W]` tensors.

use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

/// Batch statistics produced by a training-mode normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased (population) variance over `N·H·W`.
    pub var: Vec<T>,
    /// Elements per channel, `N·H·W`.
    pub count: usize,
}

fn check_affine<T: Real>(op: &'static str, x: &Tensor<T>, p: &Tensor<T>, c: usize) -> Result<()> {
    if p.numel() != c {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: x.shape().to_vec(),
            rhs: p.shape().to_vec(),
        });
    }
    Ok(())
}

fn dims<T: Real>(op: &'static str, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [n, c, h, w] => Ok((n, c, h * w)),
        _ => Err(TensorError::InvalidShape {
            op,
            shape: x.shape().to_vec(),
            reason: "expected [N, C, H, W]".into(),
        }),
    }
}

impl<T: Real> Tensor<T> {
    /// Training-mode normalization: standardize each channel by its batch
    /// mean and biased variance, then apply `gamma · x̂ + beta`.
    ///
    /// Returns the output and the batch statistics used. Requires at least
    /// two elements per channel.
    pub fn batch_norm_train(
        &self,
        gamma: &Tensor<T>,
        beta: &Tensor<T>,
        eps: f64,
    ) -> Result<(Tensor<T>, BatchStats<T>)> {
        const OP: &str = "batch_norm";
        let (n, c, hw) = dims(OP, self)?;
        check_affine(OP, self, gamma, c)?;
        check_affine(OP, self, beta, c)?;
        let m = n * hw;
        if m < 2 {
            return Err(TensorError::InvalidShape {
                op: OP,
                shape: self.shape().to_vec(),
                reason: "training-mode batch norm needs N·H·W ≥ 2".into(),
            });
        }
        let x = self.data();
        let inv_m = T::one() / T::lit(m as f64);
        let eps_t = T::lit(eps);

        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for ch in 0..c {
            let mut s = T::zero();
            for s_i in 0..n {
                let base = (s_i * c + ch) * hw;
                s = x[base..base + hw].iter().fold(s, |a, &v| a + v);
            }
            let mu = s * inv_m;
            let mut ss = T::zero();
            for s_i in 0..n {
                let base = (s_i * c + ch) * hw;
                ss = x[base..base + hw]
                    .iter()
                    .fold(ss, |a, &v| a + (v - mu) * (v - mu));
            }
            mean[ch] = mu;
            var[ch] = ss * inv_m;
        }
        let inv_std: Vec<T> = var.iter().map(|&v| (v + eps_t).sqrt().recip()).collect();

        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        let (g, b) = (gamma.data(), beta.data());
        for s_i in 0..n {
            for ch in 0..c {
                let base = (s_i * c + ch) * hw;
                for i in base..base + hw {
                    let v = (x[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = v;
                    out[i] = g[ch] * v + b[ch];
                }
            }
        }

        let stats = BatchStats {
            mean,
            var,
            count: m,
        };
        let (xin, gam, bet) = (self.clone(), gamma.clone(), beta.clone());
        let backward = Box::new(move |dy: &[T]| {
            let g = gam.data();
            let mut sum_dy = vec![T::zero(); c];
            let mut sum_dy_xhat = vec![T::zero(); c];
            for s_i in 0..n {
                for ch in 0..c {
                    let base = (s_i * c + ch) * hw;
                    for i in base..base + hw {
                        sum_dy[ch] = sum_dy[ch] + dy[i];
                        sum_dy_xhat[ch] = sum_dy_xhat[ch] + dy[i] * xhat[i];
                    }
                }
            }
            // dx = γ/σ · (dy − mean(dy) − x̂ · mean(dy · x̂))
            let gx = xin.is_requires_grad().then(|| {
                let mut gx = vec![T::zero(); dy.len()];
                for s_i in 0..n {
                    for ch in 0..c {
                        let base = (s_i * c + ch) * hw;
                        let k = g[ch] * inv_std[ch];
                        let mdy = sum_dy[ch] * inv_m;
                        let mdyx = sum_dy_xhat[ch] * inv_m;
                        for i in base..base + hw {
                            gx[i] = k * (dy[i] - mdy - xhat[i] * mdyx);
                        }
                    }
                }
                gx
            });
            let gg = gam.is_requires_grad().then(|| sum_dy_xhat.clone());
            let gb = bet.is_requires_grad().then(|| sum_dy.clone());
            vec![gx, gg, gb]
        });
        let y = Tensor::from_op(
            OP,
            out,
            self.shape().to_vec(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            backward,
        )?;
        Ok((y, stats))
    }

    /// Inference-mode normalization with fixed per-channel statistics.
    pub fn batch_norm_eval(
        &self,
        gamma: &Tensor<T>,
        beta: &Tensor<T>,
        mean: &[T],
        var: &[T],
        eps: f64,
    ) -> Result<Tensor<T>> {
        const OP: &str = "batch_norm_eval";
        let (n, c, hw) = dims(OP, self)?;
        check_affine(OP, self, gamma, c)?;
        check_affine(OP, self, beta, c)?;
        if mean.len() != c || var.len() != c {
            return Err(TensorError::ShapeMismatch {
                op: OP,
                lhs: self.shape().to_vec(),
                rhs: vec![mean.len(), var.len()],
            });
        }
        let eps_t = T::lit(eps);
        let inv_std: Vec<T> = var.iter().map(|&v| (v + eps_t).sqrt().recip()).collect();
        let mean = mean.to_vec();
        let x = self.data();
        let (g, b) = (gamma.data(), beta.data());
        let mut out = vec![T::zero(); x.len()];
        for s_i in 0..n {
            for ch in 0..c {
                let base = (s_i * c + ch) * hw;
                for i in base..base + hw {
                    out[i] = g[ch] * (x[i] - mean[ch]) * inv_std[ch] + b[ch];
                }
            }
        }
        let (xin, gam, bet) = (self.clone(), gamma.clone(), beta.clone());
        let backward = Box::new(move |dy: &[T]| {
            let x = xin.data();
            let g = gam.data();
            let mut gx = xin.is_requires_grad().then(|| vec![T::zero(); dy.len()]);
            let mut gg = vec![T::zero(); c];
            let mut gb = vec![T::zero(); c];
            for s_i in 0..n {
                for ch in 0..c {
                    let base = (s_i * c + ch) * hw;
                    for i in base..base + hw {
                        let xhat = (x[i] - mean[ch]) * inv_std[ch];
                        gg[ch] = gg[ch] + dy[i] * xhat;
                        gb[ch] = gb[ch] + dy[i];
                        if let Some(gx) = gx.as_mut() {
                            gx[i] = dy[i] * g[ch] * inv_std[ch];
                        }
                    }
                }
            }
            vec![
                gx,
                gam.is_requires_grad().then_some(gg),
                bet.is_requires_grad().then_some(gb),
            ]
        });
        Tensor::from_op(
            OP,
            out,
            self.shape().to_vec(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            backward,
        )
    }
}
