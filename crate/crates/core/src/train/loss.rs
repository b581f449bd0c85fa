use hdcgan_tensor::{Real, Tensor};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` before
/// taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

fn non_empty<T: Real>(name: &str, t: &Tensor<T>) -> Result<()> {
    if t.numel() == 0 {
        return Err(Error::Config(format!("{name}: empty batch")));
    }
    Ok(())
}

fn mean_log<T: Real>(p: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)?.log()?.mean()?)
}

/// Discriminator loss: `−½·mean(log D(x)) − ½·mean(log(1 − D(G(z))))`.
pub fn d_loss<T: Real>(d_real: &Tensor<T>, d_fake: &Tensor<T>) -> Result<Tensor<T>> {
    non_empty("d_loss", d_real)?;
    non_empty("d_loss", d_fake)?;
    let real_term = mean_log(d_real)?;
    let fake_term = mean_log(&d_fake.neg()?.add_scalar(1.0)?)?;
    Ok(real_term.add(&fake_term)?.scale(-0.5)?)
}

/// Non-saturating generator loss: `−mean(log D(G(z)))`.
pub fn g_loss<T: Real>(d_fake: &Tensor<T>) -> Result<Tensor<T>> {
    non_empty("g_loss", d_fake)?;
    Ok(mean_log(d_fake)?.neg()?)
}

/// Best response of the discriminator against a fixed generator:
/// `p_data / (p_data + p_g)`.
pub fn optimal_discriminator(p_data: f64, p_g: f64) -> Result<f64> {
    if !(p_data >= 0.0 && p_g >= 0.0) {
        return Err(Error::Config(format!(
            "densities must be non-negative, got {p_data}, {p_g}"
        )));
    }
    if p_data + p_g == 0.0 {
        return Err(Error::Config("both densities are zero".into()));
    }
    Ok(p_data / (p_data + p_g))
}
