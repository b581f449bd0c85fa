use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Standard per-scale exponents, rescaled so they sum to exactly one.
pub const STANDARD_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsSsimConfig {
    pub scales: usize,
    pub weights: Vec<f64>,
    /// Largest Gaussian window side; shrinks to fit small scales.
    pub window_size: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Width of the pixel value range (2 for `[-1, 1]`).
    pub dynamic_range: f64,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        let total: f64 = STANDARD_WEIGHTS.iter().sum();
        Self {
            scales: 5,
            weights: STANDARD_WEIGHTS.iter().map(|w| w / total).collect(),
            window_size: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 2.0,
        }
    }
}

impl MsSsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 || self.weights.len() != self.scales {
            return Err(Error::Metric(format!(
                "{} weights given for {} scales",
                self.weights.len(),
                self.scales
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Metric(format!(
                "scale weights must be non-negative and sum to 1, got {sum}"
            )));
        }
        if self.window_size % 2 == 0 || !(self.window_sigma > 0.0) {
            return Err(Error::Metric(
                "window size must be odd and sigma positive".into(),
            ));
        }
        if !(self.c1() > 0.0 && self.c2() > 0.0) {
            return Err(Error::Metric("stability constants must be positive".into()));
        }
        Ok(())
    }

    /// Smallest image side the scale pyramid accepts.
    pub fn min_side(&self) -> usize {
        1 << (self.scales - 1)
    }
}

/// A single-channel plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn luminance(im: &Image) -> Self {
        Self {
            height: im.height,
            width: im.width,
            data: im.luminance(),
        }
    }

    /// 2×2 box average keeping a trailing odd row/column as is; the result
    /// is `ceil(h/2) × ceil(w/2)`.
    fn downsample(&self) -> Plane {
        let (h, w) = (self.height.div_ceil(2), self.width.div_ceil(2));
        let at = |y: usize, x: usize| {
            self.data[y.min(self.height - 1) * self.width + x.min(self.width - 1)]
        };
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let (y0, x0) = (2 * y, 2 * x);
                data.push(
                    0.25 * (at(y0, x0) + at(y0, x0 + 1) + at(y0 + 1, x0) + at(y0 + 1, x0 + 1)),
                );
            }
        }
        Plane {
            height: h,
            width: w,
            data,
        }
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering.
fn filter_valid(p: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|j| k[j] * p[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|j| k[j] * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term at one scale.
fn ssim_terms(a: &Plane, b: &Plane, cfg: &MsSsimConfig) -> (f64, f64) {
    let size = cfg.window_size.min(a.height).min(a.width);
    let sigma = cfg.window_sigma * size as f64 / cfg.window_size as f64;
    let k = gaussian_window(size, sigma);
    let (h, w) = (a.height, a.width);
    let prod = |f: fn(f64, f64) -> f64| {
        a.data
            .iter()
            .zip(&b.data)
            .map(|(&x, &y)| f(x, y))
            .collect::<Vec<_>>()
    };
    let mu_a = filter_valid(&a.data, h, w, &k);
    let mu_b = filter_valid(&b.data, h, w, &k);
    let aa = filter_valid(&prod(|x, _| x * x), h, w, &k);
    let bb = filter_valid(&prod(|_, y| y * y), h, w, &k);
    let ab = filter_valid(&prod(|x, y| x * y), h, w, &k);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let n = mu_a.len() as f64;
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let c = (2.0 * cov + c2) / (va + vb + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs += c;
        ssim += l * c;
    }
    (ssim / n, cs / n)
}

/// Per-scale terms: contrast-structure at every scale and full SSIM at
/// the coarsest.
#[derive(Debug, Clone, PartialEq)]
pub struct MsSsimTerms {
    pub cs: Vec<f64>,
    pub coarsest_ssim: f64,
}

pub fn ms_ssim_terms(a: &Plane, b: &Plane, cfg: &MsSsimConfig) -> Result<MsSsimTerms> {
    cfg.validate()?;
    if a.height != b.height || a.width != b.width {
        return Err(Error::Metric(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    if a.height.min(a.width) < cfg.min_side() {
        return Err(Error::Metric(format!(
            "{}x{} is too small for {} scales (need ≥ {})",
            a.height,
            a.width,
            cfg.scales,
            cfg.min_side()
        )));
    }
    let (mut a, mut b) = (a.clone(), b.clone());
    let mut cs = Vec::with_capacity(cfg.scales);
    let mut coarsest_ssim = 0.0;
    for s in 0..cfg.scales {
        let (ssim, c) = ssim_terms(&a, &b, cfg);
        cs.push(c);
        coarsest_ssim = ssim;
        if s + 1 < cfg.scales {
            a = a.downsample();
            b = b.downsample();
        }
    }
    Ok(MsSsimTerms { cs, coarsest_ssim })
}

/// Multi-scale SSIM of two planes: `ssim_M^{w_M} · Π_{j<M} cs_j^{w_j}`,
/// with negative terms clamped to zero.
pub fn ms_ssim_planes(a: &Plane, b: &Plane, cfg: &MsSsimConfig) -> Result<f64> {
    let t = ms_ssim_terms(a, b, cfg)?;
    let m = cfg.scales - 1;
    let mut v = t.coarsest_ssim.max(0.0).powf(cfg.weights[m]);
    for j in 0..m {
        v *= t.cs[j].max(0.0).powf(cfg.weights[j]);
    }
    Ok(v)
}

/// MS-SSIM between the luminance of two images.
pub fn ms_ssim(a: &Image, b: &Image, cfg: &MsSsimConfig) -> Result<f64> {
    ms_ssim_planes(&Plane::luminance(a), &Plane::luminance(b), cfg)
}
