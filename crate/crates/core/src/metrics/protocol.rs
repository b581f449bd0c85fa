use hdcgan_tensor::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureExtractor;
use super::frechet::{fit_gaussian, frechet_distance};
use super::msssim::{ms_ssim_planes, MsSsimConfig, Plane};
use super::report::MetricReport;
use crate::error::{Error, Result};
use crate::image::{Image, Interpolation};

pub const DEFAULT_PAIRS: usize = 10_000;
pub const DEFAULT_MSSSIM_RESIZE: usize = 128;
pub const DEFAULT_FD_RESIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsSsimProtocol {
    pub pairs: usize,
    pub resize: usize,
    pub seed: u64,
    pub config: MsSsimConfig,
    /// Keep every pair's score in the report.
    pub keep_pairs: bool,
}

impl Default for MsSsimProtocol {
    fn default() -> Self {
        Self {
            pairs: DEFAULT_PAIRS,
            resize: DEFAULT_MSSSIM_RESIZE,
            seed: 0,
            config: MsSsimConfig::default(),
            keep_pairs: false,
        }
    }
}

/// `count` index pairs `(i, j)` with `i ≠ j`, each drawn uniformly.
pub fn sample_pairs(n: usize, count: usize, rng: &mut RngStream) -> Vec<(usize, usize)> {
    (0..count)
        .map(|_| {
            let i = rng.below(n);
            let mut j = rng.below(n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

fn resized_planes(images: &[Image], size: usize) -> Vec<Plane> {
    images
        .par_iter()
        .map(|im| {
            if im.height == size && im.width == size {
                Plane::luminance(im)
            } else {
                Plane::luminance(&im.resize(size, size, Interpolation::Bilinear))
            }
        })
        .collect()
}

/// Average MS-SSIM over randomly sampled pairs of distinct images, all
/// resized to `resize × resize`.
pub fn msssim_protocol(images: &[Image], p: &MsSsimProtocol) -> Result<MetricReport> {
    if images.len() < 2 {
        return Err(Error::Metric(format!(
            "need at least 2 images, got {}",
            images.len()
        )));
    }
    if p.pairs == 0 {
        return Err(Error::Metric("pair count must be positive".into()));
    }
    p.config.validate()?;
    let planes = resized_planes(images, p.resize);
    let pairs = sample_pairs(images.len(), p.pairs, &mut RngStream::new(p.seed, 0));
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| ms_ssim_planes(&planes[i], &planes[j], &p.config))
        .collect::<Result<_>>()?;
    let value = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(MetricReport {
        metric: "ms-ssim".into(),
        value,
        pairs: Some(p.pairs),
        resize: p.resize,
        seed: p.seed,
        mode: None,
        per_pair: p.keep_pairs.then_some(scores),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdMode {
    /// One Gaussian over the generated samples of every epoch together.
    #[default]
    Pooled,
    /// One distance per epoch, averaged.
    PerEpochMean,
}

impl FdMode {
    pub fn name(self) -> &'static str {
        match self {
            FdMode::Pooled => "pooled",
            FdMode::PerEpochMean => "per-epoch-mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdProtocol {
    pub resize: usize,
    pub extractor: FeatureExtractor,
    pub mode: FdMode,
    pub seed: u64,
}

impl Default for FdProtocol {
    fn default() -> Self {
        Self {
            resize: DEFAULT_FD_RESIZE,
            extractor: FeatureExtractor::default(),
            mode: FdMode::Pooled,
            seed: 0,
        }
    }
}

fn resize_all(images: &[Image], size: usize) -> Vec<Image> {
    images
        .par_iter()
        .map(|im| im.resize(size, size, Interpolation::Bilinear))
        .collect()
}

/// Fréchet distance between Gaussians fitted to features of `real` and of
/// the generated sets (one set per epoch).
pub fn fd_protocol(
    real: &[Image],
    generated: &[Vec<Image>],
    p: &FdProtocol,
) -> Result<MetricReport> {
    if generated.iter().all(|g| g.is_empty()) {
        return Err(Error::Metric("no generated images".into()));
    }
    let real_f = p.extractor.extract(&resize_all(real, p.resize))?;
    let real_g = fit_gaussian(&real_f)?;
    let value = match p.mode {
        FdMode::Pooled => {
            let all: Vec<Image> = generated.iter().flatten().cloned().collect();
            frechet_distance(
                &real_g,
                &fit_gaussian(&p.extractor.extract(&resize_all(&all, p.resize))?)?,
            )?
        }
        FdMode::PerEpochMean => {
            let mut total = 0.0;
            for set in generated {
                let g = fit_gaussian(&p.extractor.extract(&resize_all(set, p.resize))?)?;
                total += frechet_distance(&real_g, &g)?;
            }
            total / generated.len() as f64
        }
    };
    Ok(MetricReport {
        metric: "fd".into(),
        value,
        pairs: None,
        resize: p.resize,
        seed: p.seed,
        mode: Some(p.mode.name().into()),
        per_pair: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_distinct_and_seeded() {
        let a = sample_pairs(3, 500, &mut RngStream::new(1, 0));
        assert!(a.iter().all(|(i, j)| i != j && *i < 3 && *j < 3));
        assert_eq!(a, sample_pairs(3, 500, &mut RngStream::new(1, 0)));
    }

    #[test]
    fn defaults() {
        let p = MsSsimProtocol::default();
        assert_eq!((p.pairs, p.resize), (10_000, 128));
        assert_eq!(FdProtocol::default().resize, 64);
        assert_eq!(FdProtocol::default().mode, FdMode::Pooled);
    }

    #[test]
    fn identical_images_score_one() {
        let im = Image::new(
            3,
            20,
            20,
            (0..1200).map(|i| ((i % 13) as f64) / 6.5 - 1.0).collect(),
        )
        .unwrap();
        let p = MsSsimProtocol {
            pairs: 5,
            resize: 32,
            ..Default::default()
        };
        let r = msssim_protocol(&[im.clone(), im.clone(), im], &p).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(msssim_protocol(&[], &p).is_err());
    }
}
