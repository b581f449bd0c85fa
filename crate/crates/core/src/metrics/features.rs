use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hdcgan_tensor::RngStream;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, Interpolation};

/// How images become feature vectors for the Fréchet distance.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureExtractor {
    /// Resize to `size × size` and flatten all channels.
    Downsample { size: usize },
    /// Flattened pixels times a fixed Gaussian matrix with `dim` rows.
    Projection { dim: usize, seed: u64 },
    /// Precomputed features read from a file.
    File(PathBuf),
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor::Downsample { size: 8 }
    }
}

impl FromStr for FeatureExtractor {
    type Err = Error;

    /// `downsample:SIZE`, `projection:DIM[:SEED]` or `file:PATH`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let num = |v: &str, what: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Metric(format!("extractor {s:?}: bad {what} {v:?}")))
        };
        match kind {
            "downsample" => Ok(Self::Downsample {
                size: if rest.is_empty() {
                    8
                } else {
                    num(rest, "size")? as usize
                },
            }),
            "projection" => {
                let (dim, seed) = rest.split_once(':').unwrap_or((rest, "0"));
                Ok(Self::Projection {
                    dim: num(dim, "dimension")? as usize,
                    seed: num(seed, "seed")?,
                })
            }
            "file" if !rest.is_empty() => Ok(Self::File(PathBuf::from(rest))),
            _ => Err(Error::Metric(format!("unknown feature extractor {s:?}"))),
        }
    }
}

impl FeatureExtractor {
    pub fn extract(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        match self {
            Self::Downsample { size } => {
                if *size == 0 {
                    return Err(Error::Metric("downsample size must be positive".into()));
                }
                Ok(images
                    .par_iter()
                    .map(|im| im.resize(*size, *size, Interpolation::Bilinear).data)
                    .collect())
            }
            Self::Projection { dim, seed } => {
                let Some(first) = images.first() else {
                    return Ok(Vec::new());
                };
                let d = first.data.len();
                if images.iter().any(|im| im.data.len() != d) {
                    return Err(Error::Metric("images differ in size".into()));
                }
                let mut rng = RngStream::new(*seed, 0);
                let scale = 1.0 / (*dim as f64).sqrt();
                let m: Vec<f64> = (0..dim * d).map(|_| rng.normal() * scale).collect();
                Ok(images
                    .par_iter()
                    .map(|im| {
                        (0..*dim)
                            .map(|r| {
                                m[r * d..(r + 1) * d]
                                    .iter()
                                    .zip(&im.data)
                                    .map(|(a, b)| a * b)
                                    .sum()
                            })
                            .collect()
                    })
                    .collect())
            }
            Self::File(path) => read_feature_file(path),
        }
    }
}

/// Reads a feature matrix: a header line `n d`, then either `n` CSV rows
/// (`.csv` files) or `n·d` little-endian f64 values.
pub fn read_feature_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Metric(format!("{}: missing header line", path.display())))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::Metric("header is not text".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Metric(format!("bad header {header:?}")))
        })
        .collect::<Result<_>>()?;
    let [n, d] = dims[..] else {
        return Err(Error::Metric(format!(
            "header must be `n d`, got {header:?}"
        )));
    };
    let body = &bytes[nl + 1..];
    let is_csv = path.extension().and_then(|e| e.to_str()) == Some("csv");
    let rows: Vec<Vec<f64>> = if is_csv {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(body);
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let row: Vec<f64> = rec
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| {
                    Error::Metric(format!("{}: row {} is not numeric", path.display(), k + 1))
                })?;
            if row.len() != d {
                return Err(Error::Metric(format!(
                    "{}: row {} has {} values, header says {d}",
                    path.display(),
                    k + 1,
                    row.len()
                )));
            }
            rows.push(row);
        }
        rows
    } else {
        if body.len() != n * d * 8 {
            return Err(Error::Metric(format!(
                "{}: expected {} bytes of data, found {}",
                path.display(),
                n * d * 8,
                body.len()
            )));
        }
        body.chunks_exact(8 * d.max(1))
            .map(|row| {
                row.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                    .collect()
            })
            .collect()
    };
    if rows.len() != n {
        return Err(Error::Metric(format!(
            "{}: header says {n} rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!(
            "downsample:8".parse::<FeatureExtractor>().unwrap(),
            FeatureExtractor::Downsample { size: 8 }
        );
        assert_eq!(
            "projection:16:3".parse::<FeatureExtractor>().unwrap(),
            FeatureExtractor::Projection { dim: 16, seed: 3 }
        );
        assert!("inception".parse::<FeatureExtractor>().is_err());
        assert!("projection:x".parse::<FeatureExtractor>().is_err());
    }

    #[test]
    fn downsample_dimension() {
        let im = Image::filled(3, 64, 64, 0.5);
        let f = FeatureExtractor::Downsample { size: 8 }
            .extract(&[im])
            .unwrap();
        assert_eq!(f[0].len(), 192);
    }

    #[test]
    fn feature_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("f.csv");
        std::fs::write(&csv, "2 3\n1,2,3\n4,5,6\n").unwrap();
        assert_eq!(
            read_feature_file(&csv).unwrap(),
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]
        );
        std::fs::write(&csv, "2 3\n1,2,3\n4,5\n").unwrap();
        assert!(read_feature_file(&csv).is_err());

        let bin = dir.path().join("f.bin");
        let mut bytes = b"1 2\n".to_vec();
        for v in [0.5f64, -2.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&bin, &bytes).unwrap();
        assert_eq!(read_feature_file(&bin).unwrap(), vec![vec![0.5, -2.0]]);
        std::fs::write(&bin, &bytes[..bytes.len() - 1]).unwrap();
        assert!(read_feature_file(&bin).is_err());
    }
}
