//! Planar images with values in `[-1, 1]`, plus resizing and file I/O.

use std::path::Path;

use hdcgan_tensor::{Real, Tensor};
use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};

/// A `channels × height × width` image stored plane by plane.
///
/// Pixel values are nominally in `[-1, 1]`; 8-bit files map through
/// `2·v/255 − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Triangle filter; plain bilinear when enlarging, widened to cover the
    /// source footprint (antialiased) when shrinking.
    #[default]
    Bilinear,
    Nearest,
}

/// Maps an 8-bit intensity onto `[-1, 1]`.
pub fn normalize_u8(v: f64) -> f64 {
    2.0 * v / 255.0 - 1.0
}

/// Inverse of [`normalize_u8`], rounded and clamped to `0..=255`.
pub fn denormalize_u8(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Config(format!(
                "image data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }

    /// Luminance plane (ITU-R BT.601 weights); single-channel images are
    /// returned unchanged.
    pub fn luminance(&self) -> Vec<f64> {
        match self.channels {
            3 => {
                let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
                (0..r.len())
                    .map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i])
                    .collect()
            }
            _ => self.plane(0).to_vec(),
        }
    }

    pub fn flip_horizontal(&self) -> Image {
        let mut out = self.clone();
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    out.data[(c * self.height + y) * self.width + x] =
                        self.at(c, y, self.width - 1 - x);
                }
            }
        }
        out
    }

    /// Crops the rectangle starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::Config(format!(
                "crop {height}x{width}+{top}+{left} outside {}x{} image",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for y in top..top + height {
                for x in left..left + width {
                    data.push(self.at(c, y, x));
                }
            }
        }
        Image::new(self.channels, height, width, data)
    }

    /// Largest centered square.
    pub fn center_crop_square(&self) -> Image {
        let side = self.height.min(self.width);
        let top = (self.height - side) / 2;
        let left = (self.width - side) / 2;
        self.crop(top, left, side, side).expect("square fits")
    }

    pub fn resize(&self, height: usize, width: usize, interp: Interpolation) -> Image {
        if height == self.height && width == self.width {
            return self.clone();
        }
        let rows = axis_weights(self.height, height, interp);
        let cols = axis_weights(self.width, width, interp);
        let mut tmp = vec![0.0; self.channels * self.height * width];
        for c in 0..self.channels {
            for y in 0..self.height {
                let src = &self.data[(c * self.height + y) * self.width..][..self.width];
                for (x, taps) in cols.iter().enumerate() {
                    tmp[(c * self.height + y) * width + x] =
                        taps.iter().map(|&(i, w)| w * src[i]).sum();
                }
            }
        }
        let mut data = vec![0.0; self.channels * height * width];
        for c in 0..self.channels {
            for (y, taps) in rows.iter().enumerate() {
                for x in 0..width {
                    data[(c * height + y) * width + x] = taps
                        .iter()
                        .map(|&(i, w)| w * tmp[(c * self.height + i) * width + x])
                        .sum();
                }
            }
        }
        Image {
            channels: self.channels,
            height,
            width,
            data,
        }
    }

    pub fn load(path: &Path) -> Result<Image> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        Ok(Self::from_rgb8(&rgb))
    }

    pub fn from_rgb8(rgb: &ImageBuffer<Rgb<u8>, Vec<u8>>) -> Image {
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let mut data = vec![0.0; 3 * h * w];
        for (x, y, px) in rgb.enumerate_pixels() {
            for c in 0..3 {
                data[(c * h + y as usize) * w + x as usize] = normalize_u8(px[c] as f64);
            }
        }
        Image {
            channels: 3,
            height: h,
            width: w,
            data,
        }
    }

    pub fn to_rgb8(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            let px = |c: usize| denormalize_u8(self.at(c.min(self.channels - 1), y, x));
            Rgb([px(0), px(1), px(2)])
        })
    }

    /// Writes an 8-bit RGB PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Resampling taps for one axis: for every output index, the contributing
/// source indices and normalized weights.
fn axis_weights(src: usize, dst: usize, interp: Interpolation) -> Vec<Vec<(usize, f64)>> {
    let scale = dst as f64 / src as f64;
    (0..dst)
        .map(|o| {
            let center = (o as f64 + 0.5) / scale;
            match interp {
                Interpolation::Nearest => vec![((center.floor() as usize).min(src - 1), 1.0)],
                Interpolation::Bilinear => {
                    let support = (1.0 / scale).max(1.0);
                    let lo = (center - support - 0.5).floor().max(0.0) as usize;
                    let hi = ((center + support + 0.5).ceil() as usize).min(src);
                    let mut taps: Vec<(usize, f64)> = (lo..hi)
                        .map(|i| {
                            let d = (i as f64 + 0.5 - center).abs() / support;
                            (i, (1.0 - d).max(0.0))
                        })
                        .filter(|&(_, w)| w > 0.0)
                        .collect();
                    if taps.is_empty() {
                        // Sample center lies outside every source pixel's
                        // footprint (extreme edges): clamp.
                        let i = (center.floor().max(0.0) as usize).min(src - 1);
                        taps.push((i, 1.0));
                    }
                    let total: f64 = taps.iter().map(|t| t.1).sum();
                    taps.iter_mut().for_each(|t| t.1 /= total);
                    taps
                }
            }
        })
        .collect()
}

/// Splits an `[N, C, H, W]` tensor into images.
pub fn images_from_tensor<T: Real>(t: &Tensor<T>) -> Result<Vec<Image>> {
    let [n, c, h, w] = *t.shape() else {
        return Err(Error::Config(format!(
            "expected [N, C, H, W], got {:?}",
            t.shape()
        )));
    };
    let per = c * h * w;
    Ok((0..n)
        .map(|i| Image {
            channels: c,
            height: h,
            width: w,
            data: t.data()[i * per..(i + 1) * per]
                .iter()
                .map(|v| v.to_f64_lossless())
                .collect(),
        })
        .collect())
}

/// Stacks same-shaped images into an `[N, C, H, W]` tensor.
pub fn images_to_tensor<T: Real>(images: &[Image]) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::Config("cannot stack an empty image list".into()))?;
    if let Some(bad) = images.iter().find(|im| !im.same_shape(first)) {
        return Err(Error::Config(format!(
            "image shape {}x{}x{} differs from {}x{}x{}",
            bad.channels, bad.height, bad.width, first.channels, first.height, first.width
        )));
    }
    let data: Vec<T> = images
        .iter()
        .flat_map(|im| im.data.iter().map(|&v| T::lit(v)))
        .collect();
    Ok(Tensor::from_vec(
        data,
        &[images.len(), first.channels, first.height, first.width],
    )?)
}

/// Tiles images row-major into one sheet, `columns` wide, with a one-pixel
/// black gutter.
pub fn tile_grid(images: &[Image], columns: usize) -> Result<Image> {
    let first = images
        .first()
        .ok_or_else(|| Error::Config("cannot tile an empty image list".into()))?;
    let columns = columns.max(1).min(images.len());
    let rows = images.len().div_ceil(columns);
    let (h, w, c) = (first.height, first.width, first.channels);
    let sheet_h = rows * (h + 1) + 1;
    let sheet_w = columns * (w + 1) + 1;
    let mut sheet = Image::filled(c, sheet_h, sheet_w, -1.0);
    for (k, im) in images.iter().enumerate() {
        if !im.same_shape(first) {
            return Err(Error::Config("grid images differ in shape".into()));
        }
        let (top, left) = ((k / columns) * (h + 1) + 1, (k % columns) * (w + 1) + 1);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    sheet.data[(ch * sheet_h + top + y) * sheet_w + left + x] = im.at(ch, y, x);
                }
            }
        }
    }
    Ok(sheet)
}

/// Image files (PNG/PPM/PGM/PNM) directly inside `dir`, sorted by name.
pub fn list_image_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "ppm" | "pgm" | "pnm")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every image in `dir`, in file-name order.
pub fn load_dir(dir: &Path) -> Result<Vec<Image>> {
    list_image_files(dir)?
        .iter()
        .map(|p| Image::load(p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        let data = (0..h * w).map(|i| (i as f64) / (h * w) as f64).collect();
        Image::new(1, h, w, data).unwrap()
    }

    #[test]
    fn normalization_endpoints_and_mid_gray() {
        assert_eq!(normalize_u8(0.0), -1.0);
        assert_eq!(normalize_u8(255.0), 1.0);
        assert_eq!(normalize_u8(127.5), 0.0);
        assert_eq!(denormalize_u8(normalize_u8(200.0)), 200);
    }

    #[test]
    fn flip_is_an_involution() {
        let im = ramp(3, 5);
        assert_ne!(im.flip_horizontal(), im);
        assert_eq!(im.flip_horizontal().flip_horizontal(), im);
    }

    #[test]
    fn resize_identity_and_constant() {
        let im = ramp(4, 4);
        assert_eq!(im.resize(4, 4, Interpolation::Bilinear), im);
        let flat = Image::filled(3, 7, 5, 0.25);
        for interp in [Interpolation::Bilinear, Interpolation::Nearest] {
            let r = flat.resize(16, 3, interp);
            assert!(r.data.iter().all(|v| (v - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn downscale_by_two_averages_blocks_for_linear_ramp() {
        // a horizontal linear ramp keeps its mean under antialiased shrinking
        let data: Vec<f64> = (0..8 * 8).map(|i| (i % 8) as f64).collect();
        let im = Image::new(1, 8, 8, data).unwrap();
        let small = im.resize(4, 4, Interpolation::Bilinear);
        let mean_in = im.data.iter().sum::<f64>() / 64.0;
        let mean_out = small.data.iter().sum::<f64>() / 16.0;
        assert!((mean_in - mean_out).abs() < 0.2);
    }

    #[test]
    fn nearest_upscale_replicates() {
        let im = Image::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let r = im.resize(2, 4, Interpolation::Nearest);
        assert_eq!(r.data, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn tensor_round_trip() {
        let a = ramp(2, 3);
        let b = Image::filled(1, 2, 3, 0.5);
        let t = images_to_tensor::<f64>(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(t.shape(), &[2, 1, 2, 3]);
        assert_eq!(images_from_tensor(&t).unwrap(), vec![a, b]);
    }

    #[test]
    fn png_round_trip_is_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let im = Image::new(
            3,
            2,
            2,
            vec![
                -1.0, 1.0, 0.0, 0.5, -1.0, 1.0, 0.0, 0.5, -1.0, 1.0, 0.0, 0.5,
            ],
        )
        .unwrap();
        im.save_png(&path).unwrap();
        let back = Image::load(&path).unwrap();
        for (a, b) in im.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn grid_dimensions() {
        let tiles = vec![Image::filled(3, 4, 4, 0.0); 5];
        let g = tile_grid(&tiles, 3).unwrap();
        assert_eq!((g.height, g.width), (2 * 5 + 1, 3 * 5 + 1));
    }
}
