//! Image ingestion, mirror augmentation, attribute manifests and
//! class-balanced batching.

pub mod schema;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hdcgan_tensor::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{list_image_files, Image, Interpolation};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const STATS_FILE: &str = "stats.json";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    /// Image path relative to the manifest directory.
    pub path: String,
    pub source_id: String,
    /// The image is used flipped left-to-right.
    pub mirrored: bool,
    /// Attribute → class; unlabeled attributes are absent.
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
    pub image_size: usize,
}

/// Per-attribute class counts.
pub type ClassCounts = BTreeMap<String, BTreeMap<String, usize>>;

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut out = ClassCounts::new();
        for r in &self.records {
            for (a, c) in &r.attributes {
                *out.entry(a.clone())
                    .or_default()
                    .entry(c.clone())
                    .or_default() += 1;
            }
        }
        out
    }

    /// Writes the manifest CSV: `path,source_id,mirrored,<attributes…>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["path", "source_id", "mirrored"];
        header.extend(schema::attribute_names());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.path.clone(), r.source_id.clone(), r.mirrored.to_string()];
            row.extend(
                schema::attribute_names().map(|a| r.attributes.get(a).cloned().unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a manifest CSV; `image_size` is not stored in the file.
    pub fn read_csv(path: &Path, image_size: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path)?;
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[..3] != ["path", "source_id", "mirrored"] {
            return Err(Error::Dataset(format!(
                "{}: unexpected header {header:?}",
                path.display()
            )));
        }
        for a in &header[3..] {
            schema::classes(a)?;
        }
        let mut records = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let mirrored = rec[2].parse().map_err(|_| {
                Error::Dataset(format!(
                    "{}: line {}: bad mirrored flag",
                    path.display(),
                    line + 2
                ))
            })?;
            let mut attributes = BTreeMap::new();
            for (a, v) in header[3..].iter().zip(rec.iter().skip(3)) {
                if !v.is_empty() {
                    attributes.insert(a.clone(), schema::validate_value(a, v)?);
                }
            }
            records.push(SampleRecord {
                path: rec[0].to_string(),
                source_id: rec[1].to_string(),
                mirrored,
                attributes,
            });
        }
        Ok(Self {
            records,
            image_size,
        })
    }

    /// Reads a directory written by [`ingest`]: the image size comes from
    /// `stats.json`, the records from `manifest.csv`.
    pub fn open(dir: &Path) -> Result<Self> {
        let stats_path = dir.join(STATS_FILE);
        let text = std::fs::read_to_string(&stats_path).map_err(|e| Error::io(&stats_path, e))?;
        let stats: DatasetStats = serde_json::from_str(&text)?;
        let m = Self::read_csv(&dir.join(MANIFEST_FILE), stats.image_size)?;
        if m.len() != stats.records {
            return Err(Error::Dataset(format!(
                "{}: manifest has {} records, stats report {}",
                dir.display(),
                m.len(),
                stats.records
            )));
        }
        Ok(m)
    }

    /// Writes `manifest.csv` and `stats.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.write_csv(&dir.join(MANIFEST_FILE))?;
        write_stats(self, &dir.join(STATS_FILE))
    }

    /// Loads every record's image relative to `root`, flipping mirrored
    /// entries, and checks the declared size.
    pub fn load_images(&self, root: &Path) -> Result<Vec<Image>> {
        self.records
            .par_iter()
            .map(|r| {
                let im = Image::load(&root.join(&r.path))?;
                if im.height != self.image_size || im.width != self.image_size || im.channels != 3 {
                    return Err(Error::Dataset(format!(
                        "{}: {}x{}x{}, manifest declares 3x{s}x{s}",
                        r.path,
                        im.channels,
                        im.height,
                        im.width,
                        s = self.image_size
                    )));
                }
                Ok(if r.mirrored { im.flip_horizontal() } else { im })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub class: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub attribute: String,
    /// Classes in descending order of count.
    pub classes: Vec<ClassShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub records: usize,
    pub image_size: usize,
    pub attributes: Vec<AttributeStats>,
}

pub fn dataset_stats(m: &DatasetManifest) -> DatasetStats {
    let counts = m.class_counts();
    let attributes = schema::attribute_names()
        .filter_map(|a| {
            let c = counts.get(a)?;
            let total: usize = c.values().sum();
            let mut classes: Vec<ClassShare> = c
                .iter()
                .map(|(k, &n)| ClassShare {
                    class: k.clone(),
                    count: n,
                    fraction: n as f64 / total as f64,
                })
                .collect();
            classes.sort_by(|x, y| y.count.cmp(&x.count).then_with(|| x.class.cmp(&y.class)));
            Some(AttributeStats {
                attribute: a.to_string(),
                classes,
            })
        })
        .collect();
    DatasetStats {
        records: m.len(),
        image_size: m.image_size,
        attributes,
    }
}

pub fn write_stats(m: &DatasetManifest, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&dataset_stats(m))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pixel box `(x, y, width, height)`.
pub type CropBox = (usize, usize, usize, usize);

#[derive(Debug, Clone, Default)]
struct SidecarRow {
    crop: Option<CropBox>,
    attributes: BTreeMap<String, String>,
}

/// Reads the optional attribute CSV: a `file` column, optional
/// `crop_x,crop_y,crop_w,crop_h`, and any schema attributes.
fn read_sidecar(path: &Path) -> Result<BTreeMap<String, SidecarRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let file_col = header
        .iter()
        .position(|h| h == "file")
        .ok_or_else(|| Error::Dataset(format!("{}: missing `file` column", path.display())))?;
    let crop_cols: Vec<Option<usize>> = ["crop_x", "crop_y", "crop_w", "crop_h"]
        .iter()
        .map(|c| header.iter().position(|h| h == c))
        .collect();
    let attr_cols: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| *h != "file" && !h.starts_with("crop_"))
        .map(|(i, h)| {
            let a = schema::canonical(h);
            schema::classes(&a).map(|_| (i, a))
        })
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let at =
            |msg: String| Error::Dataset(format!("{}: line {}: {msg}", path.display(), line + 2));
        let crop = if crop_cols.iter().all(Option::is_some) {
            let v: Vec<&str> = crop_cols
                .iter()
                .map(|c| rec[c.expect("present")].trim())
                .collect();
            if v.iter().all(|s| s.is_empty()) {
                None
            } else {
                let n: Vec<usize> = v
                    .iter()
                    .map(|s| s.parse().map_err(|_| at(format!("bad crop value {s:?}"))))
                    .collect::<Result<_>>()?;
                Some((n[0], n[1], n[2], n[3]))
            }
        } else {
            None
        };
        let mut attributes = BTreeMap::new();
        for (i, a) in &attr_cols {
            let v = rec[*i].trim();
            if !v.is_empty() {
                let c = schema::validate_value(a, v).map_err(|e| at(e.to_string()))?;
                attributes.insert(a.clone(), c);
            }
        }
        out.insert(rec[file_col].to_string(), SidecarRow { crop, attributes });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub target_size: usize,
    pub attributes_csv: Option<PathBuf>,
    pub interpolation: Interpolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub manifest: DatasetManifest,
    /// Files that could not be decoded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Crops (centered square, or the sidecar box), resizes to
/// `target_size²`, and writes PNGs plus `manifest.csv` and `stats.json`
/// under `out_dir`.
pub fn ingest(dir: &Path, out_dir: &Path, opts: &IngestOptions) -> Result<IngestReport> {
    if opts.target_size == 0 {
        return Err(Error::Dataset("target size must be positive".into()));
    }
    let files = list_image_files(dir)?;
    if files.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: no images found",
            dir.display()
        )));
    }
    let sidecar = match &opts.attributes_csv {
        Some(p) => read_sidecar(p)?,
        None => BTreeMap::new(),
    };
    let images_out = out_dir.join(IMAGE_DIR);
    std::fs::create_dir_all(&images_out).map_err(|e| Error::io(&images_out, e))?;

    let processed: Vec<Result<Option<SampleRecord>>> = files
        .par_iter()
        .map(|file| {
            let name = file
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            let stem = file
                .file_stem()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            let im = match Image::load(file) {
                Ok(im) => im,
                Err(e) => {
                    log::warn!("skipping {}: {e}", file.display());
                    return Ok(None);
                }
            };
            let row = sidecar.get(&name).cloned().unwrap_or_default();
            let cropped = match row.crop {
                Some((x, y, w, h)) => im.crop(y, x, h, w)?,
                None => im.center_crop_square(),
            };
            let out = cropped.resize(opts.target_size, opts.target_size, opts.interpolation);
            let rel = format!("{IMAGE_DIR}/{stem}.png");
            out.save_png(&out_dir.join(&rel))?;
            Ok(Some(SampleRecord {
                path: rel,
                source_id: stem,
                mirrored: false,
                attributes: row.attributes,
            }))
        })
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (file, r) in files.iter().zip(processed) {
        match r? {
            Some(rec) => records.push(rec),
            None => skipped.push((file.clone(), "undecodable".to_string())),
        }
    }
    if records.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: no decodable images",
            dir.display()
        )));
    }
    let manifest = DatasetManifest {
        records,
        image_size: opts.target_size,
    };
    manifest.save(out_dir)?;
    Ok(IngestReport { manifest, skipped })
}

/// Appends a mirrored copy of every source that does not have one yet.
pub fn mirror_augment(m: &DatasetManifest) -> DatasetManifest {
    let has_mirror: std::collections::BTreeSet<&str> = m
        .records
        .iter()
        .filter(|r| r.mirrored)
        .map(|r| r.source_id.as_str())
        .collect();
    let mut records = m.records.clone();
    for r in &m.records {
        if !r.mirrored && !has_mirror.contains(r.source_id.as_str()) {
            records.push(SampleRecord {
                mirrored: true,
                ..r.clone()
            });
        }
    }
    DatasetManifest {
        records,
        image_size: m.image_size,
    }
}

/// One epoch of index batches in which every class of `attribute` gets an
/// equal share: `batch_size / K` each, with the remainder rotating across
/// classes from batch to batch. Each class draws from its own shuffled
/// pool, reshuffled when exhausted, so minority classes are oversampled.
/// The epoch has `ceil(K · largest_class / batch_size)` batches.
pub fn balanced_batches(
    m: &DatasetManifest,
    attribute: &str,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<usize>>> {
    let classes = schema::classes(attribute)?;
    if batch_size == 0 {
        return Err(Error::Dataset("batch size must be positive".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, r) in m.records.iter().enumerate() {
        if let Some(c) = r.attributes.get(attribute) {
            let k = classes
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::Dataset(format!("{c:?} is not a class of {attribute}")))?;
            members[k].push(i);
        }
    }
    if let Some(k) = members.iter().position(Vec::is_empty) {
        return Err(Error::Dataset(format!(
            "class {}/{} has no records",
            attribute, classes[k]
        )));
    }
    let k = classes.len();
    let largest = members.iter().map(Vec::len).max().unwrap_or(0);
    let n_batches = (k * largest).div_ceil(batch_size);
    let mut pools: Vec<(Vec<usize>, usize)> = members
        .into_iter()
        .map(|mut v| {
            rng.shuffle(&mut v);
            (v, 0)
        })
        .collect();
    let (base, extra) = (batch_size / k, batch_size % k);
    let mut batches = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let mut batch = Vec::with_capacity(batch_size);
        for (c, (pool, pos)) in pools.iter_mut().enumerate() {
            let take = base + usize::from((c + k - b % k) % k < extra);
            for _ in 0..take {
                if *pos == pool.len() {
                    rng.shuffle(pool);
                    *pos = 0;
                }
                batch.push(pool[*pos]);
                *pos += 1;
            }
        }
        batches.push(batch);
    }
    Ok(batches)
}

/// Two visually distinct classes of random images (soft blobs and
/// stripes) for smoke tests and demos. Returns images and class labels.
pub fn synthetic_two_class(n: usize, size: usize, seed: u64) -> (Vec<Image>, Vec<usize>) {
    let mut rng = RngStream::new(seed, 0);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let color: Vec<f64> = (0..3).map(|_| rng.uniform() * 1.6 - 0.8).collect();
        let (cy, cx) = (rng.uniform() * size as f64, rng.uniform() * size as f64);
        let radius = (0.15 + 0.25 * rng.uniform()) * size as f64;
        let freq = 2.0 + 4.0 * rng.uniform();
        let phase = rng.uniform() * std::f64::consts::TAU;
        let mut data = vec![0.0; 3 * size * size];
        for y in 0..size {
            for x in 0..size {
                let t = if class == 0 {
                    let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                    (-d2 / (2.0 * radius * radius)).exp() * 2.0 - 1.0
                } else {
                    (freq * std::f64::consts::TAU * (x + y) as f64 / size as f64 + phase).sin()
                };
                for c in 0..3 {
                    let v = 0.5 * t + 0.5 * color[c] * t.abs().max(0.3);
                    data[(c * size + y) * size + x] = v.clamp(-1.0, 1.0);
                }
            }
        }
        images.push(Image::new(3, size, size, data).expect("sized"));
        labels.push(class);
    }
    (images, labels)
}
