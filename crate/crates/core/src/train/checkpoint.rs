//! Binary checkpoint files.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! "HDCK"  u32 version  u32 header_len  header_json
//! u64 entry_count
//! entry*: u32 name_len  name  u8 dtype  u32 rank  u64 extent*  data
//! ```

use std::io::{Read, Write};
use std::path::Path;

use hdcgan_tensor::{DType, Real, RngState, RngStream, Tensor};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::config::TrainConfig;
use super::state::{LossRecord, TrainState};
use crate::error::{Error, Result};
use crate::model::NetworkConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HDCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub effective_size: usize,
    pub layer_count: usize,
    pub dtype: DType,
    pub epoch: u64,
    pub step: u64,
    pub generator_adam_steps: u64,
    pub discriminator_adam_steps: u64,
    pub rng: RngState,
}

enum Payload {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

struct Entry {
    name: String,
    shape: Vec<usize>,
    payload: Payload,
}

impl Entry {
    fn from_tensor<T: Real>(name: String, t: &Tensor<T>) -> Self {
        Self::from_values(name, t.shape().to_vec(), t.data())
    }

    fn from_values<T: Real>(name: String, shape: Vec<usize>, v: &[T]) -> Self {
        let payload = match T::DTYPE {
            DType::F32 => Payload::F32(v.iter().map(|x| x.to_f32().expect("f32")).collect()),
            DType::F64 => Payload::F64(v.iter().map(|x| x.to_f64_lossless()).collect()),
        };
        Self {
            name,
            shape,
            payload,
        }
    }

    fn dtype(&self) -> DType {
        match self.payload {
            Payload::F32(_) => DType::F32,
            Payload::F64(_) => DType::F64,
        }
    }

    fn values<T: Real>(&self) -> Result<Vec<T>> {
        match (&self.payload, T::DTYPE) {
            (Payload::F32(v), DType::F32) => Ok(v.iter().map(|&x| T::lit(f64::from(x))).collect()),
            (Payload::F64(v), DType::F64) => Ok(v.iter().map(|&x| T::lit(x)).collect()),
            _ => Err(Error::Checkpoint(format!(
                "tensor {} is {:?}, expected {:?}",
                self.name,
                self.dtype(),
                T::DTYPE
            ))),
        }
    }

    fn tensor<T: Real>(&self) -> Result<Tensor<T>> {
        Ok(Tensor::from_vec(self.values()?, &self.shape)?)
    }

    fn f64s(&self) -> Vec<f64> {
        match &self.payload {
            Payload::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            Payload::F64(v) => v.clone(),
        }
    }
}

fn adam_entries<T: Real>(
    prefix: &str,
    adam: &AdamState<T>,
    params: &[&Tensor<T>],
    out: &mut Vec<Entry>,
) {
    for (i, p) in params.iter().enumerate() {
        out.push(Entry::from_values(
            format!("{prefix}.m.{i}"),
            p.shape().to_vec(),
            &adam.m[i],
        ));
        out.push(Entry::from_values(
            format!("{prefix}.v.{i}"),
            p.shape().to_vec(),
            &adam.v[i],
        ));
    }
}

fn encode(header: &CheckpointHeader, entries: &[Entry]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for e in entries {
        buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.name.as_bytes());
        buf.push(e.dtype().code());
        buf.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
        for &d in &e.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &e.payload {
            Payload::F32(v) => v.iter().for_each(|x| x.write_le(&mut buf)),
            Payload::F64(v) => v.iter().for_each(|x| x.write_le(&mut buf)),
        }
    }
    Ok(buf)
}

/// Writes `state` to `path` atomically (temporary file then rename).
pub fn save_checkpoint<T: Real>(state: &TrainState<T>, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        network: state.network.clone(),
        train: state.config.clone(),
        effective_size: state.network.effective_size()?,
        layer_count: state.network.layer_count()?,
        dtype: T::DTYPE,
        epoch: state.epoch,
        step: state.step,
        generator_adam_steps: state.g_adam.t,
        discriminator_adam_steps: state.d_adam.t,
        rng: state.rng.state(),
    };
    let mut entries: Vec<Entry> = Vec::new();
    for net in [&state.generator, &state.discriminator] {
        entries.extend(
            net.state_dict()
                .iter()
                .map(|(n, t)| Entry::from_tensor(n.clone(), t)),
        );
    }
    adam_entries(
        "adam.generator",
        &state.g_adam,
        &state.generator.parameters(),
        &mut entries,
    );
    adam_entries(
        "adam.discriminator",
        &state.d_adam,
        &state.discriminator.parameters(),
        &mut entries,
    );
    let history: Vec<f64> = state
        .history
        .iter()
        .flat_map(|r| [r.step as f64, r.epoch as f64, r.d_loss, r.g_loss])
        .collect();
    entries.push(Entry::from_values(
        "history".into(),
        vec![state.history.len(), 4],
        &history,
    ));

    let bytes = encode(&header, &entries)?;
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

fn decode_header(c: &mut Cursor) -> Result<CheckpointHeader> {
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(
            "not a checkpoint file (bad magic)".into(),
        ));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let len = c.u32()? as usize;
    Ok(serde_json::from_slice(c.take(len)?)?)
}

fn decode_entries(c: &mut Cursor) -> Result<Vec<Entry>> {
    let count = c.u64()?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let name_len = c.u32()? as usize;
        let name = String::from_utf8(c.take(name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let dtype = DType::from_code(c.u8()?)
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name}: unknown dtype code")))?;
        let rank = c.u32()? as usize;
        let shape = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let bytes = numel
            .and_then(|n| n.checked_mul(dtype.size_bytes()))
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name}: extents overflow")))?;
        let raw = c.take(bytes)?;
        let payload = match dtype {
            DType::F32 => Payload::F32(raw.chunks_exact(4).map(f32::read_le).collect()),
            DType::F64 => Payload::F64(raw.chunks_exact(8).map(f64::read_le).collect()),
        };
        entries.push(Entry {
            name,
            shape,
            payload,
        });
    }
    if c.pos != c.buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            c.buf.len() - c.pos
        )));
    }
    Ok(entries)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

/// Reads only the JSON header.
pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let buf = read_file(path)?;
    decode_header(&mut Cursor { buf: &buf, pos: 0 })
}

fn take_adam<T: Real>(
    entries: &mut std::slice::Iter<'_, Entry>,
    prefix: &str,
    adam: &mut AdamState<T>,
    params: &[&Tensor<T>],
) -> Result<()> {
    for (i, p) in params.iter().enumerate() {
        for (kind, slot) in [("m", &mut adam.m[i]), ("v", &mut adam.v[i])] {
            let want = format!("{prefix}.{kind}.{i}");
            let e = entries
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {want}")))?;
            if e.name != want || e.shape != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match {want} {:?}",
                    e.name,
                    e.shape,
                    p.shape()
                )));
            }
            *slot = e.values()?;
        }
    }
    Ok(())
}

/// Restores a state written by [`save_checkpoint`]. Nothing is returned
/// unless every tensor matches the networks described by the header.
pub fn load_checkpoint<T: Real>(path: &Path) -> Result<TrainState<T>> {
    let buf = read_file(path)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let header = decode_header(&mut c)?;
    if header.dtype != T::DTYPE {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {:?} tensors, requested {:?}",
            header.dtype,
            T::DTYPE
        )));
    }
    let entries = decode_entries(&mut c)?;
    let mut state = TrainState::<T>::new(header.network.clone(), header.train.clone())?;
    if header.layer_count != state.network.layer_count()? {
        return Err(Error::Checkpoint(format!(
            "header layer count {} disagrees with network config",
            header.layer_count
        )));
    }

    let mut it = entries.iter();
    for net in [&mut state.generator, &mut state.discriminator] {
        let n = net.state_dict().len();
        let chunk: Vec<(String, Tensor<T>)> = it
            .by_ref()
            .take(n)
            .map(|e| Ok((e.name.clone(), e.tensor()?)))
            .collect::<Result<_>>()?;
        net.load_state_dict(&chunk)?;
    }
    take_adam(
        &mut it,
        "adam.generator",
        &mut state.g_adam,
        &state.generator.parameters(),
    )?;
    take_adam(
        &mut it,
        "adam.discriminator",
        &mut state.d_adam,
        &state.discriminator.parameters(),
    )?;
    let hist = it
        .next()
        .filter(|e| e.name == "history" && e.shape.len() == 2 && e.shape[1] == 4)
        .ok_or_else(|| Error::Checkpoint("missing or malformed loss history".into()))?;
    if it.next().is_some() {
        return Err(Error::Checkpoint("unexpected extra tensors".into()));
    }
    state.history = hist
        .f64s()
        .chunks_exact(4)
        .map(|r| LossRecord {
            step: r[0] as u64,
            epoch: r[1] as u64,
            d_loss: r[2],
            g_loss: r[3],
        })
        .collect();
    state.g_adam.t = header.generator_adam_steps;
    state.d_adam.t = header.discriminator_adam_steps;
    state.epoch = header.epoch;
    state.step = header.step;
    state.rng = RngStream::from_state(&header.rng)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainState<f32> {
        let net = NetworkConfig {
            base_size: (8, 8),
            latent_dim: 4,
            n_filters: 2,
            ..NetworkConfig::default()
        };
        TrainState::new(net, TrainConfig::default()).unwrap()
    }

    #[test]
    fn header_reports_layer_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        save_checkpoint(&tiny(), &p).unwrap();
        let h = read_checkpoint_header(&p).unwrap();
        assert_eq!(h.layer_count, 2);
        assert_eq!(h.dtype, DType::F32);
        assert_eq!(&std::fs::read(&p).unwrap()[..4], b"HDCK");
    }

    #[test]
    fn corrupt_and_truncated_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        save_checkpoint(&tiny(), &p).unwrap();
        let good = std::fs::read(&p).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&p),
            Err(Error::Checkpoint(_))
        ));

        let mut bad = good.clone();
        bad[4] = 9;
        std::fs::write(&p, &bad).unwrap();
        let err = load_checkpoint::<f32>(&p).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");

        std::fs::write(&p, &good[..good.len() - 3]).unwrap();
        assert!(load_checkpoint::<f32>(&p).is_err());

        std::fs::write(&p, &good).unwrap();
        assert!(load_checkpoint::<f64>(&p).is_err());
        assert!(load_checkpoint::<f32>(&p).is_ok());
    }
}
