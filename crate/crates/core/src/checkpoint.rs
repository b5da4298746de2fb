//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes   b"LEVRLCK1"
//! hlen       u32       length of the JSON header
//! header     hlen bytes, UTF-8 JSON:
//!            {"config": ModelConfig, "step": u64, "meta": any,
//!             "params": n, "optimizer": m}
//! records    n parameter records followed by m optimizer-state records:
//!            name_len u32, name (UTF-8), ndim u32, dims u64 * ndim,
//!            values f64 * prod(dims)
//! ```
//!
//! Values are stored as f64 whatever the in-memory precision, so an f32 model
//! round-trips exactly. Parameter records follow the model's registration
//! order; loading matches them by name.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LevenshteinModel, ModelConfig};
use crate::tensor::{ParamStore, Real, Tensor};

const MAGIC: &[u8; 8] = b"LEVRLCK1";
// guards against allocating from a corrupt length field
const MAX_ELEMS: u64 = 1 << 28;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    step: u64,
    meta: serde_json::Value,
    params: usize,
    optimizer: usize,
}

/// A model snapshot plus the training position it was taken at.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub model: LevenshteinModel<T>,
    pub step: u64,
    /// Free-form run description (seed, phase, ...).
    pub meta: serde_json::Value,
    pub optimizer: Vec<(String, Tensor<T>)>,
}

impl<T: Real> Checkpoint<T> {
    pub fn new(model: LevenshteinModel<T>) -> Self {
        Checkpoint {
            model,
            step: 0,
            meta: serde_json::Value::Null,
            optimizer: Vec::new(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let header = Header {
            config: self.model.config().clone(),
            step: self.step,
            meta: self.meta.clone(),
            params: self.model.params.len(),
            optimizer: self.optimizer.len(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&header).map_err(io)?;
        let params = self.model.params.iter().map(|p| (p.name.as_str(), &p.tensor));
        let optim = self.optimizer.iter().map(|(n, t)| (n.as_str(), t));
        for (name, t) in params.chain(optim) {
            write_record(&mut w, name, t).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        read_checkpoint(&mut BufReader::new(file)).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn write_record<W: Write, T: Real>(w: &mut W, name: &str, t: &Tensor<T>) -> std::io::Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.f64().to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file ({e})")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    read_exact::<R, 4>(r).map(u32::from_le_bytes)
}

fn read_bytes<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file ({e})")))?;
    Ok(buf)
}

fn read_record<R: Read, T: Real>(r: &mut R) -> Result<(String, Tensor<T>)> {
    let name_len = read_u32(r)? as usize;
    if name_len > 4096 {
        return Err(Error::Checkpoint(format!("implausible name length {name_len}")));
    }
    let name = String::from_utf8(read_bytes(r, name_len)?)
        .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
    let ndim = read_u32(r)? as usize;
    if ndim > 8 {
        return Err(Error::Checkpoint(format!("`{name}` has {ndim} dimensions")));
    }
    let mut shape = Vec::with_capacity(ndim);
    let mut elems = 1u64;
    for _ in 0..ndim {
        let d = read_exact::<R, 8>(r).map(u64::from_le_bytes)?;
        elems = elems.saturating_mul(d);
        shape.push(d as usize);
    }
    if elems > MAX_ELEMS {
        return Err(Error::Checkpoint(format!("`{name}` claims {elems} values")));
    }
    let raw = read_bytes(r, elems as usize * 8)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    Ok((name, Tensor::new(shape, data)?))
}

fn read_checkpoint<R: Read, T: Real>(r: &mut R) -> Result<Checkpoint<T>> {
    if &read_exact::<R, 8>(r)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let hlen = read_u32(r)? as usize;
    let header: Header = serde_json::from_slice(&read_bytes(r, hlen)?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let mut params = ParamStore::new();
    for _ in 0..header.params {
        let (name, t) = read_record(r)?;
        params.add(name, t)?;
    }
    let mut optimizer = Vec::with_capacity(header.optimizer);
    for _ in 0..header.optimizer {
        optimizer.push(read_record(r)?);
    }
    let trailing = r
        .read(&mut [0u8; 1])
        .map_err(|e| Error::Checkpoint(format!("read failed ({e})")))?;
    if trailing != 0 {
        return Err(Error::Checkpoint("trailing bytes after last record".into()));
    }
    Ok(Checkpoint {
        model: LevenshteinModel::from_params(header.config, params)?,
        step: header.step,
        meta: header.meta,
        optimizer,
    })
}
