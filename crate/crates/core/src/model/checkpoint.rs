//! Checkpoint files: a small self-describing archive of named `f32`
//! tensors plus a JSON metadata block.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! magic      4 bytes  "FNCK"
//! version    u8       1
//! meta_len   u32      byte length of the JSON metadata
//! meta       JSON     {"model": ModelConfig, ...}
//! count      u32      number of tensors
//! count × {
//!   name_len u16, name (UTF-8),
//!   ndim u8, dims ndim × u32,
//!   values   numel × f32
//! }
//! ```
//!
//! Tensors are written in ascending name order.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fsutil::{read_file, write_atomic};
use crate::tensor::Tensor;

use super::{Model, ModelConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FNCK";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorArchive {
    pub meta: Value,
    pub tensors: BTreeMap<String, Tensor<f32>>,
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!("{what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

impl TensorArchive {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        let meta = serde_json::to_vec(&self.meta)?;
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        if c.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Malformed("not a checkpoint file".into()));
        }
        let version = c.u8("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let meta_len = c.u32("metadata length")? as usize;
        let meta: Value = serde_json::from_slice(c.take(meta_len, "metadata")?)?;
        let count = c.u32("tensor count")?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let n = c.u16("name length")? as usize;
            let name = std::str::from_utf8(c.take(n, "name")?)
                .map_err(|_| Error::Malformed("tensor name is not UTF-8".into()))?
                .to_string();
            let ndim = c.u8("rank")? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(c.u32("dim")? as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = c.take(numel * 4, "tensor values")?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            tensors.insert(name, Tensor::from_vec(&shape, data)?);
        }
        if c.remaining() != 0 {
            return Err(Error::Malformed(format!("{} trailing bytes", c.remaining())));
        }
        Ok(Self { meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

pub fn model_archive(model: &Model<f32>) -> TensorArchive {
    TensorArchive {
        meta: json!({ "model": model.config() }),
        tensors: model
            .params()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect(),
    }
}

pub fn model_from_archive(archive: &TensorArchive) -> Result<Model<f32>> {
    let config: ModelConfig = serde_json::from_value(
        archive
            .meta
            .get("model")
            .cloned()
            .ok_or_else(|| Error::Malformed("checkpoint metadata lacks `model`".into()))?,
    )?;
    let params = archive
        .tensors
        .iter()
        .filter(|(k, _)| !k.contains('/'))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Model::from_params(&config, params)
}

pub fn save_checkpoint(model: &Model<f32>, path: &Path) -> Result<()> {
    model_archive(model).save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    model_from_archive(&TensorArchive::load(path)?)
}
