//! `PMSN1` binary container: the 5-byte magic `PMSN1`, a little-endian
//! `u32` header length, a UTF-8 JSON header, then the tensors as raw
//! little-endian arrays in header order.
//!
//! Header layout:
//!
//! ```json
//! {"version": 1, "meta": {...},
//!  "tensors": [{"name": "...", "dtype": "f32|f64|u64", "shape": [..], "offset": 0, "bytes": 0}]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"PMSN1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U64(Vec<u64>),
}

impl TensorData {
    fn dtype(&self) -> &'static str {
        match self {
            TensorData::F32(_) => "f32",
            TensorData::F64(_) => "f64",
            TensorData::U64(_) => "u64",
        }
    }

    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U64(v) => v.len(),
        }
    }

    fn bytes(&self) -> Vec<u8> {
        match self {
            TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::U64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U64(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    #[serde(default)]
    meta: serde_json::Value,
    tensors: Vec<Entry>,
}

/// Named tensors plus free-form JSON metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub meta: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl Container {
    pub fn new(meta: serde_json::Value) -> Self {
        Container {
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: TensorData) {
        self.tensors.push(Tensor {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0u64;
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut blob = Vec::new();
        for t in &self.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::Validation(format!(
                    "tensor `{}` has {} values for shape {:?}",
                    t.name,
                    t.data.len(),
                    t.shape
                )));
            }
            let b = t.data.bytes();
            entries.push(Entry {
                name: t.name.clone(),
                dtype: t.data.dtype().into(),
                shape: t.shape.clone(),
                offset,
                bytes: b.len() as u64,
            });
            offset += b.len() as u64;
            blob.extend_from_slice(&b);
        }
        let header = serde_json::to_vec(&Header {
            version: VERSION,
            meta: self.meta.clone(),
            tensors: entries,
        })
        .map_err(|e| Error::Validation(format!("cannot encode container header: {e}")))?;
        let mut out = Vec::with_capacity(9 + header.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&blob);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 5 || &bytes[..5] != MAGIC {
            return Err(Error::parse(path, 0, "missing PMSN1 magic"));
        }
        let len = bytes
            .get(5..9)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
            .ok_or_else(|| Error::parse(path, 5, "file truncated in header length"))?;
        let hdr = bytes
            .get(9..9 + len)
            .ok_or_else(|| Error::parse(path, bytes.len() as u64, "file truncated in JSON header"))?;
        let header: Header = serde_json::from_slice(hdr)
            .map_err(|e| Error::parse(path, 9 + e.column() as u64, format!("bad JSON header: {e}")))?;
        if header.version != VERSION {
            return Err(Error::format(
                path,
                format!("unsupported container version {}", header.version),
            ));
        }
        let base = 9 + len;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let start = base as u64 + e.offset;
            let raw = bytes
                .get(start as usize..(start + e.bytes) as usize)
                .ok_or_else(|| Error::parse(path, bytes.len() as u64, format!("tensor `{}` truncated", e.name)))?;
            let count: usize = e.shape.iter().product();
            let width = match e.dtype.as_str() {
                "f32" => 4,
                "f64" | "u64" => 8,
                other => return Err(Error::parse(path, start, format!("unknown dtype `{other}`"))),
            };
            if raw.len() != count * width {
                return Err(Error::parse(
                    path,
                    start,
                    format!("tensor `{}` size does not match its shape", e.name),
                ));
            }
            let data = match e.dtype.as_str() {
                "f32" => TensorData::F32(
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                "f64" => TensorData::F64(
                    raw.chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                _ => TensorData::U64(
                    raw.chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
            };
            tensors.push(Tensor {
                name: e.name,
                shape: e.shape,
                data,
            });
        }
        Ok(Container {
            meta: header.meta,
            tensors,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Container::from_bytes(&bytes, path)
    }
}
