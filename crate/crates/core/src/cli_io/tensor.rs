//! `BBR1` dense tensor files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "BBR1"
//! dtype   1 byte   0 = f32
//! ndim    1 byte
//! dims    ndim × u32
//! payload prod(dims) × f32, row-major
//! ```

use std::path::Path;

use thiserror::Error;

use crate::discovery::FeatureGrid;
use crate::error::{Error, Result};
use crate::heatmap::Heatmap;

pub const MAGIC: &[u8; 4] = b"BBR1";
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TensorError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),
    #[error("bad shape: {0}")]
    BadShape(String),
}

impl TensorError {
    /// Stable identifier for each failure kind.
    pub fn code(&self) -> &'static str {
        match self {
            TensorError::BadMagic => "bad-magic",
            TensorError::UnsupportedDtype(_) => "unsupported-dtype",
            TensorError::TruncatedHeader => "truncated-header",
            TensorError::TruncatedPayload { .. } => "truncated-payload",
            TensorError::TrailingBytes(_) => "trailing-bytes",
            TensorError::BadShape(_) => "bad-shape",
        }
    }
}

/// Raw f32 tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> std::result::Result<Self, TensorError> {
        if dims.len() > u8::MAX as usize {
            return Err(TensorError::BadShape(format!("{} dims", dims.len())));
        }
        let n = element_count(&dims)?;
        if n != data.len() {
            return Err(TensorError::BadShape(format!("dims {dims:?} hold {n} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, TensorError> {
        if bytes.len() < 4 {
            return Err(if MAGIC.starts_with(bytes) { TensorError::TruncatedHeader } else { TensorError::BadMagic });
        }
        if &bytes[..4] != MAGIC {
            return Err(TensorError::BadMagic);
        }
        if bytes.len() < 6 {
            return Err(TensorError::TruncatedHeader);
        }
        if bytes[4] != DTYPE_F32 {
            return Err(TensorError::UnsupportedDtype(bytes[4]));
        }
        let ndim = bytes[5] as usize;
        let header = 6 + 4 * ndim;
        if bytes.len() < header {
            return Err(TensorError::TruncatedHeader);
        }
        let dims: Vec<u32> = bytes[6..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        let n = element_count(&dims)?;
        let expected = n
            .checked_mul(4)
            .ok_or_else(|| TensorError::BadShape(format!("dims {dims:?} overflow")))?;
        let payload = &bytes[header..];
        if payload.len() < expected {
            return Err(TensorError::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(TensorError::TrailingBytes(payload.len() - expected));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        Ok(Self { dims, data })
    }
}

fn element_count(dims: &[u32]) -> std::result::Result<usize, TensorError> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| TensorError::BadShape(format!("dims {dims:?} overflow")))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(Tensor::from_bytes(&bytes)?)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    std::fs::write(path.as_ref(), tensor.to_bytes()).map_err(|e| Error::io(path.as_ref(), e))
}

impl TryFrom<Tensor> for Heatmap {
    type Error = Error;

    /// 2-D tensors with dims `(height, width)`.
    fn try_from(t: Tensor) -> Result<Heatmap> {
        if t.dims.len() != 2 {
            return Err(TensorError::BadShape(format!("heatmap needs 2 dims, got {}", t.dims.len())).into());
        }
        let (h, w) = (t.dims[0] as usize, t.dims[1] as usize);
        Heatmap::new(w, h, t.data.into_iter().map(f64::from).collect())
    }
}

impl From<&Heatmap> for Tensor {
    /// Values are narrowed to f32.
    fn from(m: &Heatmap) -> Tensor {
        Tensor {
            dims: vec![m.height as u32, m.width as u32],
            data: m.values.iter().map(|&v| v as f32).collect(),
        }
    }
}

impl TryFrom<Tensor> for FeatureGrid {
    type Error = Error;

    /// 3-D tensors with dims `(rows, cols, dim)`.
    fn try_from(t: Tensor) -> Result<FeatureGrid> {
        if t.dims.len() != 3 {
            return Err(TensorError::BadShape(format!("feature grid needs 3 dims, got {}", t.dims.len())).into());
        }
        let (r, c, d) = (t.dims[0] as usize, t.dims[1] as usize, t.dims[2] as usize);
        FeatureGrid::new(r, c, d, t.data.into_iter().map(f64::from).collect())
    }
}

impl From<&FeatureGrid> for Tensor {
    fn from(f: &FeatureGrid) -> Tensor {
        Tensor {
            dims: vec![f.rows as u32, f.cols as u32, f.dim as u32],
            data: f.features.iter().map(|&v| v as f32).collect(),
        }
    }
}

pub fn read_heatmap(path: impl AsRef<Path>) -> Result<Heatmap> {
    read_tensor(path)?.try_into()
}

pub fn read_feature_grid(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    read_tensor(path)?.try_into()
}
