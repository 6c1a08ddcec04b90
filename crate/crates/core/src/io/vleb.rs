//! VLEB: a self-contained embedding bundle.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "VLEB"
//! 4       4           version, u32 LE (= 1)
//! 8       4           dim, u32 LE
//! 12      4           count, u32 LE
//! 16      4           meta_len, u32 LE
//! 20      meta_len    UTF-8 JSON metadata
//! ...     4*count*dim f32 LE payload, row-major
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"VLEB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    Image,
    Text,
    Object,
    Prototype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub kind: BundleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<Map<String, Value>>,
}

impl BundleMeta {
    pub fn new(kind: BundleKind) -> Self {
        Self {
            kind,
            labels: None,
            extra: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_extra(mut self, key: &str, value: Value) -> Self {
        self.extra.get_or_insert_with(Map::new).insert(key.to_string(), value);
        self
    }

    pub fn extra(&self, key: &str) -> Option<&Value> {
        self.extra.as_ref()?.get(key)
    }
}

/// An in-memory bundle. The payload is kept as 32-bit floats, exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub meta: BundleMeta,
    dim: usize,
    data: Vec<f32>,
}

impl Bundle {
    /// Takes ownership of a row-major payload of `data.len() / dim` rows.
    pub fn from_f32(meta: BundleMeta, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(Error::InvalidShape("zero-width rows with a payload".into()));
        }
        if dim > 0 && !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidShape(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("bundle payload"));
        }
        let bundle = Self { meta, dim, data };
        bundle.check_labels()?;
        Ok(bundle)
    }

    /// Rounds each 64-bit coordinate to the nearest 32-bit float (ties to even).
    pub fn from_embeddings(meta: BundleMeta, dim: usize, rows: &[Embedding]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            crate::error::check_dim(dim, row.dim())?;
            data.extend(row.values().iter().map(|&x| x as f32));
        }
        Self::from_f32(meta, dim, data)
    }

    fn check_labels(&self) -> Result<()> {
        if let Some(labels) = &self.meta.labels {
            if labels.len() != self.count() {
                return Err(Error::MetaParseError(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    self.count()
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn embedding(&self, i: usize) -> Result<Embedding> {
        Embedding::new(self.row(i).iter().map(|&x| f64::from(x)).collect())
    }

    pub fn embeddings(&self) -> Result<Vec<Embedding>> {
        (0..self.count()).map(|i| self.embedding(i)).collect()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::json("bundle metadata", e))?;
        let field =
            |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::InvalidShape(format!("{what} {v} exceeds u32")));
        let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&field(self.dim, "dim")?.to_le_bytes());
        out.extend_from_slice(&field(self.count(), "count")?.to_le_bytes());
        out.extend_from_slice(&field(meta.len(), "meta_len")?.to_le_bytes());
        out.extend_from_slice(&meta);
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(Error::BadMagic(bytes[..4].try_into().expect("4 bytes")));
            }
            return Err(Error::TruncatedFile {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = word(8) as usize;
        let count = word(12) as usize;
        let meta_len = word(16) as usize;

        let expected = (HEADER_LEN as u128) + meta_len as u128 + 4 * (count as u128) * (dim as u128);
        if (bytes.len() as u128) < expected {
            return Err(Error::TruncatedFile {
                expected: usize::try_from(expected).unwrap_or(usize::MAX),
                actual: bytes.len(),
            });
        }
        let expected = expected as usize;
        if bytes.len() > expected {
            return Err(Error::TrailingBytes(bytes.len() - expected));
        }

        let meta_bytes = &bytes[HEADER_LEN..HEADER_LEN + meta_len];
        let meta_str = std::str::from_utf8(meta_bytes).map_err(|e| Error::MetaParseError(e.to_string()))?;
        let meta: BundleMeta = serde_json::from_str(meta_str).map_err(|e| Error::MetaParseError(e.to_string()))?;

        let data: Vec<f32> = bytes[HEADER_LEN + meta_len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if dim == 0 && count > 0 {
            return Err(Error::InvalidShape("rows of width zero".into()));
        }
        Self::from_f32(meta, dim, data)
    }
}

pub fn write_bundle(path: impl AsRef<Path>, bundle: &Bundle) -> Result<()> {
    let bytes = bundle.encode()?;
    super::write_atomic(path.as_ref(), &bytes)
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<Bundle> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Bundle::decode(&bytes)
}
