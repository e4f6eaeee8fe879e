//! `PGRD` grid files.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "PGRD"
//! 4       2           version (u16, currently 1)
//! 6       2           dtype (u16, 1 = f64)
//! 8       4           rows (u32)
//! 12      4           cols (u32)
//! 16      4           metadata length m in bytes (u32)
//! 20      m           metadata, UTF-8 "key=value\n" lines sorted by key
//! 20+m    rows*cols*8 payload, row-major
//! end-32  32          SHA-256 of every preceding byte
//! ```
//!
//! All integers and samples are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use paperprint_core::Grid;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"PGRD";
pub const VERSION: u16 = 1;
pub const DTYPE_F64: u16 = 1;
pub const HEADER_LEN: usize = 20;
pub const CHECKSUM_LEN: usize = 32;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFile {
    pub grid: Grid,
    pub meta: BTreeMap<String, String>,
}

impl GridFile {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            meta: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    /// Metadata value that must be present, parsed.
    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| CliError::Invalid(format!("grid file lacks metadata '{key}'")))?;
        raw.parse()
            .map_err(|_| CliError::Invalid(format!("metadata '{key}' has bad value '{raw}'")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (rows, cols) = self.grid.shape();
        let mut meta = String::new();
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(CliError::Invalid(format!(
                    "unencodable metadata entry '{k}'"
                )));
            }
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        let dim = |n: usize| {
            u32::try_from(n).map_err(|_| CliError::Invalid(format!("dimension {n} exceeds u32")))
        };
        let meta_len = u32::try_from(meta.len())
            .map_err(|_| CliError::Invalid("metadata too large".into()))?;
        let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + rows * cols * 8 + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&DTYPE_F64.to_le_bytes());
        out.extend_from_slice(&dim(rows)?.to_le_bytes());
        out.extend_from_slice(&dim(cols)?.to_le_bytes());
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        for v in self.grid.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let sum = Sha256::digest(&out);
        out.extend_from_slice(&sum);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |why: &str| CliError::Integrity(format!("grid file {why}"));
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(corrupt("is truncated"));
        }
        if &bytes[..4] != MAGIC {
            return Err(CliError::Invalid("not a PGRD grid file".into()));
        }
        let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != sum {
            return Err(corrupt("checksum does not match"));
        }
        let u16_at = |o: usize| u16::from_le_bytes([body[o], body[o + 1]]);
        let u32_at = |o: usize| {
            u32::from_le_bytes([body[o], body[o + 1], body[o + 2], body[o + 3]]) as usize
        };
        let version = u16_at(4);
        if version != VERSION {
            return Err(CliError::Invalid(format!(
                "unsupported grid file version {version}"
            )));
        }
        let dtype = u16_at(6);
        if dtype != DTYPE_F64 {
            return Err(CliError::Invalid(format!("unsupported dtype code {dtype}")));
        }
        let (rows, cols, meta_len) = (u32_at(8), u32_at(12), u32_at(16));
        let payload = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| corrupt("has impossible dimensions"))?;
        if body.len() != HEADER_LEN + meta_len + payload {
            return Err(corrupt("length disagrees with its header"));
        }
        let meta_text = std::str::from_utf8(&body[HEADER_LEN..HEADER_LEN + meta_len])
            .map_err(|_| corrupt("metadata is not UTF-8"))?;
        let mut meta = BTreeMap::new();
        for line in meta_text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| corrupt("metadata line lacks '='"))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let data = body[HEADER_LEN + meta_len..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            grid: Grid::new(rows, cols, data)?,
            meta,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(CliError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(CliError::io(path))?)
    }
}
