//! CSEM binary embedding files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CSEM" | u32 version = 1 | u32 n | u32 d
//! n × (u16 byte length, UTF-8 id bytes)
//! n × d f32 values, row-major
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::records::RecordSet;
use crate::error::{Error, Result};

pub const CSEM_MAGIC: &[u8; 4] = b"CSEM";
pub const CSEM_VERSION: u32 = 1;
/// Maximum allowed deviation of a row's Euclidean norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-3;

/// Raw file contents in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct CsemFile {
    pub ids: Vec<String>,
    pub d: usize,
    pub values: Vec<f32>,
}

/// Row-major `n × d` matrix whose rows are aligned with `ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    d: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * d {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form {} rows of dimension {d}",
                data.len(),
                ids.len()
            )));
        }
        Ok(Self { ids, d, data })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Row slices for the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Vec<&[f64]> {
        indices.iter().map(|&i| self.row(i)).collect()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Values as f32 for writing.
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormCheck {
    /// Every row must have norm 1 ± [`NORM_TOLERANCE`].
    UnitRows,
    /// Accept rows of any norm (synthetic generators).
    Skip,
}

#[derive(Debug, Clone)]
pub struct EmbeddingLoad {
    pub matrix: EmbeddingMatrix,
    /// Ids present in the file with no matching record; their rows were dropped.
    pub orphan_ids: Vec<String>,
}

pub fn write_csem(path: impl AsRef<Path>, ids: &[String], d: usize, values: &[f32]) -> Result<()> {
    let path = path.as_ref();
    if values.len() != ids.len() * d {
        return Err(Error::InvalidArgument(format!(
            "{} values do not form {} rows of dimension {d}",
            values.len(),
            ids.len()
        )));
    }
    let n = u32::try_from(ids.len())
        .map_err(|_| Error::InvalidArgument("too many rows for CSEM".into()))?;
    let d32 = u32::try_from(d).map_err(|_| Error::InvalidArgument("dimension too large".into()))?;
    let mut buf = Vec::with_capacity(16 + ids.len() * 16 + values.len() * 4);
    buf.extend_from_slice(CSEM_MAGIC);
    buf.extend_from_slice(&CSEM_VERSION.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&d32.to_le_bytes());
    for id in ids {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::InvalidArgument(format!("id `{id}` longer than 65535 bytes")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::EmbeddingFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_csem(path: impl AsRef<Path>) -> Result<CsemFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_csem(&bytes)
}

fn decode_csem(bytes: &[u8]) -> Result<CsemFile> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != CSEM_MAGIC {
        return Err(Error::EmbeddingFormat("bad magic bytes, expected CSEM".into()));
    }
    let version = cur.u32()?;
    if version != CSEM_VERSION {
        return Err(Error::EmbeddingFormat(format!(
            "unsupported version {version}, expected {CSEM_VERSION}"
        )));
    }
    let n = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    if d == 0 && n > 0 {
        return Err(Error::EmbeddingFormat("zero dimension".into()));
    }
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = cur.u16()? as usize;
        let raw = cur.take(len)?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| Error::EmbeddingFormat(format!("id at byte {} is not UTF-8", cur.pos)))?;
        ids.push(id.to_owned());
    }
    let payload = cur.take(n * d * 4)?;
    if cur.pos != bytes.len() {
        return Err(Error::EmbeddingFormat(format!(
            "{} trailing bytes after values",
            bytes.len() - cur.pos
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(CsemFile { ids, d, values })
}

/// Loads the embedding file and reorders rows to match `records`.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    records: &RecordSet,
    norm: NormCheck,
) -> Result<EmbeddingLoad> {
    load_embeddings_for_ids(path, &records.ids(), norm)
}

/// Loads the embedding file and reorders rows to match `ids`.
///
/// Rows whose id is not requested are dropped and reported; a requested id
/// without a row is fatal, as is a row violating the unit-norm check.
pub fn load_embeddings_for_ids(
    path: impl AsRef<Path>,
    ids: &[String],
    norm: NormCheck,
) -> Result<EmbeddingLoad> {
    let file = read_csem(path)?;
    align(file, ids, norm)
}

fn align(file: CsemFile, ids: &[String], norm: NormCheck) -> Result<EmbeddingLoad> {
    let d = file.d;
    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(file.ids.len());
    for (row, id) in file.ids.iter().enumerate() {
        if by_id.insert(id.as_str(), row).is_some() {
            return Err(Error::EmbeddingFormat(format!("duplicate id `{id}`")));
        }
    }
    let wanted: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
    let orphan_ids: Vec<String> = file
        .ids
        .iter()
        .filter(|id| !wanted.contains(id.as_str()))
        .cloned()
        .collect();
    if let Some(first) = orphan_ids.first() {
        log::warn!(
            "{} embedding rows have no matching record (first `{first}`); dropped",
            orphan_ids.len()
        );
    }

    let mut data = Vec::with_capacity(ids.len() * d);
    for (i, id) in ids.iter().enumerate() {
        let src = *by_id
            .get(id.as_str())
            .ok_or_else(|| Error::MissingEmbedding(id.clone()))?;
        let row = &file.values[src * d..(src + 1) * d];
        if norm == NormCheck::UnitRows {
            let nrm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if (nrm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::NormViolation {
                    row: i,
                    id: id.clone(),
                    norm: nrm,
                });
            }
        }
        data.extend(row.iter().map(|&v| f64::from(v)));
    }
    Ok(EmbeddingLoad {
        matrix: EmbeddingMatrix::new(ids.to_vec(), d.max(1), data)?,
        orphan_ids,
    })
}
