//! On-disk cache of distance matrices keyed by a hash of their inputs.
//!
//! The key digests the metric and the exact bits of every representation, so a
//! hit can only return the matrix those inputs would produce.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::metrics::Representation;

const RECT_MAGIC: &[u8; 4] = b"PHRM";

/// Dense row-major matrix of distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 8);
        out.extend_from_slice(RECT_MAGIC);
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < 20 || &bytes[..4] != RECT_MAGIC {
            return None;
        }
        let rows = u64::from_le_bytes(bytes[4..12].try_into().ok()?) as usize;
        let cols = u64::from_le_bytes(bytes[12..20].try_into().ok()?) as usize;
        let body = &bytes[20..];
        if body.len() != rows.checked_mul(cols)?.checked_mul(8)? {
            return None;
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        Some(Self { rows, cols, data })
    }
}

fn absorb(h: &mut Sha256, items: &[Representation]) {
    h.update((items.len() as u64).to_le_bytes());
    for item in items {
        match item {
            Representation::Diagram(d) => {
                h.update([0u8, d.dim]);
                h.update((d.pairs.len() as u64).to_le_bytes());
                for &(b, de) in &d.pairs {
                    h.update(b.to_bits().to_le_bytes());
                    h.update(de.to_bits().to_le_bytes());
                }
                h.update(d.truncation.unwrap_or(f64::NAN).to_bits().to_le_bytes());
            }
            Representation::Vector(v) => {
                h.update([1u8]);
                h.update((v.len() as u64).to_le_bytes());
                for x in v {
                    h.update(x.to_bits().to_le_bytes());
                }
            }
        }
    }
}

/// Cache key for the distances between `rows` and `cols` (`None` for pairwise).
pub fn cache_key(rows: &[Representation], cols: Option<&[Representation]>) -> String {
    let mut h = Sha256::new();
    h.update(b"phstab-distances-v1");
    match cols {
        None => h.update([0u8]),
        Some(_) => h.update([1u8]),
    }
    absorb(&mut h, rows);
    if let Some(c) = cols {
        absorb(&mut h, c);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory-backed cache; a `None` directory disables it.
#[derive(Debug, Clone, Default)]
pub struct DistanceCache {
    dir: Option<PathBuf>,
}

impl DistanceCache {
    pub fn new(dir: Option<&Path>) -> Self {
        Self {
            dir: dir.map(Path::to_path_buf),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.bin")))
    }

    pub fn load(&self, key: &str) -> Option<Matrix> {
        let path = self.path(key)?;
        let mut bytes = Vec::new();
        fs::File::open(path).ok()?.read_to_end(&mut bytes).ok()?;
        Matrix::decode(&bytes)
    }

    /// Best effort: a failed write only costs a recomputation later.
    pub fn store(&self, key: &str, m: &Matrix, provenance: &serde_json::Value) {
        let (Some(dir), Some(path)) = (self.dir.as_ref(), self.path(key)) else {
            return;
        };
        let result = fs::create_dir_all(dir).and_then(|_| {
            let tmp = dir.join(format!("{key}.tmp"));
            fs::File::create(&tmp)?.write_all(&m.encode())?;
            fs::rename(&tmp, &path)?;
            let sidecar = serde_json::json!({
                "rows": m.rows,
                "cols": m.cols,
                "provenance": provenance,
            });
            fs::write(
                dir.join(format!("{key}.json")),
                serde_json::to_vec_pretty(&sidecar).expect("json value serialises"),
            )
        });
        if let Err(e) = result {
            log::warn!("could not write cache entry {key}: {e}");
        }
    }
}
