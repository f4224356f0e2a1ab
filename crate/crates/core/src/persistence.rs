//! Persistent homology over GF(2) by boundary-matrix column reduction.
//!
//! Columns are reduced top dimension first; a column whose index is already the
//! pivot of a higher-dimensional column is known to reduce to zero and is
//! skipped (clearing).

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, FilteredComplex};

#[derive(Debug, Error, PartialEq)]
pub enum PersistenceError {
    #[error("invalid complex: {0}")]
    InvalidComplex(#[from] ComplexError),
    #[error("cap {cap} is below the largest finite value {needed}")]
    CapTooSmall { cap: f64, needed: f64 },
    #[error("no finite death value in the collection")]
    NoFiniteDeath,
    #[error("only dimensions 0 and 1 are reported (got {0})")]
    BadDim(u8),
}

/// One persistence pair in cell coordinates. `death == None` marks an essential class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPair {
    pub dim: u8,
    pub birth_cell: usize,
    pub death_cell: Option<usize>,
    pub birth: f64,
    pub death: f64,
}

impl RawPair {
    pub fn is_essential(&self) -> bool {
        self.death_cell.is_none()
    }
}

/// Every pair of dimensions 0 and 1, zero-length ones included.
#[derive(Debug, Clone, PartialEq)]
pub struct Persistence {
    pub pairs: Vec<RawPair>,
}

impl Persistence {
    /// Exported diagram: zero-length pairs are dropped.
    pub fn diagram(&self, dim: u8) -> PersistenceDiagram {
        let mut pairs = Vec::new();
        let mut essential = Vec::new();
        for p in self.pairs.iter().filter(|p| p.dim == dim) {
            if p.is_essential() {
                essential.push(p.birth);
            } else if p.death > p.birth {
                pairs.push((p.birth, p.death));
            }
        }
        PersistenceDiagram::new(dim, pairs, essential)
    }
}

/// Multiset of finite `(birth, death)` pairs plus essential births.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dim: u8,
    pub pairs: Vec<(f64, f64)>,
    pub essential_births: Vec<f64>,
    pub truncation: Option<f64>,
}

fn sort_pairs(pairs: &mut [(f64, f64)]) {
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
}

impl PersistenceDiagram {
    pub fn new(dim: u8, mut pairs: Vec<(f64, f64)>, mut essential_births: Vec<f64>) -> Self {
        sort_pairs(&mut pairs);
        essential_births.sort_unstable_by(f64::total_cmp);
        Self {
            dim,
            pairs,
            essential_births,
            truncation: None,
        }
    }

    pub fn empty(dim: u8) -> Self {
        Self::new(dim, Vec::new(), Vec::new())
    }

    /// True when no infinite death remains.
    pub fn is_finite(&self) -> bool {
        self.truncation.is_some() || self.essential_births.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn lifespans(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|&(b, d)| d - b)
    }

    /// Largest finite death, ignoring pairs created by truncation.
    pub fn max_finite_death(&self) -> Option<f64> {
        let truncated = self.truncation.map_or(0, |_| self.essential_births.len());
        let mut deaths: Vec<f64> = self.pairs.iter().map(|p| p.1).collect();
        if truncated > 0 {
            // truncated pairs all end at the cap; drop that many cap-valued deaths
            let cap = self.truncation.unwrap_or(f64::NAN);
            let mut left = truncated;
            deaths.retain(|&d| {
                if left > 0 && d == cap {
                    left -= 1;
                    false
                } else {
                    true
                }
            });
        }
        deaths.into_iter().reduce(f64::max)
    }

    /// Closes every essential class at `cap`.
    pub fn truncate_essential(&self, cap: f64) -> Result<Self, PersistenceError> {
        if self.truncation.is_some() {
            return Ok(self.clone());
        }
        let needed = self
            .pairs
            .iter()
            .map(|p| p.1)
            .chain(self.essential_births.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        if cap < needed {
            return Err(PersistenceError::CapTooSmall { cap, needed });
        }
        if self.essential_births.is_empty() {
            return Ok(self.clone());
        }
        let mut pairs = self.pairs.clone();
        pairs.extend(
            self.essential_births
                .iter()
                .filter(|&&b| b < cap)
                .map(|&b| (b, cap)),
        );
        sort_pairs(&mut pairs);
        Ok(Self {
            dim: self.dim,
            pairs,
            essential_births: self.essential_births.clone(),
            truncation: Some(cap),
        })
    }

    /// CSV rows `dim,birth,death,essential`, ordered by `(birth, death)`.
    pub fn write_csv_rows<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<(f64, f64, bool)> = Vec::new();
        let mut truncated: Vec<f64> = Vec::new();
        if let Some(cap) = self.truncation {
            truncated = self
                .essential_births
                .iter()
                .filter(|&&b| b < cap)
                .copied()
                .collect();
        }
        for &(b, d) in &self.pairs {
            let from_essential = self.truncation == Some(d)
                && truncated.iter().position(|&t| t == b).map(|i| truncated.swap_remove(i)).is_some();
            rows.push((b, d, from_essential));
        }
        if self.truncation.is_none() {
            rows.extend(self.essential_births.iter().map(|&b| (b, f64::INFINITY, true)));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for (b, d, e) in rows {
            writeln!(out, "{},{},{},{}", self.dim, b, d, u8::from(e))?;
        }
        Ok(())
    }
}

/// Writes several diagrams as one CSV, header included.
pub fn write_diagrams_csv<W: Write>(diagrams: &[PersistenceDiagram], mut out: W) -> std::io::Result<()> {
    writeln!(out, "dim,birth,death,essential")?;
    let mut sorted: Vec<&PersistenceDiagram> = diagrams.iter().collect();
    sorted.sort_by_key(|d| d.dim);
    for d in sorted {
        d.write_csv_rows(&mut out)?;
    }
    Ok(())
}

/// Largest finite death across a collection, used as the truncation value.
pub fn essential_cap<'a>(
    diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>,
) -> Result<f64, PersistenceError> {
    diagrams
        .into_iter()
        .filter_map(PersistenceDiagram::max_finite_death)
        .reduce(f64::max)
        .ok_or(PersistenceError::NoFiniteDeath)
}

/// Symmetric difference of two ascending index lists.
fn xor_into(acc: &mut Vec<usize>, other: &[usize], scratch: &mut Vec<usize>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < acc.len() && j < other.len() {
        match acc[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(acc[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&acc[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(acc, scratch);
}

/// Persistence pairs of dimensions 0 and 1 of a filtered complex.
pub fn compute_persistence(complex: &FilteredComplex) -> Result<Persistence, PersistenceError> {
    complex.check_face_order()?;
    let cells = complex.cells();
    let n = cells.len();
    const NONE: usize = usize::MAX;
    let mut pivot_owner = vec![NONE; n];
    let mut is_death = vec![false; n];
    let mut reduced: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut scratch = Vec::new();

    for dim in [2u8, 1] {
        for j in 0..n {
            if cells[j].dim != dim || pivot_owner[j] != NONE {
                continue;
            }
            let mut col = cells[j].boundary.clone();
            while let Some(&low) = col.last() {
                let owner = pivot_owner[low];
                if owner == NONE {
                    break;
                }
                xor_into(&mut col, &reduced[owner], &mut scratch);
            }
            if let Some(&low) = col.last() {
                debug_assert_eq!(pivot_owner[low], NONE);
                pivot_owner[low] = j;
                is_death[j] = true;
                reduced[j] = col;
            }
        }
    }

    let mut pairs = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        if cell.dim > 1 || is_death[i] {
            continue;
        }
        let death_cell = (pivot_owner[i] != NONE).then_some(pivot_owner[i]);
        pairs.push(RawPair {
            dim: cell.dim,
            birth_cell: i,
            death_cell,
            birth: cell.filtration,
            death: death_cell.map_or(f64::INFINITY, |d| cells[d].filtration),
        });
    }
    Ok(Persistence { pairs })
}
