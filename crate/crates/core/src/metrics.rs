//! Distances between diagrams, vectors and fields, and the Gaussian kernel.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{hungarian, min_cost_transport};
use crate::persistence::PersistenceDiagram;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("diagram has essential classes; truncate it first")]
    UntruncatedEssential,
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("exponent p must be at least 1 (got {0})")]
    BadExponent(f64),
    #[error("items mix diagrams and vectors")]
    MixedRepresentations,
    #[error("malformed distance matrix file: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WassersteinSolver {
    /// Transportation over distinct points with multiplicities.
    Transport,
    /// Square assignment over every point and diagonal slot.
    Hungarian,
}

#[inline]
fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// Sup-norm distance from `(b, d)` to its diagonal projection.
#[inline]
pub fn diagonal_distance(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

fn finite_pairs(pd: &PersistenceDiagram) -> Result<&[(f64, f64)], MetricError> {
    if pd.is_finite() {
        Ok(&pd.pairs)
    } else {
        Err(MetricError::UntruncatedEssential)
    }
}

/// Distinct points with multiplicities; input pairs are sorted.
fn compress(pairs: &[(f64, f64)]) -> (Vec<(f64, f64)>, Vec<u64>) {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut mult: Vec<u64> = Vec::new();
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for p in sorted {
        match pts.last() {
            Some(&q) if q == p => *mult.last_mut().expect("parallel vectors") += 1,
            _ => {
                pts.push(p);
                mult.push(1);
            }
        }
    }
    (pts, mult)
}

/// `W_p` with sup-norm ground metric.
pub fn wasserstein(pd1: &PersistenceDiagram, pd2: &PersistenceDiagram, p: f64) -> Result<f64, MetricError> {
    wasserstein_with(pd1, pd2, p, WassersteinSolver::Transport)
}

pub fn wasserstein_with(
    pd1: &PersistenceDiagram,
    pd2: &PersistenceDiagram,
    p: f64,
    solver: WassersteinSolver,
) -> Result<f64, MetricError> {
    if !(p >= 1.0) {
        return Err(MetricError::BadExponent(p));
    }
    let (mut a, mut b) = (finite_pairs(pd1)?, finite_pairs(pd2)?);
    // solving in a canonical argument order makes the result exactly symmetric
    if canonical_order(a, b) == Ordering::Greater {
        std::mem::swap(&mut a, &mut b);
    }
    let cost = match solver {
        WassersteinSolver::Transport => transport_cost(a, b, p),
        WassersteinSolver::Hungarian => hungarian_cost(a, b, p),
    };
    Ok(cost.max(0.0).powf(1.0 / p))
}

fn canonical_order(a: &[(f64, f64)], b: &[(f64, f64)]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn transport_cost(a: &[(f64, f64)], b: &[(f64, f64)], p: f64) -> f64 {
    let (pa, ma) = compress(a);
    let (pb, mb) = compress(b);
    if pa == pb && ma == mb {
        return 0.0;
    }
    // the last source and the last sink stand for the diagonal
    let (m, k) = (pa.len() + 1, pb.len() + 1);
    let mut supply = ma.clone();
    supply.push(b.len() as u64);
    let mut demand = mb.clone();
    demand.push(a.len() as u64);
    let mut cost = vec![0.0; m * k];
    for (i, &x) in pa.iter().enumerate() {
        for (j, &y) in pb.iter().enumerate() {
            cost[i * k + j] = linf(x, y).powf(p);
        }
        cost[i * k + k - 1] = diagonal_distance(x).powf(p);
    }
    for (j, &y) in pb.iter().enumerate() {
        cost[(m - 1) * k + j] = diagonal_distance(y).powf(p);
    }
    min_cost_transport(&supply, &demand, &cost).1
}

fn hungarian_cost(a: &[(f64, f64)], b: &[(f64, f64)], p: f64) -> f64 {
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = match (i < n1, j < n2) {
                (true, true) => linf(a[i], b[j]).powf(p),
                (true, false) => diagonal_distance(a[i]).powf(p),
                (false, true) => diagonal_distance(b[j]).powf(p),
                (false, false) => 0.0,
            };
        }
    }
    hungarian(&cost, n).1
}

/// Euclidean distance between equal-length vectors.
pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `exp(-gamma * dist^2)`.
#[inline]
pub fn gaussian_kernel(dist: f64, gamma: f64) -> f64 {
    (-gamma * dist * dist).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricTag {
    W2,
    L2,
}

impl MetricTag {
    fn code(self) -> u8 {
        match self {
            Self::W2 => 0,
            Self::L2 => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Self::W2),
            1 => Some(Self::L2),
            _ => None,
        }
    }
}

/// Something a distance can be measured between.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Diagram(PersistenceDiagram),
    Vector(Vec<f64>),
}

impl Representation {
    pub fn metric(&self) -> MetricTag {
        match self {
            Self::Diagram(_) => MetricTag::W2,
            Self::Vector(_) => MetricTag::L2,
        }
    }
}

/// Distance between two representations of the same kind (`W_2` or `l_2`).
pub fn distance(a: &Representation, b: &Representation) -> Result<f64, MetricError> {
    match (a, b) {
        (Representation::Diagram(x), Representation::Diagram(y)) => wasserstein(x, y, 2.0),
        (Representation::Vector(x), Representation::Vector(y)) => l2_distance(x, y),
        _ => Err(MetricError::MixedRepresentations),
    }
}

/// Symmetric matrix with zero diagonal, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
    pub metric: MetricTag,
}

const MATRIX_MAGIC: &[u8; 4] = b"PHDM";

impl DistanceMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sub-matrix on the given indices.
    pub fn select(&self, idx: &[usize]) -> DistanceMatrix {
        let n = idx.len();
        let mut entries = Vec::with_capacity(n * n);
        for &i in idx {
            for &j in idx {
                entries.push(self.get(i, j));
            }
        }
        DistanceMatrix {
            n,
            entries,
            metric: self.metric,
        }
    }

    /// Layout: magic `PHDM`, `n` as little-endian u64, metric code byte, then
    /// `n * n` little-endian f64 values row by row.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), MetricError> {
        out.write_all(MATRIX_MAGIC)?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&[self.metric.code()])?;
        for v in &self.entries {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, MetricError> {
        let mut head = [0u8; 13];
        input.read_exact(&mut head)?;
        if &head[..4] != MATRIX_MAGIC {
            return Err(MetricError::BadFormat("bad magic".into()));
        }
        let n = u64::from_le_bytes(head[4..12].try_into().expect("eight bytes")) as usize;
        let metric = MetricTag::from_code(head[12])
            .ok_or_else(|| MetricError::BadFormat(format!("unknown metric code {}", head[12])))?;
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        if body.len() != n * n * 8 {
            return Err(MetricError::BadFormat(format!(
                "expected {} payload bytes, found {}",
                n * n * 8,
                body.len()
            )));
        }
        let entries = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        Ok(Self { n, entries, metric })
    }

    /// Provenance sidecar.
    pub fn sidecar_json(&self, provenance: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "metric": self.metric,
            "provenance": provenance,
        })
    }
}

fn common_metric(items: &[Representation]) -> Result<MetricTag, MetricError> {
    let metric = items.first().map_or(MetricTag::L2, Representation::metric);
    if items.iter().any(|r| r.metric() != metric) {
        return Err(MetricError::MixedRepresentations);
    }
    Ok(metric)
}

/// All pairwise distances. Entries are independent, so the result does not
/// depend on scheduling.
pub fn pairwise_distances(items: &[Representation]) -> Result<DistanceMatrix, MetricError> {
    let metric = common_metric(items)?;
    let n = items.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| distance(&items[i], &items[j]))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut entries = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, d) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, entries, metric })
}

/// Rectangular distances, `rows.len() x cols.len()`, row-major.
pub fn cross_distances(rows: &[Representation], cols: &[Representation]) -> Result<Vec<f64>, MetricError> {
    let metric = common_metric(rows)?;
    if common_metric(cols)? != metric && !cols.is_empty() && !rows.is_empty() {
        return Err(MetricError::MixedRepresentations);
    }
    let out: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|r| cols.iter().map(|c| distance(r, c)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    Ok(out.into_iter().flatten().collect())
}
