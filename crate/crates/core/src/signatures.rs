//! Vectorised persistence signatures: landscapes and persistence images.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::filtration::FiltrationKind;
use crate::persistence::PersistenceDiagram;

pub const DEFAULT_LAYERS: usize = 10;
pub const DEFAULT_RESOLUTION: usize = 100;
pub const DEFAULT_GRID: usize = 10;
pub const VARIANCE_FRACTION: f64 = 0.05;
/// Absolute widening applied to zero-width ranges.
pub const RANGE_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SignatureError {
    #[error("sampling range is empty: {lo} >= {hi}")]
    BadRange { lo: f64, hi: f64 },
    #[error("variance must be positive (got {0})")]
    BadVariance(f64),
    #[error("the collection holds no finite pair")]
    NoDeaths,
    #[error("diagram still has essential classes; truncate it first")]
    UntruncatedEssential,
    #[error("layer count and resolution must be positive")]
    BadShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorizationRange {
    pub birth_min: f64,
    pub birth_max: f64,
    pub death_max: f64,
    pub persistence_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<(FiltrationKind, u8)>,
}

/// Extremes over every pair of the collection; zero-width spans are widened.
pub fn fit_range<'a>(
    diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>,
) -> Result<VectorizationRange, SignatureError> {
    let mut birth_min = f64::INFINITY;
    let mut birth_max = f64::NEG_INFINITY;
    let mut death_max = f64::NEG_INFINITY;
    let mut persistence_max = 0.0f64;
    let mut any = false;
    for d in diagrams {
        if !d.is_finite() {
            return Err(SignatureError::UntruncatedEssential);
        }
        for &(b, de) in &d.pairs {
            any = true;
            birth_min = birth_min.min(b);
            birth_max = birth_max.max(b);
            death_max = death_max.max(de);
            persistence_max = persistence_max.max(de - b);
        }
    }
    if !any {
        return Err(SignatureError::NoDeaths);
    }
    if birth_max <= birth_min {
        birth_max = birth_min + RANGE_EPS;
    }
    if death_max <= birth_min {
        death_max = birth_min + RANGE_EPS;
    }
    if persistence_max <= 0.0 {
        persistence_max = RANGE_EPS;
    }
    Ok(VectorizationRange {
        birth_min,
        birth_max,
        death_max,
        persistence_max,
        scope: None,
    })
}

/// `VARIANCE_FRACTION` times the largest death in the collection.
pub fn default_variance<'a>(
    diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>,
) -> Result<f64, SignatureError> {
    diagrams
        .into_iter()
        .flat_map(|d| d.pairs.iter().map(|p| p.1))
        .reduce(f64::max)
        .map(|m| VARIANCE_FRACTION * m)
        .ok_or(SignatureError::NoDeaths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeVector {
    pub k: usize,
    pub resolution: usize,
    /// Layer-major: `values[j * resolution + t]` is layer `j + 1` at sample `t`.
    pub values: Vec<f64>,
    pub range: VectorizationRange,
}

/// Sample positions: `resolution` equally spaced points over `[birth_min, death_max]`.
pub fn landscape_samples(range: &VectorizationRange, resolution: usize) -> Vec<f64> {
    let (lo, hi) = (range.birth_min, range.death_max);
    if resolution == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (resolution - 1) as f64;
    (0..resolution).map(|t| lo + step * t as f64).collect()
}

pub fn landscape_vector(
    pd: &PersistenceDiagram,
    k: usize,
    resolution: usize,
    range: &VectorizationRange,
) -> Result<LandscapeVector, SignatureError> {
    if k == 0 || resolution == 0 {
        return Err(SignatureError::BadShape);
    }
    if !(range.birth_min < range.death_max) {
        return Err(SignatureError::BadRange {
            lo: range.birth_min,
            hi: range.death_max,
        });
    }
    if !pd.is_finite() {
        return Err(SignatureError::UntruncatedEssential);
    }
    let mut values = vec![0.0; k * resolution];
    let mut tents = Vec::with_capacity(pd.pairs.len());
    for (t, r) in landscape_samples(range, resolution).into_iter().enumerate() {
        tents.clear();
        tents.extend(
            pd.pairs
                .iter()
                .map(|&(b, d)| (r - b).min(d - r))
                .filter(|&h| h > 0.0),
        );
        tents.sort_unstable_by(|a, b| b.total_cmp(a));
        for (j, &h) in tents.iter().take(k).enumerate() {
            values[j * resolution + t] = h;
        }
    }
    Ok(LandscapeVector {
        k,
        resolution,
        values,
        range: *range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiWeight {
    /// `rho(b, l) = l^2`.
    LifespanSquared,
    Unit,
}

impl PiWeight {
    fn eval(self, lifespan: f64) -> f64 {
        match self {
            Self::LifespanSquared => lifespan * lifespan,
            Self::Unit => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceImageVector {
    pub nx: usize,
    pub ny: usize,
    /// `grid[iy * nx + ix]`: `ix` runs along birth, `iy` along lifespan.
    pub grid: Vec<f64>,
    pub variance: f64,
    pub range: VectorizationRange,
    pub weight: PiWeight,
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Mass of `N(mu, sigma^2)` in each of the `n` equal bins over `[lo, hi]`.
fn bin_masses(mu: f64, sigma: f64, lo: f64, hi: f64, n: usize, out: &mut Vec<f64>) {
    out.clear();
    let step = (hi - lo) / n as f64;
    let mut prev = phi((lo - mu) / sigma);
    for i in 1..=n {
        let edge = if i == n { hi } else { lo + step * i as f64 };
        let cur = phi((edge - mu) / sigma);
        out.push((cur - prev).max(0.0));
        prev = cur;
    }
}

pub fn persistence_image(
    pd: &PersistenceDiagram,
    nx: usize,
    ny: usize,
    variance: f64,
    range: &VectorizationRange,
    weight: PiWeight,
) -> Result<PersistenceImageVector, SignatureError> {
    if nx == 0 || ny == 0 {
        return Err(SignatureError::BadShape);
    }
    if !(variance > 0.0) {
        return Err(SignatureError::BadVariance(variance));
    }
    if !(range.birth_min < range.birth_max) {
        return Err(SignatureError::BadRange {
            lo: range.birth_min,
            hi: range.birth_max,
        });
    }
    if !(range.persistence_max > 0.0) {
        return Err(SignatureError::BadRange {
            lo: 0.0,
            hi: range.persistence_max,
        });
    }
    if !pd.is_finite() {
        return Err(SignatureError::UntruncatedEssential);
    }
    let sigma = variance.sqrt();
    let mut grid = vec![0.0; nx * ny];
    let (mut mx, mut my) = (Vec::new(), Vec::new());
    for &(b, d) in &pd.pairs {
        let l = d - b;
        let rho = weight.eval(l);
        if rho == 0.0 {
            continue;
        }
        bin_masses(b, sigma, range.birth_min, range.birth_max, nx, &mut mx);
        bin_masses(l, sigma, 0.0, range.persistence_max, ny, &mut my);
        for (iy, &wy) in my.iter().enumerate() {
            for (ix, &wx) in mx.iter().enumerate() {
                grid[iy * nx + ix] += rho * wx * wy;
            }
        }
    }
    Ok(PersistenceImageVector {
        nx,
        ny,
        grid,
        variance,
        range: *range,
        weight,
    })
}

/// One CSV row: identifying columns then the vector entries.
pub fn write_signature_row<W: Write>(
    mut out: W,
    image_id: usize,
    transformation: &str,
    filtration: FiltrationKind,
    dim: u8,
    values: &[f64],
) -> std::io::Result<()> {
    write!(out, "{image_id},{transformation},{filtration},{dim}")?;
    for v in values {
        write!(out, ",{v}")?;
    }
    writeln!(out)
}
