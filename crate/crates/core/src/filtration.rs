//! Filtration functions on the pixel grid and point-cloud extraction.
//!
//! Pixel coordinates are `(row, col)` integers. "Dark" pixels are those with
//! grey value at least the threshold `z0` (MNIST ink is bright-valued).

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::GreyscaleImage;

pub const DEFAULT_THRESHOLD_FACTOR: f64 = 0.5;
pub const DEFAULT_D0: f64 = 1.0;
pub const DEFAULT_DTM_MASS: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum FiltrationError {
    #[error("density radius must be positive (got {0})")]
    BadRadius(f64),
    #[error("no pixel reaches the threshold {0}")]
    EmptyCloud(f64),
    #[error("DTM mass must lie in (0, 1] (got {0})")]
    BadMass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationKind {
    Binary,
    Greyscale,
    Density,
    Radial,
    Rips,
    Dtm,
}

impl FiltrationKind {
    pub const ALL: [FiltrationKind; 6] = [
        Self::Binary,
        Self::Greyscale,
        Self::Density,
        Self::Radial,
        Self::Rips,
        Self::Dtm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::Greyscale => "greyscale",
            Self::Density => "density",
            Self::Radial => "radial",
            Self::Rips => "rips",
            Self::Dtm => "dtm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Point-cloud filtrations are persisted through simplicial complexes.
    pub fn is_point_cloud(self) -> bool {
        matches!(self, Self::Rips | Self::Dtm)
    }
}

impl fmt::Display for FiltrationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters a field was built with; unused entries stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Set when the source image had no ink at all (greyscale field is constant 0).
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub all_zero_image: bool,
}

/// Per-pixel filtration values, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiltrationField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub kind: FiltrationKind,
    pub params: FieldParams,
}

impl FiltrationField {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// One CSV line per pixel row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// JSON sidecar describing the field.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "width": self.width,
            "height": self.height,
            "params": self.params,
        })
    }
}

/// Threshold `factor * max(Z)` for one image.
pub fn relative_threshold(img: &GreyscaleImage, factor: f64) -> f64 {
    factor * img.max_value()
}

pub fn binary_filtration(img: &GreyscaleImage, z0: f64) -> FiltrationField {
    let values = img
        .pixels()
        .iter()
        .map(|&z| if z >= z0 { 0.0 } else { 1.0 })
        .collect();
    FiltrationField {
        width: img.width(),
        height: img.height(),
        values,
        kind: FiltrationKind::Binary,
        params: FieldParams {
            z0: Some(z0),
            ..Default::default()
        },
    }
}

/// `max(Z) - z` per pixel.
pub fn greyscale_filtration(img: &GreyscaleImage) -> FiltrationField {
    let max = img.max_value();
    FiltrationField {
        width: img.width(),
        height: img.height(),
        values: img.pixels().iter().map(|&z| max - z).collect(),
        kind: FiltrationKind::Greyscale,
        params: FieldParams {
            all_zero_image: max == 0.0,
            ..Default::default()
        },
    }
}

/// Lattice offsets `(dr, dc)` within Euclidean distance `d0` of the origin.
fn ball_offsets(d0: f64) -> Vec<(isize, isize)> {
    let r = d0.floor() as isize;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if ((dr * dr + dc * dc) as f64) <= d0 * d0 {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// Number of lattice cells within distance `d0` on an unbounded grid.
pub fn lattice_ball_size(d0: f64) -> usize {
    ball_offsets(d0).len()
}

/// `N(d0)` minus the number of dark pixels within `d0` of each pixel.
pub fn density_filtration(
    img: &GreyscaleImage,
    d0: f64,
    z0: f64,
) -> Result<FiltrationField, FiltrationError> {
    if !(d0 > 0.0) {
        return Err(FiltrationError::BadRadius(d0));
    }
    let offsets = ball_offsets(d0);
    let full = offsets.len() as f64;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut values = Vec::with_capacity(img.len());
    for r in 0..h {
        for c in 0..w {
            let dark = offsets
                .iter()
                .filter(|&&(dr, dc)| {
                    let (rr, cc) = (r + dr, c + dc);
                    rr >= 0
                        && cc >= 0
                        && rr < h
                        && cc < w
                        && img.get(rr as usize, cc as usize) >= z0
                })
                .count();
            values.push(full - dark as f64);
        }
    }
    Ok(FiltrationField {
        width: img.width(),
        height: img.height(),
        values,
        kind: FiltrationKind::Density,
        params: FieldParams {
            z0: Some(z0),
            d0: Some(d0),
            ..Default::default()
        },
    })
}

/// Distance to `reference` for dark pixels; the largest such distance over the
/// whole grid for the rest.
pub fn radial_filtration(
    img: &GreyscaleImage,
    reference: (f64, f64),
    z0: f64,
) -> FiltrationField {
    let (w, h) = (img.width(), img.height());
    let dist = |r: usize, c: usize| (r as f64 - reference.0).hypot(c as f64 - reference.1);
    let far = [(0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)]
        .into_iter()
        .map(|(r, c)| dist(r, c))
        .fold(0.0, f64::max);
    let mut values = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            values.push(if img.get(r, c) >= z0 { dist(r, c) } else { far });
        }
    }
    FiltrationField {
        width: w,
        height: h,
        values,
        kind: FiltrationKind::Radial,
        params: FieldParams {
            z0: Some(z0),
            reference: Some(reference),
            ..Default::default()
        },
    }
}

/// Coordinates `(row, col)` of thresholded pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 2]>,
    pub source_threshold: f64,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self {
            points,
            source_threshold: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max(euclid(a, b));
            }
        }
        best
    }
}

#[inline]
pub fn euclid(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// All pixels with `z >= z0`, row-major.
pub fn extract_point_cloud(img: &GreyscaleImage, z0: f64) -> Result<PointCloud, FiltrationError> {
    let mut points = Vec::new();
    for r in 0..img.height() {
        for c in 0..img.width() {
            if img.get(r, c) >= z0 {
                points.push([r as f64, c as f64]);
            }
        }
    }
    if points.is_empty() {
        return Err(FiltrationError::EmptyCloud(z0));
    }
    Ok(PointCloud {
        points,
        source_threshold: z0,
    })
}

/// Distance-to-measure value of every cloud point.
#[derive(Debug, Clone, PartialEq)]
pub struct DtmWeights {
    pub weights: Vec<f64>,
    pub m: f64,
    pub k: usize,
}

/// `ceil(m * n)`, guarded against representation error in the product.
pub fn dtm_neighbour_count(m: f64, n: usize) -> usize {
    let raw = m * n as f64;
    let k = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, n.max(1))
}

fn check_mass(m: f64) -> Result<(), FiltrationError> {
    if m > 0.0 && m <= 1.0 {
        Ok(())
    } else {
        Err(FiltrationError::BadMass(m))
    }
}

/// Mean distance from `query` to its `k` nearest cloud points. `scratch` is
/// reused between calls to avoid reallocating.
fn mean_knn_distance(cloud: &[[f64; 2]], query: &[f64; 2], k: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(cloud.iter().map(|p| euclid(p, query)));
    if k < scratch.len() {
        scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
        scratch.truncate(k);
    }
    // summing in sorted order keeps the result independent of point order
    scratch.sort_unstable_by(f64::total_cmp);
    scratch.iter().sum::<f64>() / k as f64
}

/// For each point, the mean Euclidean distance to its `ceil(m*|X|)` nearest
/// cloud points (itself included at distance 0).
pub fn dtm_weights(cloud: &PointCloud, m: f64) -> Result<DtmWeights, FiltrationError> {
    check_mass(m)?;
    if cloud.is_empty() {
        return Err(FiltrationError::EmptyCloud(cloud.source_threshold));
    }
    let k = dtm_neighbour_count(m, cloud.len());
    let mut scratch = Vec::with_capacity(cloud.len());
    let weights = cloud
        .points
        .iter()
        .map(|q| mean_knn_distance(&cloud.points, q, k, &mut scratch))
        .collect();
    Ok(DtmWeights { weights, m, k })
}

/// Distance from every pixel to the nearest thresholded pixel: the distance
/// function of the point cloud sampled on the grid.
pub fn rips_field(img: &GreyscaleImage, z0: f64) -> Result<FiltrationField, FiltrationError> {
    let cloud = extract_point_cloud(img, z0)?;
    let values = grid_points(img)
        .map(|q| {
            cloud
                .points
                .iter()
                .map(|p| euclid(p, &q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(FiltrationField {
        width: img.width(),
        height: img.height(),
        values,
        kind: FiltrationKind::Rips,
        params: FieldParams {
            z0: Some(z0),
            ..Default::default()
        },
    })
}

/// Distance-to-measure of the thresholded cloud sampled at every pixel.
pub fn dtm_field(img: &GreyscaleImage, z0: f64, m: f64) -> Result<FiltrationField, FiltrationError> {
    check_mass(m)?;
    let cloud = extract_point_cloud(img, z0)?;
    let k = dtm_neighbour_count(m, cloud.len());
    let mut scratch = Vec::with_capacity(cloud.len());
    let values = grid_points(img)
        .map(|q| mean_knn_distance(&cloud.points, &q, k, &mut scratch))
        .collect();
    Ok(FiltrationField {
        width: img.width(),
        height: img.height(),
        values,
        kind: FiltrationKind::Dtm,
        params: FieldParams {
            z0: Some(z0),
            m: Some(m),
            ..Default::default()
        },
    })
}

fn grid_points(img: &GreyscaleImage) -> impl Iterator<Item = [f64; 2]> {
    let w = img.width();
    (0..img.len()).map(move |i| [(i / w) as f64, (i % w) as f64])
}
