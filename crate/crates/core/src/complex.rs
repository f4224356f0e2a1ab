//! Filtered cubical and Vietoris-Rips complexes.
//!
//! Cells are stored in filtration order, ties broken by `(dim, construction id)`.
//! Every boundary entry is a position in that order.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtration::{euclid, DtmWeights, FiltrationField, PointCloud};

/// Default ceiling on the number of cells a single complex may hold.
pub const DEFAULT_CELL_CAP: usize = 5_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum ComplexError {
    #[error("complex would hold {cells} cells, above the cap of {cap}")]
    ComplexTooLarge { cells: usize, cap: usize },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("maximum radius must be non-negative (got {0})")]
    BadRadius(f64),
    #[error("only dimensions up to 2 are supported (got {0})")]
    BadMaxDim(usize),
    #[error("{weights} weights supplied for {points} points")]
    WeightCount { weights: usize, points: usize },
    #[error("cell {cell} {reason}")]
    InvalidComplex { cell: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexKind {
    Cubical,
    Rips,
    DtmRips,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Index in construction order; stable across re-sorting.
    pub id: usize,
    pub dim: u8,
    pub filtration: f64,
    /// Positions of the codimension-one faces, ascending.
    pub boundary: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    cells: Vec<Cell>,
    kind: ComplexKind,
    meta: serde_json::Value,
}

/// Unsorted cell description whose boundary refers to construction ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCell {
    pub dim: u8,
    pub filtration: f64,
    pub boundary: Vec<usize>,
}

fn cell_order(a: (f64, u8, usize), b: (f64, u8, usize)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

impl FilteredComplex {
    /// Sorts cells into filtration order and rewrites boundaries as positions.
    /// Fails when a face would not precede its coface.
    pub fn from_raw(
        kind: ComplexKind,
        raw: Vec<RawCell>,
        meta: serde_json::Value,
    ) -> Result<Self, ComplexError> {
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            cell_order(
                (raw[a].filtration, raw[a].dim, a),
                (raw[b].filtration, raw[b].dim, b),
            )
        });
        let mut position = vec![0usize; raw.len()];
        for (pos, &id) in order.iter().enumerate() {
            position[id] = pos;
        }
        let mut slots: Vec<Option<RawCell>> = raw.into_iter().map(Some).collect();
        let mut cells = Vec::with_capacity(order.len());
        for &id in &order {
            let rc = slots[id].take().expect("each id appears once");
            let mut boundary = Vec::with_capacity(rc.boundary.len());
            for &f in &rc.boundary {
                if f >= position.len() {
                    return Err(ComplexError::InvalidComplex {
                        cell: id,
                        reason: format!("refers to missing face {f}"),
                    });
                }
                boundary.push(position[f]);
            }
            boundary.sort_unstable();
            cells.push(Cell {
                id,
                dim: rc.dim,
                filtration: rc.filtration,
                boundary,
            });
        }
        let complex = Self { cells, kind, meta };
        complex.check_face_order()?;
        Ok(complex)
    }

    /// Wraps cells that are already positioned, without validation.
    pub fn from_sorted_unchecked(kind: ComplexKind, cells: Vec<Cell>) -> Self {
        Self {
            cells,
            kind,
            meta: serde_json::Value::Null,
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn kind(&self) -> ComplexKind {
        self.kind
    }

    pub fn meta(&self) -> &serde_json::Value {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn count_dim(&self, dim: u8) -> usize {
        self.cells.iter().filter(|c| c.dim == dim).count()
    }

    /// Every face sits strictly earlier, has one dimension less and a
    /// filtration value no larger than its coface.
    pub fn check_face_order(&self) -> Result<(), ComplexError> {
        for (pos, cell) in self.cells.iter().enumerate() {
            let bad = |reason: String| ComplexError::InvalidComplex { cell: pos, reason };
            if !cell.filtration.is_finite() {
                return Err(bad("has a non-finite filtration value".into()));
            }
            let expected = match cell.dim {
                0 => 0..=0,
                1 => 2..=2,
                2 => 3..=4,
                d => return Err(bad(format!("has unsupported dimension {d}"))),
            };
            if !expected.contains(&cell.boundary.len()) {
                return Err(bad(format!("has {} faces", cell.boundary.len())));
            }
            for &f in &cell.boundary {
                if f >= pos {
                    return Err(bad(format!("has face {f} at or after itself")));
                }
                let face = &self.cells[f];
                if face.dim + 1 != cell.dim {
                    return Err(bad(format!("has face {f} of dimension {}", face.dim)));
                }
                if face.filtration > cell.filtration {
                    return Err(bad(format!("enters before its face {f}")));
                }
            }
        }
        Ok(())
    }

    /// One line per cell: `dim filtration boundary-ids`.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let _ = write!(out, "{} {}", c.dim, c.filtration);
            for b in &c.boundary {
                let _ = write!(out, " {b}");
            }
            out.push('\n');
        }
        out
    }
}

/// Primal cubical complex: squares carry the pixel values, lower cells take the
/// minimum over the pixels they border.
pub fn build_cubical(field: &FiltrationField) -> FilteredComplex {
    let (w, h) = (field.width, field.height);
    let px = |r: usize, c: usize| field.values[r * w + c];
    // vertex (i, j) is the corner above-left of pixel (i, j); i in 0..=h, j in 0..=w
    let vid = |i: usize, j: usize| i * (w + 1) + j;
    let n_vert = (h + 1) * (w + 1);
    let hid = |i: usize, j: usize| n_vert + i * w + j;
    let n_h = (h + 1) * w;
    let vvid = |i: usize, j: usize| n_vert + n_h + i * (w + 1) + j;
    let n_v = h * (w + 1);

    let min_over = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
        let mut m = f64::INFINITY;
        for r in rows {
            for c in cols.clone() {
                m = m.min(px(r, c));
            }
        }
        m
    };
    // pixel rows/cols adjacent to lattice line k, clipped to the image
    let near = |k: usize, n: usize| k.saturating_sub(1)..(k + 1).min(n);

    let mut raw = Vec::with_capacity(n_vert + n_h + n_v + w * h);
    for i in 0..=h {
        for j in 0..=w {
            raw.push(RawCell {
                dim: 0,
                filtration: min_over(near(i, h), near(j, w)),
                boundary: Vec::new(),
            });
        }
    }
    for i in 0..=h {
        for j in 0..w {
            raw.push(RawCell {
                dim: 1,
                filtration: min_over(near(i, h), j..j + 1),
                boundary: vec![vid(i, j), vid(i, j + 1)],
            });
        }
    }
    for i in 0..h {
        for j in 0..=w {
            raw.push(RawCell {
                dim: 1,
                filtration: min_over(i..i + 1, near(j, w)),
                boundary: vec![vid(i, j), vid(i + 1, j)],
            });
        }
    }
    for i in 0..h {
        for j in 0..w {
            raw.push(RawCell {
                dim: 2,
                filtration: px(i, j),
                boundary: vec![hid(i, j), hid(i + 1, j), vvid(i, j), vvid(i, j + 1)],
            });
        }
    }
    let meta = serde_json::json!({
        "width": w,
        "height": h,
        "filtration": field.kind,
    });
    FilteredComplex::from_raw(ComplexKind::Cubical, raw, meta)
        .expect("cubical construction always yields a valid filtration")
}

fn simplicial_build(
    kind: ComplexKind,
    vertex_values: &[f64],
    edge_value: impl Fn(usize, usize) -> f64,
    max_dim: usize,
    r_max: Option<f64>,
    cap: usize,
    meta: serde_json::Value,
) -> Result<FilteredComplex, ComplexError> {
    let n = vertex_values.len();
    if n == 0 {
        return Err(ComplexError::EmptyCloud);
    }
    if max_dim > 2 {
        return Err(ComplexError::BadMaxDim(max_dim));
    }
    if let Some(r) = r_max {
        if !(r >= 0.0) {
            return Err(ComplexError::BadRadius(r));
        }
    }
    let keep = |v: f64| r_max.map_or(true, |r| v <= r);

    let mut edge_at = vec![usize::MAX; n * n];
    let mut edge_val = vec![f64::INFINITY; n * n];
    let mut raw: Vec<RawCell> = vertex_values
        .iter()
        .map(|&v| RawCell {
            dim: 0,
            filtration: v,
            boundary: Vec::new(),
        })
        .collect();
    if max_dim >= 1 {
        for i in 0..n {
            for j in i + 1..n {
                let v = edge_value(i, j);
                if keep(v) {
                    edge_at[i * n + j] = raw.len();
                    edge_val[i * n + j] = v;
                    raw.push(RawCell {
                        dim: 1,
                        filtration: v,
                        boundary: vec![i, j],
                    });
                }
            }
        }
    }
    if max_dim >= 2 {
        let mut triangles = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                if edge_at[i * n + j] == usize::MAX {
                    continue;
                }
                for k in j + 1..n {
                    if edge_at[i * n + k] != usize::MAX && edge_at[j * n + k] != usize::MAX {
                        triangles += 1;
                    }
                }
            }
        }
        let total = raw.len() + triangles;
        if total > cap {
            return Err(ComplexError::ComplexTooLarge { cells: total, cap });
        }
        raw.reserve(triangles);
        for i in 0..n {
            for j in i + 1..n {
                let ij = edge_at[i * n + j];
                if ij == usize::MAX {
                    continue;
                }
                for k in j + 1..n {
                    let (ik, jk) = (edge_at[i * n + k], edge_at[j * n + k]);
                    if ik == usize::MAX || jk == usize::MAX {
                        continue;
                    }
                    let v = edge_val[i * n + j]
                        .max(edge_val[i * n + k])
                        .max(edge_val[j * n + k]);
                    raw.push(RawCell {
                        dim: 2,
                        filtration: v,
                        boundary: vec![ij, ik, jk],
                    });
                }
            }
        }
    } else if raw.len() > cap {
        return Err(ComplexError::ComplexTooLarge {
            cells: raw.len(),
            cap,
        });
    }
    FilteredComplex::from_raw(kind, raw, meta)
}

/// Vietoris-Rips complex up to `max_dim`. `r_max = None` keeps every edge.
pub fn build_rips(
    cloud: &PointCloud,
    max_dim: usize,
    r_max: Option<f64>,
    cap: usize,
) -> Result<FilteredComplex, ComplexError> {
    let pts = &cloud.points;
    let meta = serde_json::json!({ "points": pts.len(), "r_max": r_max });
    simplicial_build(
        ComplexKind::Rips,
        &vec![0.0; pts.len()],
        |i, j| euclid(&pts[i], &pts[j]),
        max_dim,
        r_max,
        cap,
        meta,
    )
}

/// Edge value of the weighted Rips construction used for the DTM filtration.
#[inline]
pub fn dtm_edge_value(dist: f64, wx: f64, wy: f64) -> f64 {
    wx.max(wy).max((dist + wx + wy) / 2.0)
}

/// Weighted Rips complex with vertex `x` entering at `w(x)`.
pub fn build_dtm_rips(
    cloud: &PointCloud,
    weights: &DtmWeights,
    max_dim: usize,
    r_max: Option<f64>,
    cap: usize,
) -> Result<FilteredComplex, ComplexError> {
    let pts = &cloud.points;
    let w = &weights.weights;
    if w.len() != pts.len() {
        return Err(ComplexError::WeightCount {
            weights: w.len(),
            points: pts.len(),
        });
    }
    let meta = serde_json::json!({
        "points": pts.len(),
        "r_max": r_max,
        "m": weights.m,
        "k": weights.k,
    });
    simplicial_build(
        ComplexKind::DtmRips,
        w,
        |i, j| dtm_edge_value(euclid(&pts[i], &pts[j]), w[i], w[j]),
        max_dim,
        r_max,
        cap,
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{FieldParams, FiltrationKind};

    fn field(w: usize, h: usize, values: Vec<f64>) -> FiltrationField {
        FiltrationField {
            width: w,
            height: h,
            values,
            kind: FiltrationKind::Greyscale,
            params: FieldParams::default(),
        }
    }

    #[test]
    fn single_pixel_counts() {
        let c = build_cubical(&field(1, 1, vec![7.0]));
        assert_eq!((c.count_dim(0), c.count_dim(1), c.count_dim(2)), (4, 4, 1));
        assert!(c.cells().iter().all(|x| x.filtration == 7.0));
    }

    #[test]
    fn cubical_counts_and_centre_vertex() {
        let (w, h) = (3, 2);
        let c = build_cubical(&field(w, h, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(c.count_dim(2), w * h);
        assert_eq!(c.count_dim(1), (w + 1) * h + w * (h + 1));
        assert_eq!(c.count_dim(0), (w + 1) * (h + 1));

        let c = build_cubical(&field(2, 2, vec![5.0, 3.0, 4.0, 8.0]));
        // construction id 4 is vertex (1, 1), the shared corner
        let centre = c.cells().iter().find(|x| x.id == 4).unwrap();
        assert_eq!(centre.filtration, 3.0);
        c.check_face_order().unwrap();
    }

    #[test]
    fn constant_field_is_one_snapshot() {
        let c = build_cubical(&field(3, 3, vec![2.5; 9]));
        assert!(c.cells().iter().all(|x| x.filtration == 2.5));
    }

    #[test]
    fn rips_small() {
        let cloud = PointCloud::new(vec![[0.0, 0.0], [0.0, 3.0]]);
        let c = build_rips(&cloud, 2, Some(10.0), DEFAULT_CELL_CAP).unwrap();
        assert_eq!((c.count_dim(0), c.count_dim(1), c.count_dim(2)), (2, 1, 0));
        assert_eq!(c.cells()[2].filtration, 3.0);

        let s = 2.0;
        let tri = PointCloud::new(vec![[0.0, 0.0], [s, 0.0], [s / 2.0, s * 3f64.sqrt() / 2.0]]);
        let c = build_rips(&tri, 2, None, DEFAULT_CELL_CAP).unwrap();
        let t = c.cells().iter().find(|x| x.dim == 2).unwrap();
        assert!((t.filtration - s).abs() < 1e-12);
    }

    #[test]
    fn rips_respects_radius_and_cap() {
        let cloud = PointCloud::new(vec![[0.0, 0.0], [0.0, 1.0], [0.0, 5.0]]);
        let c = build_rips(&cloud, 2, Some(2.0), DEFAULT_CELL_CAP).unwrap();
        assert_eq!((c.count_dim(1), c.count_dim(2)), (1, 0));
        assert_eq!(
            build_rips(&cloud, 2, None, 6),
            Err(ComplexError::ComplexTooLarge { cells: 7, cap: 6 })
        );
        assert_eq!(
            build_rips(&PointCloud::new(vec![]), 2, None, 10),
            Err(ComplexError::EmptyCloud)
        );
    }

    #[test]
    fn dtm_edges_by_hand() {
        let cloud = PointCloud::new(vec![[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]]);
        let weights = crate::filtration::dtm_weights(&cloud, 0.5).unwrap();
        let c = build_dtm_rips(&cloud, &weights, 1, None, DEFAULT_CELL_CAP).unwrap();
        let mut edges: Vec<f64> = c
            .cells()
            .iter()
            .filter(|x| x.dim == 1)
            .map(|x| x.filtration)
            .collect();
        edges.sort_by(f64::total_cmp);
        // (1 + .5 + .5)/2, (9 + .5 + 4.5)/2, (10 + .5 + 4.5)/2
        assert_eq!(edges, vec![1.0, 7.0, 7.5]);
        let verts: Vec<f64> = c.cells().iter().filter(|x| x.dim == 0).map(|x| x.filtration).collect();
        assert_eq!(verts, vec![0.5, 0.5, 4.5]);
    }

    #[test]
    fn dtm_zero_weights_halve_rips() {
        assert_eq!(dtm_edge_value(3.0, 0.0, 0.0), 1.5);
        assert_eq!(dtm_edge_value(1.0, 0.0, 5.0), 5.0);
    }

    #[test]
    fn invalid_order_is_reported() {
        let cells = vec![
            Cell { id: 0, dim: 0, filtration: 0.0, boundary: vec![] },
            Cell { id: 1, dim: 1, filtration: 1.0, boundary: vec![0, 2] },
            Cell { id: 2, dim: 0, filtration: 0.0, boundary: vec![] },
        ];
        let c = FilteredComplex::from_sorted_unchecked(ComplexKind::Custom, cells);
        assert!(matches!(
            c.check_face_order(),
            Err(ComplexError::InvalidComplex { cell: 1, .. })
        ));
    }

    #[test]
    fn dump_lists_every_cell() {
        let c = build_cubical(&field(1, 1, vec![1.0]));
        let dump = c.debug_dump();
        assert_eq!(dump.lines().count(), 9);
        assert!(dump.lines().last().unwrap().starts_with("2 1"));
    }
}
