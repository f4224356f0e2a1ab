//! Independent oracles shared by the integration tests. Nothing here calls the
//! code under test except to read its outputs.
#![allow(dead_code)]

use std::path::PathBuf;

use phstab_core::{GreyscaleImage, PersistenceDiagram};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn mnist_images() -> PathBuf {
    data_dir().join("train-1000-images-idx3-ubyte")
}

pub fn mnist_labels() -> PathBuf {
    data_dir().join("train-1000-labels-idx1-ubyte")
}

// ---------------------------------------------------------------------------
// Rank-invariant oracle

/// A cell given by its vertex set; faces are found by set inclusion.
#[derive(Debug, Clone)]
pub struct OracleCell {
    pub dim: usize,
    pub value: f64,
    pub vertices: Vec<usize>,
}

/// Chains are bitmasks over the cells of one dimension (at most 64 of them).
fn rank(mut vectors: Vec<u64>) -> usize {
    let mut r = 0;
    for bit in 0..64 {
        let mask = 1u64 << bit;
        if let Some(p) = vectors.iter().position(|v| v & mask != 0) {
            let pivot = vectors.swap_remove(p);
            for v in vectors.iter_mut() {
                if *v & mask != 0 {
                    *v ^= pivot;
                }
            }
            r += 1;
        }
    }
    r
}

/// Basis of the kernel of the map sending unit vector `i` to `images[i]`.
fn kernel(images: &[u64]) -> Vec<u64> {
    // rows carry (image, combination); reduce images, keep combos that vanish
    let mut rows: Vec<(u64, u64)> = images.iter().enumerate().map(|(i, &v)| (v, 1u64 << i)).collect();
    let mut basis = Vec::new();
    let mut done = vec![false; rows.len()];
    for bit in 0..64 {
        let mask = 1u64 << bit;
        let Some(p) = (0..rows.len()).find(|&i| !done[i] && rows[i].0 & mask != 0) else {
            continue;
        };
        done[p] = true;
        let pivot = rows[p];
        for (i, row) in rows.iter_mut().enumerate() {
            if i != p && row.0 & mask != 0 {
                row.0 ^= pivot.0;
                row.1 ^= pivot.1;
            }
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if !done[i] {
            assert_eq!(row.0, 0);
            basis.push(row.1);
        }
    }
    basis
}

pub struct BettiOracle {
    cells: Vec<OracleCell>,
    /// Index of each cell within its own dimension.
    slot: Vec<usize>,
    /// Boundary of each cell as a mask over the dimension below.
    boundary: Vec<u64>,
    pub values: Vec<f64>,
}

impl BettiOracle {
    pub fn new(cells: Vec<OracleCell>) -> Self {
        let mut counts = [0usize; 3];
        let mut slot = Vec::with_capacity(cells.len());
        for c in &cells {
            slot.push(counts[c.dim]);
            counts[c.dim] += 1;
        }
        assert!(counts.iter().all(|&n| n <= 64), "oracle handles at most 64 cells per dimension");
        let mut boundary = vec![0u64; cells.len()];
        for (i, c) in cells.iter().enumerate() {
            if c.dim == 0 {
                continue;
            }
            for (j, f) in cells.iter().enumerate() {
                if f.dim + 1 == c.dim && f.vertices.iter().all(|v| c.vertices.contains(v)) {
                    assert!(f.value <= c.value, "face enters after its coface");
                    boundary[i] |= 1u64 << slot[j];
                }
            }
        }
        let mut values: Vec<f64> = cells.iter().map(|c| c.value).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        Self {
            cells,
            slot,
            boundary,
            values,
        }
    }

    /// Rank of `H_k(K_s) -> H_k(K_t)` for `s <= t`.
    pub fn persistent_betti(&self, k: usize, s: f64, t: f64) -> usize {
        let cycles_images: Vec<u64> = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.dim == k && c.value <= s)
            .map(|(i, _)| self.boundary[i])
            .collect();
        let ids: Vec<usize> = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.dim == k && c.value <= s)
            .map(|(i, _)| self.slot[i])
            .collect();
        // kernel combos are over the local index; translate to global slots
        let z: Vec<u64> = kernel(&cycles_images)
            .into_iter()
            .map(|combo| {
                ids.iter()
                    .enumerate()
                    .filter(|(local, _)| combo >> local & 1 == 1)
                    .fold(0u64, |acc, (_, &g)| acc | 1u64 << g)
            })
            .collect();
        let b: Vec<u64> = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.dim == k + 1 && c.value <= t)
            .map(|(i, _)| self.boundary[i])
            .collect();
        let dz = z.len();
        let db = rank(b.clone());
        let sum = rank(z.into_iter().chain(b).collect());
        let meet = dz + db - sum;
        dz - meet
    }

    /// Compares every persistent Betti number at critical values with the
    /// count read off `pd`. Returns the first mismatch.
    pub fn check(&self, pd: &PersistenceDiagram) -> Result<(), String> {
        let k = pd.dim as usize;
        for (i, &s) in self.values.iter().enumerate() {
            for &t in &self.values[i..] {
                let want = self.persistent_betti(k, s, t);
                let got = pd.pairs.iter().filter(|&&(b, d)| b <= s && d > t).count()
                    + pd.essential_births.iter().filter(|&&b| b <= s).count();
                if want != got {
                    return Err(format!("dim {k}, s={s}, t={t}: oracle {want}, diagram {got}"));
                }
            }
        }
        Ok(())
    }
}

/// Primal cubical complex of a `h x w` field, built from vertex sets. Lower
/// cells take the minimum of the pixels they touch.
pub fn cubical_cells(w: usize, h: usize, values: &[f64]) -> Vec<OracleCell> {
    let vid = |i: usize, j: usize| i * (w + 1) + j;
    let touching = |rows: &[usize], cols: &[usize]| {
        let mut m = f64::INFINITY;
        for &r in rows {
            for &c in cols {
                if r >= 1 && c >= 1 && r <= h && c <= w {
                    m = m.min(values[(r - 1) * w + (c - 1)]);
                }
            }
        }
        m
    };
    let mut cells = Vec::new();
    for i in 0..=h {
        for j in 0..=w {
            // pixel (r, c) in 1-based terms spans vertices r-1..=r
            let value = touching(&[i, i + 1], &[j, j + 1]);
            cells.push(OracleCell { dim: 0, value, vertices: vec![vid(i, j)] });
        }
    }
    for i in 0..=h {
        for j in 0..w {
            let value = touching(&[i, i + 1], &[j + 1]);
            cells.push(OracleCell { dim: 1, value, vertices: vec![vid(i, j), vid(i, j + 1)] });
        }
    }
    for i in 0..h {
        for j in 0..=w {
            let value = touching(&[i + 1], &[j, j + 1]);
            cells.push(OracleCell { dim: 1, value, vertices: vec![vid(i, j), vid(i + 1, j)] });
        }
    }
    for i in 0..h {
        for j in 0..w {
            cells.push(OracleCell {
                dim: 2,
                value: values[i * w + j],
                vertices: vec![vid(i, j), vid(i, j + 1), vid(i + 1, j), vid(i + 1, j + 1)],
            });
        }
    }
    cells
}

/// Flag complex up to triangles with vertex values `vertex` and edge values
/// `edge(i, j)`; a triangle enters with its last edge.
pub fn flag_cells(vertex: &[f64], edge: impl Fn(usize, usize) -> f64) -> Vec<OracleCell> {
    let n = vertex.len();
    let mut cells: Vec<OracleCell> = (0..n)
        .map(|i| OracleCell { dim: 0, value: vertex[i], vertices: vec![i] })
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            cells.push(OracleCell { dim: 1, value: edge(i, j), vertices: vec![i, j] });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let value = edge(i, j).max(edge(i, k)).max(edge(j, k));
                cells.push(OracleCell { dim: 2, value, vertices: vec![i, j, k] });
            }
        }
    }
    cells
}

// ---------------------------------------------------------------------------
// Exhaustive Wasserstein

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn to_diag(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

/// Minimum over every partial matching of `a` into `b`; unmatched points go
/// to the diagonal.
pub fn brute_wasserstein(a: &[(f64, f64)], b: &[(f64, f64)], p: f64) -> f64 {
    fn go(i: usize, a: &[(f64, f64)], b: &[(f64, f64)], used: &mut Vec<bool>, acc: f64, p: f64, best: &mut f64) {
        if i == a.len() {
            let rest: f64 = b
                .iter()
                .zip(used.iter())
                .filter(|(_, &u)| !u)
                .map(|(&q, _)| to_diag(q).powf(p))
                .sum();
            *best = best.min(acc + rest);
            return;
        }
        go(i + 1, a, b, used, acc + to_diag(a[i]).powf(p), p, best);
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, a, b, used, acc + linf(a[i], b[j]).powf(p), p, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, a, b, &mut vec![false; b.len()], 0.0, p, &mut best);
    best.powf(1.0 / p)
}

// ---------------------------------------------------------------------------
// Synthetic digits

/// 28x28 canvas with the listed pixels set to `ink`.
pub fn canvas(pixels: &[(usize, usize, f64)]) -> GreyscaleImage {
    let mut v = vec![0.0; 28 * 28];
    for &(r, c, z) in pixels {
        v[r * 28 + c] = z;
    }
    GreyscaleImage::new(28, 28, v).unwrap()
}

/// Pixels on the border of the rectangle `[r0, r1] x [c0, c1]`, one pixel thick.
pub fn rect_ring(r0: usize, r1: usize, c0: usize, c1: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1 {
            if r == r0 || r == r1 || c == c0 || c == c1 {
                out.push((r, c));
            }
        }
    }
    out
}

/// A "0": one rectangular loop.
pub fn one_hole_digit() -> Vec<(usize, usize)> {
    rect_ring(6, 21, 9, 18)
}

/// An "8": two loops sharing a bar.
pub fn two_hole_digit() -> Vec<(usize, usize)> {
    let mut px = rect_ring(4, 13, 9, 18);
    px.extend(rect_ring(13, 23, 9, 18).into_iter().filter(|&(r, _)| r != 13));
    px
}

pub fn ink(pixels: &[(usize, usize)], z: f64) -> GreyscaleImage {
    canvas(&pixels.iter().map(|&(r, c)| (r, c, z)).collect::<Vec<_>>())
}

/// Number of bounded 4-connected background regions of the 8-connected ink
/// set `{field <= t}`, by flood fill from outside the grid.
pub fn holes_at(w: usize, h: usize, field: &[f64], t: f64) -> usize {
    // pad by one so the outside is a single region
    let (pw, ph) = (w + 2, h + 2);
    let inside = |r: usize, c: usize| r >= 1 && c >= 1 && r <= h && c <= w && field[(r - 1) * w + (c - 1)] <= t;
    let mut seen = vec![false; pw * ph];
    let mut regions = 0;
    for start in 0..pw * ph {
        let (r, c) = (start / pw, start % pw);
        if seen[start] || inside(r, c) {
            continue;
        }
        regions += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            let (r, c) = ((x / pw) as isize, (x % pw) as isize);
            for (dr, dc) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= ph as isize || cc >= pw as isize {
                    continue;
                }
                let y = rr as usize * pw + cc as usize;
                if !seen[y] && !inside(rr as usize, cc as usize) {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    regions - 1
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------------------
// Randomised oracle sweeps

use phstab_core::complex::DEFAULT_CELL_CAP;
use phstab_core::filtration::{dtm_neighbour_count, dtm_weights};
use phstab_core::metrics::{wasserstein_with, WassersteinSolver};
use phstab_core::rips::{dtm_rips_persistence, rips_persistence};
use phstab_core::{
    build_cubical, build_dtm_rips, build_rips, compute_persistence, FiltrationField, FiltrationKind, PointCloud,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn field(w: usize, h: usize, values: Vec<f64>) -> FiltrationField {
    FiltrationField {
        width: w,
        height: h,
        values,
        kind: FiltrationKind::Greyscale,
        params: Default::default(),
    }
}

fn check_both(oracle: &BettiOracle, diagrams: &[PersistenceDiagram], what: &str) -> Result<(), String> {
    for pd in diagrams {
        oracle.check(pd).map_err(|e| format!("{what}: {e}"))?;
    }
    Ok(())
}

/// Mean of the `k` smallest distances from point `i`, itself included.
fn dtm_oracle(pts: &[[f64; 2]], k: usize) -> Vec<f64> {
    pts.iter()
        .map(|p| {
            let mut d: Vec<f64> = pts.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).collect();
            d.sort_by(f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// `cases` random complexes, half cubical fields up to 4x4 and half clouds of
/// up to 6 points; every diagram must agree with the rank oracle.
pub fn betti_sweep(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        if case % 2 == 0 {
            let (w, h) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            // few distinct values so ties are common
            let values: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0..6) as f64).collect();
            let oracle = BettiOracle::new(cubical_cells(w, h, &values));
            let p = compute_persistence(&build_cubical(&field(w, h, values.clone())))
                .map_err(|e| e.to_string())?;
            check_both(&oracle, &[p.diagram(0), p.diagram(1)], &format!("case {case} cubical {values:?}"))?;
        } else {
            let n = rng.gen_range(1..=6);
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64])
                .collect();
            let dist = |i: usize, j: usize| (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
            let cloud = PointCloud::new(pts.clone());
            let what = format!("case {case} cloud {pts:?}");

            let oracle = BettiOracle::new(flag_cells(&vec![0.0; n], dist));
            let explicit = compute_persistence(&build_rips(&cloud, 2, None, DEFAULT_CELL_CAP).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            check_both(&oracle, &[explicit.diagram(0), explicit.diagram(1)], &format!("{what} rips"))?;
            let implicit = rips_persistence(&cloud, None).map_err(|e| e.to_string())?;
            check_both(&oracle, &implicit, &format!("{what} rips implicit"))?;

            let m = [0.2, 0.34, 0.5][case % 3];
            let weights = dtm_weights(&cloud, m).map_err(|e| e.to_string())?;
            let w = dtm_oracle(&pts, dtm_neighbour_count(m, n));
            if weights.weights != w {
                return Err(format!("{what}: dtm weights {:?} vs oracle {w:?}", weights.weights));
            }
            let oracle = BettiOracle::new(flag_cells(&w, |i, j| {
                w[i].max(w[j]).max((dist(i, j) + w[i] + w[j]) / 2.0)
            }));
            let explicit = compute_persistence(
                &build_dtm_rips(&cloud, &weights, 2, None, DEFAULT_CELL_CAP).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            check_both(&oracle, &[explicit.diagram(0), explicit.diagram(1)], &format!("{what} dtm"))?;
            let implicit = dtm_rips_persistence(&cloud, &weights, None).map_err(|e| e.to_string())?;
            check_both(&oracle, &implicit, &format!("{what} dtm implicit"))?;
        }
    }
    Ok(())
}

pub fn random_diagram(rng: &mut ChaCha8Rng, max_points: usize) -> PersistenceDiagram {
    let n = rng.gen_range(0..=max_points);
    let pairs = (0..n)
        .map(|_| {
            let b: f64 = rng.gen_range(0.0..10.0);
            // occasional exact duplicates exercise multiplicity compression
            (b.round(), b.round() + rng.gen_range(0.0..5.0f64).round().max(1.0))
        })
        .collect();
    PersistenceDiagram::new(0, pairs, Vec::new())
}

pub fn random_diagram_continuous(rng: &mut ChaCha8Rng, max_points: usize) -> PersistenceDiagram {
    let n = rng.gen_range(0..=max_points);
    let pairs = (0..n)
        .map(|_| {
            let b: f64 = rng.gen_range(0.0..10.0);
            (b, b + rng.gen_range(0.0..5.0))
        })
        .collect();
    PersistenceDiagram::new(0, pairs, Vec::new())
}

pub struct WassersteinSweep {
    pub max_solver_error: f64,
    pub max_asymmetry: f64,
    pub worst_triangle_slack: f64,
}

/// Solver against exhaustive enumeration on `pairs` random pairs, then metric
/// axioms on `triples` random triples, all with `p = 2`.
pub fn wasserstein_sweep(pairs: usize, triples: usize, seed: u64) -> Result<WassersteinSweep, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w2 = |a: &PersistenceDiagram, b: &PersistenceDiagram, s| wasserstein_with(a, b, 2.0, s).map_err(|e| e.to_string());
    let mut max_solver_error = 0.0f64;
    for i in 0..pairs {
        let (a, b) = if i % 2 == 0 {
            (random_diagram(&mut rng, 5), random_diagram(&mut rng, 5))
        } else {
            (random_diagram_continuous(&mut rng, 5), random_diagram_continuous(&mut rng, 5))
        };
        let want = brute_wasserstein(&a.pairs, &b.pairs, 2.0);
        for solver in [WassersteinSolver::Transport, WassersteinSolver::Hungarian] {
            let got = w2(&a, &b, solver)?;
            max_solver_error = max_solver_error.max((got - want).abs());
        }
    }
    let mut max_asymmetry = 0.0f64;
    let mut worst_triangle_slack = f64::INFINITY;
    for _ in 0..triples {
        let x = random_diagram_continuous(&mut rng, 5);
        let y = random_diagram_continuous(&mut rng, 5);
        let z = random_diagram_continuous(&mut rng, 5);
        let s = WassersteinSolver::Transport;
        let (xy, yx) = (w2(&x, &y, s)?, w2(&y, &x, s)?);
        max_asymmetry = max_asymmetry.max((xy - yx).abs());
        let (xz, yz) = (w2(&x, &z, s)?, w2(&y, &z, s)?);
        worst_triangle_slack = worst_triangle_slack.min(xy + yz - xz);
    }
    Ok(WassersteinSweep {
        max_solver_error,
        max_asymmetry,
        worst_triangle_slack,
    })
}

// ---------------------------------------------------------------------------
// Digit goldens

use phstab_core::filtration::{binary_filtration, extract_point_cloud, greyscale_filtration, radial_filtration};

fn cubical_diagrams(f: &FiltrationField) -> Result<[PersistenceDiagram; 2], String> {
    let p = compute_persistence(&build_cubical(f)).map_err(|e| e.to_string())?;
    Ok([p.diagram(0), p.diagram(1)])
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Hole births of a radial field read off the hole count at each critical
/// value; every hole must survive until the background enters at `far`.
fn radial_oracle(f: &FiltrationField, far: f64) -> Result<Vec<f64>, String> {
    let mut values = f.values.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut births = Vec::new();
    let mut last = 0;
    for &t in values.iter().filter(|&&t| t < far) {
        let now = holes_at(f.width, f.height, &f.values, t);
        ensure!(now >= last, "a hole closed at {t} before the background entered");
        births.extend(std::iter::repeat(t).take(now - last));
        last = now;
    }
    Ok(births)
}

/// Binary, radial, greyscale, Rips and DTM diagrams of the synthetic "0" and
/// "8" digits against hand-derived values.
pub fn digit_goldens() -> Result<(), String> {
    let far = 27.0 * std::f64::consts::SQRT_2;
    for (holes, px) in [(1usize, one_hole_digit()), (2, two_hole_digit())] {
        let img = ink(&px, 255.0);
        let z0 = 0.5 * img.max_value();

        let [_, b1] = cubical_diagrams(&binary_filtration(&img, z0))?;
        ensure!(
            b1.pairs == vec![(0.0, 1.0); holes] && b1.essential_births.is_empty(),
            "binary dim-1 of a {holes}-hole digit: {:?}",
            b1.pairs
        );

        let radial = radial_filtration(&img, (0.0, 0.0), z0);
        let [r0, r1] = cubical_diagrams(&radial)?;
        let births = radial_oracle(&radial, far)?;
        let want: Vec<(f64, f64)> = births.iter().map(|&b| (b, far)).collect();
        ensure!(r1.pairs == want, "radial dim-1 {:?}, oracle {want:?}", r1.pairs);
        ensure!(r0.essential_births.len() == 1, "radial dim-0 essentials {:?}", r0.essential_births);

        let cloud = extract_point_cloud(&img, z0).map_err(|e| e.to_string())?;
        let n = cloud.len();
        let [p0, p1] = rips_persistence(&cloud, None).map_err(|e| e.to_string())?;
        // lattice neighbours sit at distance 1 and the digit is 4-connected
        ensure!(
            p0.pairs == vec![(0.0, 1.0); n - 1] && p0.essential_births == [0.0],
            "Rips dim-0 of {n} points: {} pairs, essentials {:?}",
            p0.pairs.len(),
            p0.essential_births
        );
        ensure!(
            p1.pairs.len() == holes && p1.pairs.iter().all(|&(b, d)| b == 1.0 && d > 2.0),
            "Rips dim-1 {:?}",
            p1.pairs
        );

        let weights = dtm_weights(&cloud, 0.1).map_err(|e| e.to_string())?;
        let [d0, d1] = dtm_rips_persistence(&cloud, &weights, None).map_err(|e| e.to_string())?;
        // adjacent weights differ by less than 1, so every merge edge exceeds
        // both endpoints and no dim-0 pair has zero length
        ensure!(
            d0.pairs.len() == n - 1 && d0.essential_births.len() == 1,
            "DTM dim-0 {} pairs, essentials {:?}",
            d0.pairs.len(),
            d0.essential_births
        );
        ensure!(
            d1.pairs.len() == holes && d1.pairs.iter().all(|&(b, d)| d - b > 1.0),
            "DTM dim-1 {:?}",
            d1.pairs
        );
    }

    // bright "0" whose faintest ring pixel is 238: the loop closes at 255 - 238
    let ring = one_hole_digit();
    let mut px: Vec<(usize, usize, f64)> = ring.iter().map(|&(r, c)| (r, c, 255.0)).collect();
    px[5].2 = 238.0;
    let img = canvas(&px);
    let [g0, g1] = cubical_diagrams(&greyscale_filtration(&img))?;
    ensure!(g1.pairs == [(17.0, 255.0)], "greyscale dim-1 {:?}", g1.pairs);
    ensure!(
        g0.pairs.is_empty() && g0.essential_births == [0.0],
        "greyscale dim-0 {:?} / {:?}",
        g0.pairs,
        g0.essential_births
    );

    // graded "8": both holes die when the empty interior (value max(Z)) enters
    let px: Vec<(usize, usize, f64)> = two_hole_digit()
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| (r, c, 150.0 + (i * 37 % 106) as f64))
        .collect();
    let img = canvas(&px);
    let top = img.max_value();
    let [_, g1] = cubical_diagrams(&greyscale_filtration(&img))?;
    ensure!(
        g1.pairs.len() == 2 && g1.pairs.iter().all(|&(_, d)| d == top),
        "graded two-hole greyscale dim-1 {:?}, max(Z) = {top}",
        g1.pairs
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Growth rates

use phstab_core::signatures::{landscape_vector, persistence_image, PiWeight, DEFAULT_GRID, DEFAULT_LAYERS, DEFAULT_RESOLUTION};
use phstab_core::signatures::{default_variance, fit_range};

pub const LIFESPANS: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Log-log slopes of squared distance to the empty diagram against lifespan
/// for PD/W2, PL/l2 and PI/l2 with `rho = l^2`. One pair `(0, l)` per
/// diagram; range and variance are fitted once over the whole family.
pub fn growth_slopes() -> Result<[f64; 3], String> {
    let family: Vec<PersistenceDiagram> = LIFESPANS
        .iter()
        .map(|&l| PersistenceDiagram::new(1, vec![(0.0, l)], Vec::new()))
        .collect();
    let range = fit_range(&family).map_err(|e| e.to_string())?;
    let variance = default_variance(&family).map_err(|e| e.to_string())?;
    let empty = PersistenceDiagram::empty(1);
    let (mut pd, mut pl, mut pi) = (Vec::new(), Vec::new(), Vec::new());
    for d in &family {
        let w = wasserstein_with(d, &empty, 2.0, WassersteinSolver::Transport).map_err(|e| e.to_string())?;
        pd.push((w * w).ln());
        let v = landscape_vector(d, DEFAULT_LAYERS, DEFAULT_RESOLUTION, &range).map_err(|e| e.to_string())?;
        pl.push(v.values.iter().map(|x| x * x).sum::<f64>().ln());
        let g = persistence_image(d, DEFAULT_GRID, DEFAULT_GRID, variance, &range, PiWeight::LifespanSquared)
            .map_err(|e| e.to_string())?;
        pi.push(g.grid.iter().map(|x| x * x).sum::<f64>().ln());
    }
    let xs: Vec<f64> = LIFESPANS.iter().map(|l| l.ln()).collect();
    Ok([slope(&xs, &pd), slope(&xs, &pl), slope(&xs, &pi)])
}
