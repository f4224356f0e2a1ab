//! Persistence of (weighted) Vietoris-Rips filtrations without materialising
//! the complex.
//!
//! Dimension 0 uses union-find with the elder rule. Dimension 1 reduces the
//! coboundary matrix, visiting edges from last to first and skipping edges that
//! already killed a component. Triangles are enumerated on demand from edge
//! cofacets; each reduced column keeps only the list of edges it is a sum of.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use crate::complex::{dtm_edge_value, ComplexError};
use crate::filtration::{euclid, DtmWeights, PointCloud};
use crate::persistence::PersistenceDiagram;

/// Filtration key of a simplex: value first, then a combinatorial index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    value: f64,
    index: u64,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Graph {
    n: usize,
    vertex: Vec<f64>,
    /// Dense symmetric edge values; `INFINITY` marks an absent edge.
    edge: Vec<f64>,
}

impl Graph {
    #[inline]
    fn edge(&self, i: usize, j: usize) -> f64 {
        self.edge[i * self.n + j]
    }

    fn triangle_index(&self, mut v: [usize; 3]) -> u64 {
        v.sort_unstable();
        let n = self.n as u64;
        (v[0] as u64 * n + v[1] as u64) * n + v[2] as u64
    }

    fn push_cofacets(&self, (i, j): (usize, usize), heap: &mut BinaryHeap<Reverse<Key>>) {
        let base = self.edge(i, j);
        for k in 0..self.n {
            if k == i || k == j {
                continue;
            }
            let (a, b) = (self.edge(i, k), self.edge(j, k));
            if a.is_finite() && b.is_finite() {
                heap.push(Reverse(Key {
                    value: base.max(a).max(b),
                    index: self.triangle_index([i, j, k]),
                }));
            }
        }
    }
}

/// Pops the smallest entry that survives mod-2 cancellation.
fn pop_pivot(heap: &mut BinaryHeap<Reverse<Key>>) -> Option<Key> {
    let mut pivot = heap.pop()?.0;
    while let Some(&Reverse(next)) = heap.peek() {
        if next != pivot {
            break;
        }
        heap.pop();
        pivot = heap.pop()?.0;
    }
    Some(pivot)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn diagrams(g: &Graph) -> [PersistenceDiagram; 2] {
    let n = g.n;
    let mut edges: Vec<(Key, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = g.edge(i, j);
            if v.is_finite() {
                edges.push((
                    Key {
                        value: v,
                        index: (i * n + j) as u64,
                    },
                    i,
                    j,
                ));
            }
        }
    }
    edges.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let vkey = |i: usize| Key {
        value: g.vertex[i],
        index: i as u64,
    };
    let mut parent: Vec<usize> = (0..n).collect();
    let mut killed = vec![false; edges.len()];
    let mut pairs0 = Vec::new();
    for (e, &(key, i, j)) in edges.iter().enumerate() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri == rj {
            continue;
        }
        // the surviving root is always the oldest vertex of its component
        let (keep, die) = if vkey(ri) < vkey(rj) {
            (ri, rj)
        } else {
            (rj, ri)
        };
        let birth = g.vertex[die];
        if key.value > birth {
            pairs0.push((birth, key.value));
        }
        parent[die] = keep;
        killed[e] = true;
    }
    let mut essential0: Vec<f64> = (0..n)
        .filter(|&x| find(&mut parent, x) == x)
        .map(|x| g.vertex[x])
        .collect();
    essential0.sort_unstable_by(f64::total_cmp);

    let mut pivots: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut pairs1 = Vec::new();
    let mut essential1 = Vec::new();
    let mut heap = BinaryHeap::new();
    for e in (0..edges.len()).rev() {
        if killed[e] {
            continue;
        }
        heap.clear();
        let mut combo = vec![e];
        g.push_cofacets((edges[e].1, edges[e].2), &mut heap);
        loop {
            match pop_pivot(&mut heap) {
                None => {
                    essential1.push(edges[e].0.value);
                    break;
                }
                Some(t) => match pivots.get(&t.index) {
                    Some(other) => {
                        heap.push(Reverse(t));
                        for &o in other {
                            g.push_cofacets((edges[o].1, edges[o].2), &mut heap);
                        }
                        combo = xor_sorted(&combo, other);
                    }
                    None => {
                        if t.value > edges[e].0.value {
                            pairs1.push((edges[e].0.value, t.value));
                        }
                        combo.sort_unstable();
                        pivots.insert(t.index, combo);
                        break;
                    }
                },
            }
        }
    }
    [
        PersistenceDiagram::new(0, pairs0, essential0),
        PersistenceDiagram::new(1, pairs1, essential1),
    ]
}

fn xor_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut a = a.to_vec();
    a.sort_unstable();
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn graph(
    vertex: Vec<f64>,
    value: impl Fn(usize, usize) -> f64,
    r_max: Option<f64>,
) -> Result<Graph, ComplexError> {
    let n = vertex.len();
    if n == 0 {
        return Err(ComplexError::EmptyCloud);
    }
    if let Some(r) = r_max {
        if !(r >= 0.0) {
            return Err(ComplexError::BadRadius(r));
        }
    }
    let mut edge = vec![f64::INFINITY; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = value(i, j);
            if r_max.map_or(true, |r| v <= r) {
                edge[i * n + j] = v;
                edge[j * n + i] = v;
            }
        }
    }
    Ok(Graph { n, vertex, edge })
}

/// Diagrams of dimensions 0 and 1 of the Rips filtration, zero-length pairs dropped.
pub fn rips_persistence(
    cloud: &PointCloud,
    r_max: Option<f64>,
) -> Result<[PersistenceDiagram; 2], ComplexError> {
    let pts = &cloud.points;
    let g = graph(vec![0.0; pts.len()], |i, j| euclid(&pts[i], &pts[j]), r_max)?;
    Ok(diagrams(&g))
}

/// Diagrams of dimensions 0 and 1 of the DTM-weighted Rips filtration.
pub fn dtm_rips_persistence(
    cloud: &PointCloud,
    weights: &DtmWeights,
    r_max: Option<f64>,
) -> Result<[PersistenceDiagram; 2], ComplexError> {
    let pts = &cloud.points;
    let w = &weights.weights;
    if w.len() != pts.len() {
        return Err(ComplexError::WeightCount {
            weights: w.len(),
            points: pts.len(),
        });
    }
    let g = graph(
        w.clone(),
        |i, j| dtm_edge_value(euclid(&pts[i], &pts[j]), w[i], w[j]),
        r_max,
    )?;
    Ok(diagrams(&g))
}
