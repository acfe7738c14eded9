use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Fraction of the code extent required as margin on every side.
pub const BOUNDS_MARGIN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// Axis neighbours only (4 in 2-D, 6 in 3-D).
    Axis,
    /// Every neighbour in the surrounding cube (8 in 2-D, 26 in 3-D).
    Full,
}

/// Axis-aligned latent box sampled on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
    pub connectivity: Connectivity,
}

impl GridSpec {
    /// 100 per axis in 2-D, 50 per axis otherwise.
    pub fn default_resolution(dim: usize) -> usize {
        if dim <= 2 {
            100
        } else {
            50
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>, connectivity: Connectivity) -> Result<Self> {
        let spec = Self { lower, upper, resolution, connectivity };
        spec.validate()?;
        Ok(spec)
    }

    /// Box around `codes` with `margin` of the extent added on each side
    /// (at least 0.05 in absolute terms) and `resolution` nodes per axis.
    pub fn covering(codes: &[Vec<f64>], margin: f64, resolution: usize) -> Result<Self> {
        let (lo, hi) = code_box(codes)?;
        let mut lower = Vec::with_capacity(lo.len());
        let mut upper = Vec::with_capacity(lo.len());
        for (a, b) in lo.iter().zip(&hi) {
            let pad = (margin * (b - a)).max(0.05);
            lower.push(a - pad);
            upper.push(b + pad);
        }
        Self::new(lower, upper, vec![resolution; lo.len()], Connectivity::Full)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.upper.len() != d || self.resolution.len() != d {
            return Err(Error::Argument("grid bounds and resolution must share one positive dimension".into()));
        }
        if let Some(r) = self.resolution.iter().find(|&&r| r < 2) {
            return Err(Error::Argument(format!("grid resolution must be ≥ 2 per axis, got {r}")));
        }
        for (a, b) in self.lower.iter().zip(&self.upper) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Argument(format!("grid bounds [{a}, {b}] are not an interval")));
            }
        }
        if self.resolution.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r)).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::Argument("grid has too many nodes".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| (self.upper[k] - self.lower[k]) / (self.resolution[k] - 1) as f64).collect()
    }

    /// Errors unless every code lies inside the box with the required margin.
    pub fn check_covers(&self, codes: &[Vec<f64>]) -> Result<()> {
        let (lo, hi) = code_box(codes)?;
        if lo.len() != self.dim() {
            return Err(Error::Argument(format!("codes are {}-dimensional, grid is {}-dimensional", lo.len(), self.dim())));
        }
        for k in 0..self.dim() {
            let pad = BOUNDS_MARGIN * (hi[k] - lo[k]);
            let tol = 1e-9 * (1.0 + hi[k].abs().max(lo[k].abs()));
            if self.lower[k] > lo[k] - pad + tol || self.upper[k] < hi[k] + pad - tol {
                let s = GridSpec::covering(codes, BOUNDS_MARGIN, self.resolution[k])?;
                return Err(Error::Build(format!(
                    "grid bounds do not cover the encoded data with a {:.0}% margin on axis {k}; try lower {:?} upper {:?}",
                    BOUNDS_MARGIN * 100.0,
                    s.lower,
                    s.upper
                )));
            }
        }
        Ok(())
    }
}

fn code_box(codes: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = codes.first().ok_or_else(|| Error::Argument("no latent codes given".into()))?;
    let mut lo = first.clone();
    let mut hi = first.clone();
    for c in codes {
        if c.len() != lo.len() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("latent codes must be finite and share one dimension".into()));
        }
        for k in 0..c.len() {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    Ok((lo, hi))
}

/// Node and edge topology of a [`GridSpec`]. Node indices are row-major
/// with the last axis fastest; edge `e` joins `edges[e].0 < edges[e].1`.
#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    strides: Vec<usize>,
    edges: Vec<(u32, u32)>,
    adj_start: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * spec.resolution[k + 1];
        }
        let offsets = neighbour_offsets(d, spec.connectivity);
        let n = spec.num_nodes();
        let mut edges = Vec::new();
        let mut adj_start = Vec::with_capacity(n + 1);
        let mut adj = Vec::new();
        let mut idx = vec![0usize; d];
        for node in 0..n {
            adj_start.push(adj.len() as u32);
            let mut list = Vec::with_capacity(offsets.len());
            for off in &offsets {
                let mut nb = 0usize;
                let mut ok = true;
                for k in 0..d {
                    let c = idx[k] as isize + off[k];
                    if c < 0 || c >= spec.resolution[k] as isize {
                        ok = false;
                        break;
                    }
                    nb += c as usize * strides[k];
                }
                if !ok {
                    continue;
                }
                let e = if node < nb {
                    let e = edges.len() as u32;
                    edges.push((node as u32, nb as u32));
                    e
                } else {
                    let (a, b) = (adj_start[nb] as usize, adj_start[nb + 1] as usize);
                    adj[a..b].iter().find(|&&(m, _)| m as usize == node).map(|&(_, e)| e).expect("symmetric neighbourhood")
                };
                list.push((nb as u32, e));
            }
            list.sort_unstable();
            adj.extend(list);
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < spec.resolution[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        adj_start.push(adj.len() as u32);
        Ok(Self { spec, strides, edges, adj_start, adj })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn num_nodes(&self) -> usize {
        self.adj_start.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        let (a, b) = self.edges[e];
        (a as usize, b as usize)
    }

    /// `(neighbour, edge)` pairs of `node`, sorted by neighbour index.
    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (a, b) = (self.adj_start[node] as usize, self.adj_start[node + 1] as usize);
        self.adj[a..b].iter().map(|&(n, e)| (n as usize, e as usize))
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.spec.resolution).map(|(s, r)| (node / s) % r).collect()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let h = self.spec.spacing();
        self.multi_index(node).iter().enumerate().map(|(k, &i)| self.spec.lower[k] + i as f64 * h[k]).collect()
    }

    /// Nearest node to `z`; errors when `z` lies outside the box.
    pub fn snap(&self, z: &[f64]) -> Result<usize> {
        if z.len() != self.spec.dim() {
            return Err(Error::Argument(format!("expected a {}-dimensional latent point, got {}", self.spec.dim(), z.len())));
        }
        let h = self.spec.spacing();
        let mut node = 0;
        for k in 0..z.len() {
            let (lo, hi) = (self.spec.lower[k], self.spec.upper[k]);
            let slack = 1e-9 * h[k];
            if !(z[k] >= lo - slack && z[k] <= hi + slack) {
                return Err(Error::Argument(format!(
                    "latent point {z:?} lies outside the grid bounds {:?} to {:?}",
                    self.spec.lower, self.spec.upper
                )));
            }
            let i = ((z[k] - lo) / h[k]).round().clamp(0.0, (self.spec.resolution[k] - 1) as f64) as usize;
            node += i * self.strides[k];
        }
        Ok(node)
    }
}

fn neighbour_offsets(d: usize, conn: Connectivity) -> Vec<Vec<isize>> {
    match conn {
        Connectivity::Axis => (0..d)
            .flat_map(|k| {
                [-1isize, 1].into_iter().map(move |s| {
                    let mut o = vec![0isize; d];
                    o[k] = s;
                    o
                })
            })
            .collect(),
        Connectivity::Full => {
            let mut out = Vec::new();
            for code in 0..3usize.pow(d as u32) {
                let mut c = code;
                let o: Vec<isize> = (0..d)
                    .map(|_| {
                        let v = (c % 3) as isize - 1;
                        c /= 3;
                        v
                    })
                    .collect();
                if o.iter().any(|&v| v != 0) {
                    out.push(o);
                }
            }
            out
        }
    }
}

/// Node sequence and its summed edge weight.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPath {
    pub nodes: Vec<usize>,
    pub cost: f64,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (cost, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over `weights` (one per edge, ≥ 0). Ties between equal tentative
/// costs are broken by the smaller node index.
pub fn dijkstra(grid: &Grid, weights: &[f64], start: usize, goal: usize) -> Result<GraphPath> {
    let n = grid.num_nodes();
    if weights.len() != grid.num_edges() {
        return Err(Error::Argument(format!("{} weights for {} edges", weights.len(), grid.num_edges())));
    }
    if start >= n || goal >= n {
        return Err(Error::Argument(format!("node index out of range (start {start}, goal {goal}, {n} nodes)")));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![u32::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Entry(0.0, start));
    while let Some(Entry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == goal {
            break;
        }
        for (v, e) in grid.neighbours(u) {
            let nd = d + weights[e];
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u as u32;
                heap.push(Entry(nd, v));
            }
        }
    }
    if !dist[goal].is_finite() {
        return Err(Error::Internal(format!("node {goal} is unreachable from {start}")));
    }
    let mut nodes = vec![goal];
    while *nodes.last().unwrap() != start {
        nodes.push(prev[*nodes.last().unwrap()] as usize);
    }
    nodes.reverse();
    Ok(GraphPath { nodes, cost: dist[goal] })
}

/// Single-source costs by Bellman–Ford relaxation; the brute-force
/// reference for [`dijkstra`].
pub fn bellman_ford(grid: &Grid, weights: &[f64], start: usize) -> Vec<f64> {
    let n = grid.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    dist[start] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for (e, &(a, b)) in grid.edges.iter().enumerate() {
            let (a, b) = (a as usize, b as usize);
            let w = weights[e];
            if dist[a] + w < dist[b] {
                dist[b] = dist[a] + w;
                changed = true;
            }
            if dist[b] + w < dist[a] {
                dist[a] = dist[b] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}
