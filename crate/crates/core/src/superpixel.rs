//! Entropy-rate superpixels.
//!
//! The cube is modelled as a grid graph whose edge weights are Gaussian
//! similarities of full spectra. Every vertex also carries a self-loop that
//! absorbs the weight of its unselected edges, so the random walk on the
//! selected subgraph keeps a fixed stationary distribution. Edges are added
//! greedily (lazy evaluation, forest constraint) to maximise the entropy rate
//! of that walk plus a weighted balancing term (entropy of the component-size
//! distribution, normalised by `ln T`), until the forest has the requested
//! number of trees.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::HsiCube;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighborhood {
    Four,
    Eight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErsConfig {
    /// Number of superpixels to produce.
    pub target_count: usize,
    /// Balancing strength relative to the entropy term; 0 disables it.
    pub balance: f64,
    /// Gaussian kernel width; `None` selects the RMS spectral distance over
    /// all grid edges.
    pub kernel_sigma: Option<f64>,
    pub neighborhood: Neighborhood,
}

impl ErsConfig {
    pub fn new(target_count: usize) -> Self {
        Self {
            target_count,
            balance: 0.5,
            kernel_sigma: None,
            neighborhood: Neighborhood::Eight,
        }
    }
}

/// Weighted grid graph over the pixels of an image.
#[derive(Debug, Clone)]
pub struct PixelGraph {
    pub height: usize,
    pub width: usize,
    /// Endpoint pairs `(a, b)` with `a < b`, in row-major scan order.
    pub edges: Vec<(u32, u32)>,
    pub weights: Vec<f64>,
}

impl PixelGraph {
    pub fn node_count(&self) -> usize {
        self.height * self.width
    }

    pub fn weight_between(&self, a: usize, b: usize) -> Option<f64> {
        let (a, b) = if a < b { (a as u32, b as u32) } else { (b as u32, a as u32) };
        self.edges.iter().position(|&e| e == (a, b)).map(|i| self.weights[i])
    }
}

/// Grid edges in scan order: right, down, and for eight-neighbourhoods
/// down-right and down-left.
pub fn grid_edges(height: usize, width: usize, neighborhood: Neighborhood) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let p = (r * width + c) as u32;
            if c + 1 < width {
                edges.push((p, p + 1));
            }
            if r + 1 < height {
                edges.push((p, p + width as u32));
                if neighborhood == Neighborhood::Eight {
                    if c + 1 < width {
                        edges.push((p, p + width as u32 + 1));
                    }
                    if c > 0 {
                        edges.push((p, p + width as u32 - 1));
                    }
                }
            }
        }
    }
    edges
}

pub fn build_pixel_graph(cube: &HsiCube, cfg: &ErsConfig) -> PixelGraph {
    let (h, w, k) = (cube.height(), cube.width(), cube.bands());
    let spectra = cube.pixel_major();
    let edges = grid_edges(h, w, cfg.neighborhood);
    let sq: Vec<f64> = edges
        .iter()
        .map(|&(a, b)| {
            let (a, b) = (a as usize * k, b as usize * k);
            spectra[a..a + k]
                .iter()
                .zip(&spectra[b..b + k])
                .map(|(x, y)| {
                    let d = *x as f64 - *y as f64;
                    d * d
                })
                .sum()
        })
        .collect();
    let sigma_sq = match cfg.kernel_sigma {
        Some(s) => s * s,
        None => {
            let mean = if sq.is_empty() { 0.0 } else { sq.iter().sum::<f64>() / sq.len() as f64 };
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    let weights = sq.iter().map(|d| (-d / sigma_sq).exp()).collect();
    PixelGraph {
        height: h,
        width: w,
        edges,
        weights,
    }
}

/// Per-pixel segment ids `0..count`, every segment non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    height: usize,
    width: usize,
    segments: Vec<u32>,
    count: usize,
}

impl SuperpixelMap {
    /// Validates that ids form exactly `0..count`.
    pub fn new(height: usize, width: usize, segments: Vec<u32>) -> Result<Self> {
        if segments.len() != height * width || segments.is_empty() {
            return Err(Error::shape("SuperpixelMap::new", "segment vector does not match dimensions"));
        }
        let count = *segments.iter().max().expect("non-empty") as usize + 1;
        let mut seen = vec![false; count];
        for &s in &segments {
            seen[s as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("segments", "segment ids are not contiguous"));
        }
        Ok(Self {
            height,
            width,
            segments,
            count,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn segments(&self) -> &[u32] {
        &self.segments
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &s in &self.segments {
            sizes[s as usize] += 1;
        }
        sizes
    }

    /// True when every segment is 4-connected.
    pub fn is_four_connected(&self) -> bool {
        let (_, pieces) = four_connected_pieces(self.height, self.width, &self.segments);
        pieces == self.count
    }
}

struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
        a
    }
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Entropy-rate gain (times the total weight) of moving `w` from a vertex
/// self-loop of weight `loop_w` onto an edge.
#[inline]
fn loop_gain(loop_w: f64, w: f64) -> f64 {
    xlogx(loop_w) - xlogx((loop_w - w).max(0.0)) - xlogx(w)
}

/// Change in the component-size entropy when merging sizes `a` and `b`.
#[inline]
fn merge_entropy_change(a: f64, b: f64, n: f64) -> f64 {
    let p = |s: f64| s / n;
    -xlogx(p(a + b)) + xlogx(p(a)) + xlogx(p(b))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    edge: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // max-heap on gain; lower edge index wins ties
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then_with(|| other.edge.cmp(&self.edge))
    }
}

/// Segmentation plus the gains of the accepted edges in acceptance order.
#[derive(Debug, Clone)]
pub struct ErsOutcome {
    pub map: SuperpixelMap,
    pub accepted_gains: Vec<f64>,
    /// Number of accepted gains exceeding their predecessor by more than 1e-9.
    pub monotonicity_violations: usize,
}

pub fn ers_segment(graph: &PixelGraph, cfg: &ErsConfig) -> Result<SuperpixelMap> {
    ers_segment_traced(graph, cfg).map(|o| o.map)
}

/// Lazy-greedy entropy-rate segmentation that also reports the accepted gains.
pub fn ers_segment_traced(graph: &PixelGraph, cfg: &ErsConfig) -> Result<ErsOutcome> {
    let n = graph.node_count();
    let target = cfg.target_count;
    if target == 0 || target > n {
        return Err(Error::invalid("target_count", format!("must be in 1..={n}, got {target}")));
    }
    if !(cfg.balance >= 0.0) {
        return Err(Error::invalid("balance", "must be non-negative"));
    }

    let mut loops = vec![0.0f64; n];
    for (&(a, b), &w) in graph.edges.iter().zip(&graph.weights) {
        loops[a as usize] += w;
        loops[b as usize] += w;
    }
    let total: f64 = loops.iter().sum();
    let inv_total = if total > 0.0 { 1.0 / total } else { 0.0 };
    let nf = n as f64;
    let log_n = if n > 1 { nf.ln() } else { 1.0 };

    let entropy_gain = |loops: &[f64], e: usize| {
        let (a, b) = graph.edges[e];
        let w = graph.weights[e];
        inv_total * (loop_gain(loops[a as usize], w) + loop_gain(loops[b as usize], w))
    };
    let balance_gain = |sa: f64, sb: f64| merge_entropy_change(sa, sb, nf) / log_n;

    // Scale the balancing term so its largest initial magnitude is `balance`
    // times the largest initial entropy gain.
    let max_entropy = (0..graph.edges.len()).map(|e| entropy_gain(&loops, e)).fold(0.0, f64::max);
    let initial_balance = balance_gain(1.0, 1.0).abs();
    let alpha = if initial_balance > 0.0 && max_entropy > 0.0 {
        cfg.balance * max_entropy / initial_balance
    } else {
        cfg.balance
    };

    let mut sets = DisjointSets::new(n);
    let gain_of = |loops: &[f64], sets: &mut DisjointSets, e: usize| -> Option<f64> {
        let (a, b) = graph.edges[e];
        let (ra, rb) = (sets.find(a), sets.find(b));
        if ra == rb {
            return None;
        }
        let (sa, sb) = (sets.size[ra as usize] as f64, sets.size[rb as usize] as f64);
        Some(entropy_gain(loops, e) + alpha * balance_gain(sa, sb))
    };

    let mut heap: BinaryHeap<Candidate> = (0..graph.edges.len())
        .filter_map(|e| gain_of(&loops, &mut sets, e).map(|gain| Candidate { gain, edge: e as u32 }))
        .collect();

    let mut components = n;
    let mut accepted_gains = Vec::with_capacity(n - target);
    let mut violations = 0usize;
    while components > target {
        let Some(top) = heap.pop() else { break };
        let e = top.edge as usize;
        let Some(gain) = gain_of(&loops, &mut sets, e) else {
            continue;
        };
        let fresh = Candidate { gain, edge: top.edge };
        if let Some(next) = heap.peek() {
            if fresh < *next {
                heap.push(fresh);
                continue;
            }
        }
        if let Some(&prev) = accepted_gains.last() {
            if gain > prev + 1e-9 {
                violations += 1;
                log::debug!("ers: gain {gain} exceeds previous accepted gain {prev}");
            }
        }
        accepted_gains.push(gain);
        let (a, b) = graph.edges[e];
        let w = graph.weights[e];
        loops[a as usize] -= w;
        loops[b as usize] -= w;
        sets.union(a, b);
        components -= 1;
    }
    if violations > 0 {
        log::warn!("ers: {violations} accepted gains violated monotonicity");
    }
    if components != target {
        return Err(Error::invalid(
            "target_count",
            format!("pixel graph is disconnected; reached only {components} components"),
        ));
    }

    let roots: Vec<u32> = (0..n as u32).map(|p| sets.find(p)).collect();
    let mut segments = relabel_first_seen(&roots);
    if cfg.neighborhood == Neighborhood::Eight {
        segments = enforce_four_connectivity(graph.height, graph.width, &segments, target);
    }
    Ok(ErsOutcome {
        map: SuperpixelMap::new(graph.height, graph.width, segments)?,
        accepted_gains,
        monotonicity_violations: violations,
    })
}

fn relabel_first_seen(raw: &[u32]) -> Vec<u32> {
    let mut ids: BTreeMap<u32, u32> = BTreeMap::new();
    raw.iter()
        .map(|r| {
            let next = ids.len() as u32;
            *ids.entry(*r).or_insert(next)
        })
        .collect()
}

/// Splits segments into 4-connected pieces; returns piece ids and their count.
fn four_connected_pieces(height: usize, width: usize, segments: &[u32]) -> (Vec<u32>, usize) {
    let mut piece = vec![u32::MAX; segments.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..segments.len() {
        if piece[start] != u32::MAX {
            continue;
        }
        piece[start] = count;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (r, c) = (p / width, p % width);
            let mut visit = |q: usize| {
                if piece[q] == u32::MAX && segments[q] == segments[p] {
                    piece[q] = count;
                    stack.push(q);
                }
            };
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < width {
                visit(p + 1);
            }
            if r > 0 {
                visit(p - width);
            }
            if r + 1 < height {
                visit(p + width);
            }
        }
        count += 1;
    }
    (piece, count as usize)
}

/// Eight-neighbour forests may produce segments joined only diagonally.
/// Split them into 4-connected pieces, then merge the smallest piece into the
/// 4-adjacent piece sharing the longest boundary until `target` remain.
fn enforce_four_connectivity(height: usize, width: usize, segments: &[u32], target: usize) -> Vec<u32> {
    let (pieces, count) = four_connected_pieces(height, width, segments);
    if count <= target {
        return pieces;
    }
    let mut sizes = vec![0usize; count];
    for &p in &pieces {
        sizes[p as usize] += 1;
    }
    let mut adjacency: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); count];
    for r in 0..height {
        for c in 0..width {
            let p = r * width + c;
            let mut link = |q: usize| {
                let (a, b) = (pieces[p], pieces[q]);
                if a != b {
                    *adjacency[a as usize].entry(b).or_default() += 1;
                    *adjacency[b as usize].entry(a).or_default() += 1;
                }
            };
            if c + 1 < width {
                link(p + 1);
            }
            if r + 1 < height {
                link(p + width);
            }
        }
    }
    let mut alive = vec![true; count];
    let mut owner: Vec<u32> = (0..count as u32).collect();
    let mut remaining = count;
    while remaining > target {
        let small = (0..count)
            .filter(|&i| alive[i] && !adjacency[i].is_empty())
            .min_by_key(|&i| (sizes[i], i))
            .expect("a connected grid always has an adjacent piece");
        let (&into, _) = adjacency[small]
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .expect("non-empty adjacency");
        let into = into as usize;
        let moved = std::mem::take(&mut adjacency[small]);
        for (nb, cnt) in moved {
            let nb = nb as usize;
            adjacency[nb].remove(&(small as u32));
            if nb != into {
                *adjacency[into].entry(nb as u32).or_default() += cnt;
                *adjacency[nb].entry(into as u32).or_default() += cnt;
            }
        }
        sizes[into] += sizes[small];
        alive[small] = false;
        owner[small] = into as u32;
        remaining -= 1;
    }
    let resolve = |mut x: u32| {
        while owner[x as usize] != x {
            x = owner[x as usize];
        }
        x
    };
    let merged: Vec<u32> = pieces.iter().map(|&p| resolve(p)).collect();
    relabel_first_seen(&merged)
}

/// Mean spectrum of every superpixel (`count x bands`).
pub fn superpixel_features(cube: &HsiCube, sp: &SuperpixelMap) -> Result<DMatrix<f64>> {
    if cube.height() != sp.height || cube.width() != sp.width {
        return Err(Error::shape("superpixel_features", "cube and superpixel map dimensions differ"));
    }
    let (n, k, t) = (sp.count, cube.bands(), cube.pixel_count());
    let sizes = sp.sizes();
    let mut out = DMatrix::zeros(n, k);
    for b in 0..k {
        let band = &cube.values()[b * t..(b + 1) * t];
        for (p, &v) in band.iter().enumerate() {
            out[(sp.segments[p] as usize, b)] += v as f64;
        }
    }
    for (i, &s) in sizes.iter().enumerate() {
        out.row_mut(i).scale_mut(1.0 / s as f64);
    }
    Ok(out)
}

/// Mean `(row, col)` of every superpixel (`count x 2`).
pub fn superpixel_centroids(sp: &SuperpixelMap) -> DMatrix<f64> {
    let sizes = sp.sizes();
    let mut out = DMatrix::zeros(sp.count, 2);
    for (p, &s) in sp.segments.iter().enumerate() {
        out[(s as usize, 0)] += (p / sp.width) as f64;
        out[(s as usize, 1)] += (p % sp.width) as f64;
    }
    for (i, &s) in sizes.iter().enumerate() {
        out.row_mut(i).scale_mut(1.0 / s as f64);
    }
    out
}
