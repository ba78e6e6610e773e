//! K-means, embedding-size selection, spectral clustering on the multiplex
//! and single-layer graphs, and superpixel regrouping.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mln::{MlnAdjacency, SingularSpectrum};
use crate::seed::derive_seed;

/// Upper bound on the embedding size searched by the largest-gap rule.
pub const MAX_EMBEDDING: usize = 50;

/// Group index for every item; all groups non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    group_of_item: Vec<usize>,
    groups: usize,
}

impl ClusterAssignment {
    pub fn new(group_of_item: Vec<usize>, groups: usize) -> Result<Self> {
        let mut sizes = vec![0usize; groups];
        for &g in &group_of_item {
            if g >= groups {
                return Err(Error::invalid("group_of_item", format!("group {g} out of range 0..{groups}")));
            }
            sizes[g] += 1;
        }
        if sizes.contains(&0) {
            return Err(Error::invalid("group_of_item", "every group must be non-empty"));
        }
        Ok(Self { group_of_item, groups })
    }

    pub fn group_of_item(&self) -> &[usize] {
        &self.group_of_item
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn len(&self) -> usize {
        self.group_of_item.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of_item.is_empty()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.groups];
        for &g in &self.group_of_item {
            sizes[g] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest final SSE wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub assignment: ClusterAssignment,
    pub centroids: DMatrix<f64>,
    /// Within-cluster SSE after every assignment step of the winning run.
    pub sse_history: Vec<f64>,
}

impl KMeansOutcome {
    pub fn sse(&self) -> f64 {
        *self.sse_history.last().unwrap_or(&0.0)
    }
}

/// K-means over the rows of `points`. See [`kmeans_traced`].
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    kmeans_traced(points, k, seed, cfg).map(|o| o.assignment)
}

/// K-means++ seeding followed by Lloyd iterations. Empty clusters are
/// re-seeded at the point farthest from its centroid. Deterministic in `seed`.
pub fn kmeans_traced(points: &DMatrix<f64>, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansOutcome> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid("k", format!("need 1 <= k <= {n}, got {k}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kmeans"));
    }
    if k == n {
        let assignment = ClusterAssignment::new((0..n).collect(), n)?;
        return Ok(KMeansOutcome {
            assignment,
            centroids: points.clone(),
            sse_history: vec![0.0],
        });
    }
    let mut best: Option<KMeansOutcome> = None;
    for run in 0..cfg.restarts.max(1) {
        let run_seed = if run == 0 { seed } else { derive_seed(seed, "kmeans-restart", run as u64) };
        let outcome = lloyd(points, k, run_seed, cfg);
        if best.as_ref().is_none_or(|b| outcome.sse() < b.sse()) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one run"))
}

fn nearest(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = linalg::row_sq_dist(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| linalg::row_sq_dist(points, i, points, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    if target < d {
                        pick = i;
                        break;
                    }
                    target -= d;
                }
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            // all remaining points coincide with a centre
            (0..n).find(|i| !chosen.contains(i)).expect("k < n")
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(linalg::row_sq_dist(points, i, points, next));
        }
    }
    points.select_rows(&chosen)
}

fn lloyd(points: &DMatrix<f64>, k: usize, seed: u64, cfg: &KMeansConfig) -> KMeansOutcome {
    let (n, dim) = points.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut history = Vec::new();
    for _ in 0..cfg.max_iter.max(1) {
        for i in 0..n {
            let (c, d) = nearest(points, i, &centroids);
            labels[i] = c;
            dists[i] = d;
        }
        history.push(dists.iter().sum());

        let mut sums = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = sums.row_mut(labels[i]);
            row += points.row(i);
        }
        let mut next = centroids.clone();
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                next.set_row(c, &(sums.row(c) / counts[c] as f64));
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then_with(|| b.cmp(&a)))
                    .expect("k < n leaves a point");
                taken[far] = true;
                dists[far] = 0.0;
                next.set_row(c, &points.row(far));
            }
        }
        let shift = (0..k)
            .map(|c| linalg::row_sq_dist(&next, c, &centroids, c).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < cfg.tol {
            break;
        }
    }
    for i in 0..n {
        let (c, d) = nearest(points, i, &centroids);
        labels[i] = c;
        dists[i] = d;
    }
    // Coincident points can still leave a cluster empty; move the worst-fit
    // point from a multi-member cluster into it.
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] == 0 {
            let donor = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then_with(|| b.cmp(&a)))
                .expect("k < n leaves a multi-member cluster");
            counts[labels[donor]] -= 1;
            labels[donor] = c;
            counts[c] = 1;
            dists[donor] = 0.0;
            centroids.set_row(c, &points.row(donor));
        }
    }
    let final_sse = (0..n).map(|i| linalg::row_sq_dist(points, i, &centroids, labels[i])).sum::<f64>();
    if history.last().is_none_or(|&last| final_sse < last) {
        history.push(final_sse);
    }
    KMeansOutcome {
        assignment: ClusterAssignment::new(labels, k).expect("all clusters non-empty"),
        centroids,
        sse_history: history,
    }
}

/// Embedding size at the largest drop `σ_P - σ_{P+1}` (1-based `P`),
/// searching `P` in `min_p..=min(50, len - 1)`; the first maximum wins.
pub fn select_p_largest_gap(singular_values: &[f64], min_p: usize) -> usize {
    let len = singular_values.len();
    let min_p = min_p.max(1);
    if len < min_p + 1 {
        return len;
    }
    let upper = MAX_EMBEDDING.min(len - 1);
    if upper < min_p {
        return min_p;
    }
    let mut best = min_p;
    let mut best_gap = f64::NEG_INFINITY;
    for p in min_p..=upper {
        let gap = singular_values[p - 1] - singular_values[p];
        if gap > best_gap {
            best_gap = gap;
            best = p;
        }
    }
    best
}

/// Leading singular vectors used as clustering coordinates.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// `N x P`, orthonormal columns.
    pub vectors: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub p: usize,
}

impl SpectralEmbedding {
    pub fn from_spectrum(spectrum: &SingularSpectrum, min_p: usize) -> Self {
        let p = select_p_largest_gap(&spectrum.values, min_p).max(1);
        Self {
            vectors: spectrum.vectors.columns(0, p).into_owned(),
            singular_values: spectrum.values.clone(),
            p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Scale embedding rows to unit length before k-means.
    pub normalize_rows: bool,
    pub kmeans: KMeansConfig,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            normalize_rows: false,
            kmeans: KMeansConfig {
                restarts: 4,
                ..KMeansConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralClustering {
    pub assignment: ClusterAssignment,
    pub embedding: SpectralEmbedding,
}

fn cluster_embedding(embedding: SpectralEmbedding, q: usize, seed: u64, cfg: &SpectralConfig) -> Result<SpectralClustering> {
    let mut points = embedding.vectors.clone();
    if cfg.normalize_rows {
        for mut row in points.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
    }
    let assignment = kmeans(&points, q, seed, &cfg.kmeans)?;
    Ok(SpectralClustering { assignment, embedding })
}

/// Clusters the entities of a multiplex network into `q` groups using its
/// entity singular vectors.
pub fn mln_spectral_clustering(adj: &MlnAdjacency, q: usize, seed: u64) -> Result<SpectralClustering> {
    mln_spectral_clustering_with(adj, q, seed, &SpectralConfig::default())
}

pub fn mln_spectral_clustering_with(adj: &MlnAdjacency, q: usize, seed: u64, cfg: &SpectralConfig) -> Result<SpectralClustering> {
    let n = adj.entity_count();
    if q == 0 || q > n {
        return Err(Error::invalid("clusters", format!("need 1 <= Q <= N = {n}, got {q}")));
    }
    let embedding = SpectralEmbedding::from_spectrum(&adj.entity_spectrum(), q);
    cluster_embedding(embedding, q, seed, cfg)
}

/// Singular spectrum of a symmetric weight matrix (eigenvectors ordered by
/// descending absolute eigenvalue).
pub fn graph_spectrum(w: &DMatrix<f64>) -> Result<SingularSpectrum> {
    if !w.is_square() {
        return Err(Error::shape("graph_spectrum", format!("weight matrix is {:?}", w.shape())));
    }
    let (values, vectors) = linalg::symmetric_eigen_desc(w.clone());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    Ok(SingularSpectrum {
        values: order.iter().map(|&i| values[i].abs()).collect(),
        vectors: vectors.select_columns(&order),
    })
}

/// Single-layer spectral clustering baseline.
pub fn graph_spectral_clustering(w: &DMatrix<f64>, q: usize, seed: u64) -> Result<SpectralClustering> {
    graph_spectral_clustering_with(w, q, seed, &SpectralConfig::default())
}

pub fn graph_spectral_clustering_with(w: &DMatrix<f64>, q: usize, seed: u64, cfg: &SpectralConfig) -> Result<SpectralClustering> {
    let n = w.nrows();
    if q == 0 || q > n {
        return Err(Error::invalid("clusters", format!("need 1 <= Q <= N = {n}, got {q}")));
    }
    let embedding = SpectralEmbedding::from_spectrum(&graph_spectrum(w)?, q);
    cluster_embedding(embedding, q, seed, cfg)
}

/// Superpixels merged into groups.
#[derive(Debug, Clone)]
pub struct Regrouped {
    /// `D x K` pixel-weighted mean features.
    pub features: DMatrix<f64>,
    pub group_of_superpixel: Vec<usize>,
    /// Pixel count per group.
    pub group_pixels: Vec<usize>,
}

/// Combines superpixel features within each group, weighting every
/// superpixel by its pixel count.
pub fn regroup(features: &DMatrix<f64>, pixel_counts: &[usize], assignment: &ClusterAssignment) -> Result<Regrouped> {
    let n = features.nrows();
    if pixel_counts.len() != n || assignment.len() != n {
        return Err(Error::shape(
            "regroup",
            format!("{n} feature rows, {} sizes, {} assignments", pixel_counts.len(), assignment.len()),
        ));
    }
    let d = assignment.group_count();
    let mut out = DMatrix::zeros(d, features.ncols());
    let mut weights = vec![0usize; d];
    for i in 0..n {
        let g = assignment.group_of_item[i];
        weights[g] += pixel_counts[i];
        let mut row = out.row_mut(g);
        row += features.row(i) * pixel_counts[i] as f64;
    }
    for g in 0..d {
        if weights[g] == 0 {
            return Err(Error::invalid("pixel_counts", format!("group {g} has no pixels")));
        }
        out.row_mut(g).scale_mut(1.0 / weights[g] as f64);
    }
    Ok(Regrouped {
        features: out,
        group_of_superpixel: assignment.group_of_item.clone(),
        group_pixels: weights,
    })
}
