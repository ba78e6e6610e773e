//! Multiplex network built from superpixel features.
//!
//! Bands are grouped into `M` layers by k-means. Each superpixel appears once
//! per layer; intralayer edges carry a Gaussian similarity of the layer's
//! sub-spectra, gated by a feature-distance and a centroid-distance
//! threshold, and every node is tied to its own counterparts in the other
//! layers with a constant interlayer weight.
//!
//! Only the `M` intralayer `N x N` matrices are stored. The entry rule of the
//! order-4 adjacency tensor `A[α, i, β, j]` is
//!
//! * `α == β`: `W_α[i, j]`
//! * `α != β`, `i == j`: the interlayer weight
//! * otherwise 0.
//!
//! The mode-2 (entity) Gram matrix of that tensor is
//! `Σ_α W_α W_αᵀ + M (M - 1) c² I`, and the mode-1 (layer) Gram matrix has
//! diagonal `‖W_α‖²_F + (M - 1) N c²` and constant off-diagonal
//! `(M - 2) N c²`. Both are assembled directly from the compact form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KMeansConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::DenseTensor4;

/// Largest `N * M` for which the dense tensor expansion is allowed.
pub const MAX_EXPANSION: usize = 64;

/// Assignment of spectral bands to layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandPartition {
    layer_of_band: Vec<usize>,
    layers: usize,
}

impl BandPartition {
    pub fn new(layer_of_band: Vec<usize>, layers: usize) -> Result<Self> {
        let mut sizes = vec![0usize; layers];
        for &l in &layer_of_band {
            if l >= layers {
                return Err(Error::invalid("layer_of_band", format!("layer {l} out of range 0..{layers}")));
            }
            sizes[l] += 1;
        }
        if layers == 0 || sizes.contains(&0) {
            return Err(Error::invalid("layer_of_band", "every layer must hold at least one band"));
        }
        Ok(Self { layer_of_band, layers })
    }

    pub fn layer_count(&self) -> usize {
        self.layers
    }

    pub fn layer_of_band(&self) -> &[usize] {
        &self.layer_of_band
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.layers];
        for &l in &self.layer_of_band {
            sizes[l] += 1;
        }
        sizes
    }

    /// Band indices of one layer, ascending.
    pub fn bands_of(&self, layer: usize) -> Vec<usize> {
        (0..self.layer_of_band.len()).filter(|&b| self.layer_of_band[b] == layer).collect()
    }
}

/// Groups the bands (columns of `features`, each a point in `R^N`) into
/// `layers` non-empty clusters with k-means.
pub fn cluster_bands(features: &DMatrix<f64>, layers: usize, seed: u64) -> Result<BandPartition> {
    let bands = features.ncols();
    if layers == 0 || layers > bands {
        return Err(Error::invalid("layers", format!("need 1 <= M <= K = {bands}, got {layers}")));
    }
    let points = features.transpose();
    let assignment = kmeans(&points, layers, seed, &KMeansConfig::default())?;
    BandPartition::new(assignment.group_of_item().to_vec(), layers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlnConfig {
    pub layers: usize,
    /// Gaussian width; `None` uses, per layer, the RMS pairwise feature distance.
    pub sigma: Option<f64>,
    /// Feature-distance gate `p`; `None` uses, per layer, the mean pairwise distance.
    pub feature_threshold: Option<f64>,
    /// Centroid-distance gate `q`, in pixels.
    pub spatial_threshold: f64,
    pub interlayer_weight: f64,
}

impl Default for MlnConfig {
    fn default() -> Self {
        Self {
            layers: 10,
            sigma: None,
            feature_threshold: None,
            spatial_threshold: 100.0,
            interlayer_weight: 1.0,
        }
    }
}

/// Compact multiplex adjacency: one symmetric intralayer matrix per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlnAdjacency {
    layers: Vec<DMatrix<f64>>,
    interlayer_weight: f64,
}

/// Descending singular values with matching orthonormal singular vectors
/// (one per column).
#[derive(Debug, Clone)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl MlnAdjacency {
    pub fn new(layers: Vec<DMatrix<f64>>, interlayer_weight: f64) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::invalid("layers", "at least one layer is required"));
        };
        let n = first.nrows();
        if n == 0 {
            return Err(Error::invalid("layers", "layers must have at least one node"));
        }
        if !(interlayer_weight >= 0.0) || !interlayer_weight.is_finite() {
            return Err(Error::invalid("interlayer_weight", "must be finite and non-negative"));
        }
        for (a, w) in layers.iter().enumerate() {
            if w.shape() != (n, n) {
                return Err(Error::shape("MlnAdjacency::new", format!("layer {a} is {:?}, expected {n}x{n}", w.shape())));
            }
            for i in 0..n {
                if w[(i, i)] != 0.0 {
                    return Err(Error::invalid("layers", format!("layer {a} has a self-loop at {i}")));
                }
                for j in 0..n {
                    let v = w[(i, j)];
                    if !v.is_finite() || v < 0.0 || v != w[(j, i)] {
                        return Err(Error::invalid("layers", format!("layer {a} entry ({i},{j}) must be finite, non-negative and symmetric")));
                    }
                }
            }
        }
        Ok(Self {
            layers,
            interlayer_weight,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn entity_count(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn intralayer(&self, layer: usize) -> &DMatrix<f64> {
        &self.layers[layer]
    }

    pub fn interlayer_weight(&self) -> f64 {
        self.interlayer_weight
    }

    /// Entry `A[α, i, β, j]` of the full adjacency tensor.
    pub fn entry(&self, alpha: usize, i: usize, beta: usize, j: usize) -> f64 {
        if alpha == beta {
            self.layers[alpha][(i, j)]
        } else if i == j {
            self.interlayer_weight
        } else {
            0.0
        }
    }

    /// Dense `M x N x M x N` tensor. Only permitted for `N * M <= 64`.
    pub fn expand(&self) -> Result<DenseTensor4> {
        let (m, n) = (self.layer_count(), self.entity_count());
        if m * n > MAX_EXPANSION {
            return Err(Error::invalid("expand", format!("N*M = {} exceeds {MAX_EXPANSION}", m * n)));
        }
        Ok(DenseTensor4::from_fn([m, n, m, n], |[a, i, b, j]| self.entry(a, i, b, j)))
    }

    /// Gram matrix of the mode-2 unfolding, built from the compact form.
    pub fn entity_gram(&self) -> DMatrix<f64> {
        let n = self.entity_count();
        let m = self.layer_count() as f64;
        let mut g = DMatrix::identity(n, n) * (m * (m - 1.0) * self.interlayer_weight.powi(2));
        for w in &self.layers {
            g += w * w.transpose();
        }
        g
    }

    /// Gram matrix of the mode-1 unfolding, built from the compact form.
    pub fn layer_gram(&self) -> DMatrix<f64> {
        let m = self.layer_count();
        let n = self.entity_count() as f64;
        let c2 = self.interlayer_weight.powi(2);
        DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                self.layers[a].norm_squared() + (m as f64 - 1.0) * n * c2
            } else {
                (m as f64 - 2.0) * n * c2
            }
        })
    }

    /// Mode-2 singular values and entity singular vectors `E_s`.
    ///
    /// Vectors come from the eigendecomposition of [`Self::entity_gram`];
    /// each singular value is then measured directly as the norm of the
    /// unfolding applied to its vector, which stays accurate for values near
    /// zero.
    pub fn entity_spectrum(&self) -> SingularSpectrum {
        let (_, vectors) = linalg::symmetric_eigen_desc(self.entity_gram());
        let m = self.layer_count() as f64;
        let shift = m * (m - 1.0) * self.interlayer_weight.powi(2);
        let values: Vec<f64> = vectors
            .column_iter()
            .map(|e| {
                let e = e.into_owned();
                let intra: f64 = self.layers.iter().map(|w| (w * &e).norm_squared()).sum();
                (intra + shift * e.norm_squared()).sqrt()
            })
            .collect();
        sort_spectrum(values, vectors)
    }

    /// Mode-1 singular values and layer singular vectors `F_s`.
    pub fn layer_spectrum(&self) -> SingularSpectrum {
        let gram = self.layer_gram();
        let (_, vectors) = linalg::symmetric_eigen_desc(gram.clone());
        let values = vectors
            .column_iter()
            .map(|f| {
                let f: DVector<f64> = f.into_owned();
                f.dot(&(&gram * &f)).max(0.0).sqrt()
            })
            .collect();
        sort_spectrum(values, vectors)
    }
}

fn sort_spectrum(values: Vec<f64>, vectors: DMatrix<f64>) -> SingularSpectrum {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    SingularSpectrum {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: vectors.select_columns(&order),
    }
}

fn pairwise_sq_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = linalg::row_sq_dist(x, i, x, j);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn mean_off_diagonal(d: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> f64 {
    let n = d.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += f(d[(i, j)]);
        }
    }
    s / (n * (n - 1) / 2) as f64
}

/// Builds the multiplex adjacency from superpixel features (`N x K`), a band
/// partition and superpixel centroids (`N x 2`).
pub fn build_mln_adjacency(
    features: &DMatrix<f64>,
    partition: &BandPartition,
    centroids: &DMatrix<f64>,
    cfg: &MlnConfig,
) -> Result<MlnAdjacency> {
    let n = features.nrows();
    if partition.layer_of_band.len() != features.ncols() || centroids.shape() != (n, 2) {
        return Err(Error::shape(
            "build_mln_adjacency",
            format!(
                "features {:?}, partition over {} bands, centroids {:?}",
                features.shape(),
                partition.layer_of_band.len(),
                centroids.shape()
            ),
        ));
    }
    if let Some(s) = cfg.sigma {
        if !(s > 0.0) {
            return Err(Error::invalid("sigma", format!("must be positive, got {s}")));
        }
    }
    if !(cfg.spatial_threshold > 0.0) {
        return Err(Error::invalid("spatial_threshold", "must be positive"));
    }
    let spatial = pairwise_sq_distances(centroids);
    let q_sq = cfg.spatial_threshold * cfg.spatial_threshold;

    let layers = (0..partition.layers)
        .map(|layer| {
            let sub = features.select_columns(&partition.bands_of(layer));
            let dist = pairwise_sq_distances(&sub);
            let p = cfg
                .feature_threshold
                .unwrap_or_else(|| mean_off_diagonal(&dist, f64::sqrt));
            let sigma_sq = match cfg.sigma {
                Some(s) => s * s,
                None => match mean_off_diagonal(&dist, |v| v) {
                    v if v > 0.0 => v,
                    _ => 1.0,
                },
            };
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    return 0.0;
                }
                let d_sq = dist[(i, j)];
                let d = d_sq.sqrt();
                // zero distance always passes the similarity gate
                let similar = d < p || d == 0.0;
                if similar && spatial[(i, j)] < q_sq {
                    (-d_sq / sigma_sq).exp()
                } else {
                    0.0
                }
            })
        })
        .collect();
    MlnAdjacency::new(layers, cfg.interlayer_weight)
}

/// Single-layer baseline graph: `W_ij = exp(-‖s_i - s_j‖² / σ²)` when
/// `‖s_i - s_j‖² <= τ`, zero diagonal.
pub fn build_single_layer_graph(features: &DMatrix<f64>, sigma: f64, tau: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    let dist = pairwise_sq_distances(features);
    let n = features.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i != j && dist[(i, j)] <= tau {
            (-dist[(i, j)] / (sigma * sigma)).exp()
        } else {
            0.0
        }
    }))
}

/// Self-tuned parameters for [`build_single_layer_graph`]: `σ² = τ =` the
/// mean pairwise squared distance (1 when all features coincide).
pub fn default_single_layer_params(features: &DMatrix<f64>) -> (f64, f64) {
    let mean = mean_off_diagonal(&pairwise_sq_distances(features), |v| v);
    if mean > 0.0 {
        (mean.sqrt(), mean)
    } else {
        (1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features_two_pairs() -> DMatrix<f64> {
        // 3 superpixels x 4 bands; bands {0,1} and {2,3} are near-duplicates
        DMatrix::from_row_slice(3, 4, &[1.0, 1.1, 9.0, 9.2, 2.0, 2.1, 7.0, 7.1, 3.0, 3.05, 8.0, 8.1])
    }

    #[test]
    fn band_partition_edge_cases() {
        let f = features_two_pairs();
        let each = cluster_bands(&f, 4, 1).unwrap();
        let mut layers = each.layer_of_band().to_vec();
        layers.sort();
        assert_eq!(layers, vec![0, 1, 2, 3]);
        let one = cluster_bands(&f, 1, 1).unwrap();
        assert_eq!(one.layer_sizes(), vec![4]);
        assert!(cluster_bands(&f, 5, 1).is_err());
    }

    #[test]
    fn pairs_of_bands_grouped() {
        let p = cluster_bands(&features_two_pairs(), 2, 3).unwrap();
        let l = p.layer_of_band();
        assert_eq!(l[0], l[1]);
        assert_eq!(l[2], l[3]);
        assert_ne!(l[0], l[2]);
    }

    #[test]
    fn identical_features_connect_in_every_layer() {
        let f = DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.5, 0.25]);
        let part = BandPartition::new(vec![0, 1], 2).unwrap();
        let cent = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        let adj = build_mln_adjacency(&f, &part, &cent, &MlnConfig::default()).unwrap();
        for a in 0..2 {
            assert_eq!(adj.intralayer(a)[(0, 1)], 1.0);
            assert_eq!(adj.intralayer(a)[(0, 0)], 0.0);
        }
    }

    #[test]
    fn spatial_gate_blocks_far_superpixels() {
        let f = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 0.0, 5.0, 5.0]);
        let part = BandPartition::new(vec![0, 0], 1).unwrap();
        let cent = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 150.0, 0.0, 1.0, 1.0]);
        let adj = build_mln_adjacency(&f, &part, &cent, &MlnConfig::default()).unwrap();
        assert_eq!(adj.intralayer(0)[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_bad_sigma() {
        let f = features_two_pairs();
        let part = BandPartition::new(vec![0, 0, 1, 1], 2).unwrap();
        let cent = DMatrix::zeros(3, 2);
        let cfg = MlnConfig {
            sigma: Some(0.0),
            ..MlnConfig::default()
        };
        assert!(build_mln_adjacency(&f, &part, &cent, &cfg).is_err());
        assert!(build_single_layer_graph(&f, -1.0, 1.0).is_err());
    }

    #[test]
    fn single_layer_graph_cases() {
        let same = DMatrix::from_element(3, 2, 0.7);
        let w = build_single_layer_graph(&same, 1.0, 0.0).unwrap();
        assert_eq!(w, DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 }));
        let distinct = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(build_single_layer_graph(&distinct, 1.0, 0.0).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn single_layer_three_points() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let w = build_single_layer_graph(&x, 2.0, 4.0).unwrap();
        assert!((w[(0, 1)] - (-0.25f64).exp()).abs() < 1e-15);
        assert!((w[(1, 2)] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(w[(0, 2)], 0.0);
        assert_eq!(w, w.transpose());
    }

    #[test]
    fn expansion_guard() {
        let adj = MlnAdjacency::new(vec![DMatrix::zeros(9, 9); 8], 1.0).unwrap();
        assert!(adj.expand().is_err());
    }

    #[test]
    fn rejects_invalid_layers() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(MlnAdjacency::new(vec![asym], 1.0).is_err());
        let loops = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(MlnAdjacency::new(vec![loops], 1.0).is_err());
    }
}
