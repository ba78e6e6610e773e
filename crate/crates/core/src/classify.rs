//! One-vs-rest linear SVM with softmax decision values, training splits,
//! and the single-resolution superpixel classification pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{mln_spectral_clustering_with, regroup, SpectralConfig};
use crate::error::{Error, Result, StageExt};
use crate::io::{HsiCube, LabelMap};
use crate::mln::{build_mln_adjacency, cluster_bands, BandPartition, MlnConfig};
use crate::seed::derive_seed;
use crate::superpixel::{build_pixel_graph, ers_segment_traced, superpixel_centroids, superpixel_features, ErsConfig, SuperpixelMap};

pub const MODEL_MAGIC: [u8; 4] = *b"HSIM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 200,
        }
    }
}

/// Per-dimension standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Zero deviations are stored as 1.
    pub std: Vec<f64>,
}

impl Scaler {
    fn fit(features: &DMatrix<f64>, rows: &[usize]) -> Self {
        let dim = features.ncols();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for d in 0..dim {
            let m = rows.iter().map(|&r| features[(r, d)]).sum::<f64>() / n;
            let var = rows.iter().map(|&r| (features[(r, d)] - m).powi(2)).sum::<f64>() / n;
            mean[d] = m;
            std[d] = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { mean, std }
    }

    fn apply(&self, features: &DMatrix<f64>, row: usize, out: &mut [f64]) {
        for d in 0..self.mean.len() {
            out[d] = (features[(row, d)] - self.mean[d]) / self.std[d];
        }
    }
}

/// Trained one-vs-rest linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: Vec<u16>,
    lambda: f64,
    scaler: Scaler,
    /// `C x dim`, one row per class.
    weights: DMatrix<f64>,
    biases: Vec<f64>,
}

/// Labels and softmax-normalized margins for a batch of rows.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub labels: Vec<u16>,
    /// `rows x C`; each row sums to 1.
    pub decision_values: DMatrix<f64>,
}

/// Trains one binary hinge-loss classifier per class with Pegasos-style
/// stochastic subgradient steps. Rows labelled `None` are ignored.
pub fn train_ovr(features: &DMatrix<f64>, labels: &[Option<u16>], cfg: &SvmConfig, seed: u64) -> Result<LinearModel> {
    if labels.len() != features.nrows() {
        return Err(Error::shape("train_ovr", format!("{} rows, {} labels", features.nrows(), labels.len())));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("train_ovr"));
    }
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    let mut classes: Vec<u16> = rows.iter().map(|&i| labels[i].unwrap()).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("labels", format!("need at least two classes, found {}", classes.len())));
    }

    let dim = features.ncols();
    let scaler = Scaler::fit(features, &rows);
    let mut x = vec![vec![0.0; dim + 1]; rows.len()];
    for (k, &r) in rows.iter().enumerate() {
        scaler.apply(features, r, &mut x[k][..dim]);
        x[k][dim] = 1.0;
    }
    let class_index: Vec<usize> = rows
        .iter()
        .map(|&r| classes.binary_search(&labels[r].unwrap()).unwrap())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orders = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        orders.push(order.clone());
    }

    let radius = 1.0 / cfg.lambda.sqrt();
    let mut weights = DMatrix::zeros(classes.len(), dim);
    let mut biases = vec![0.0; classes.len()];
    for c in 0..classes.len() {
        let mut w = vec![0.0; dim + 1];
        let mut t = 0usize;
        for order in &orders {
            for &k in order {
                t += 1;
                let eta = 1.0 / (cfg.lambda * t as f64);
                let y = if class_index[k] == c { 1.0 } else { -1.0 };
                let margin: f64 = y * w.iter().zip(&x[k]).map(|(a, b)| a * b).sum::<f64>();
                let shrink = 1.0 - eta * cfg.lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    w.iter_mut().zip(&x[k]).for_each(|(v, xi)| *v += eta * y * xi);
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    w.iter_mut().for_each(|v| *v *= radius / norm);
                }
            }
        }
        for d in 0..dim {
            weights[(c, d)] = w[d];
        }
        biases[c] = w[dim];
    }
    Ok(LinearModel {
        classes,
        lambda: cfg.lambda,
        scaler,
        weights,
        biases,
    })
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl LinearModel {
    pub fn classes(&self) -> &[u16] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    /// Raw margins, `rows x C`.
    pub fn margins(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.dim() {
            return Err(Error::shape("predict", format!("model expects {} features, got {}", self.dim(), features.ncols())));
        }
        let mut out = DMatrix::zeros(features.nrows(), self.class_count());
        let mut x = vec![0.0; self.dim()];
        for r in 0..features.nrows() {
            self.scaler.apply(features, r, &mut x);
            for c in 0..self.class_count() {
                out[(r, c)] = self.weights.row(c).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + self.biases[c];
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (c, dim) = (self.class_count(), self.dim());
        let mut out = Vec::with_capacity(24 + 2 * c + 8 * (2 * dim + c * dim + c));
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(c as u32).to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        for &k in &self.classes {
            out.extend_from_slice(&k.to_le_bytes());
        }
        let floats = self
            .scaler
            .mean
            .iter()
            .chain(&self.scaler.std)
            .copied()
            .chain((0..c).flat_map(|k| (0..dim).map(move |d| (k, d))).map(|(k, d)| self.weights[(k, d)]))
            .chain(self.biases.iter().copied());
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 {
            return Err(Error::Truncated {
                expected: 24,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MODEL_MAGIC {
            return Err(Error::BadMagic {
                expected: MODEL_MAGIC,
                found: magic,
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let (c, dim) = (u32_at(8) as usize, u32_at(12) as usize);
        let lambda = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let expected = 24 + 2 * c + 8 * (2 * dim + c * dim + c);
        if bytes.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let classes: Vec<u16> = (0..c).map(|k| u16::from_le_bytes([bytes[24 + 2 * k], bytes[25 + 2 * k]])).collect();
        let mut floats = bytes[24 + 2 * c..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()));
        let mut take = |n: usize| floats.by_ref().take(n).collect::<Vec<f64>>();
        let mean = take(dim);
        let std = take(dim);
        let weights = DMatrix::from_row_slice(c, dim, &take(c * dim));
        let biases = take(c);
        if !(lambda > 0.0) || mean.iter().chain(&std).chain(weights.iter()).chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model blob"));
        }
        Ok(Self {
            classes,
            lambda,
            scaler: Scaler { mean, std },
            weights,
            biases,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Predicts every row; labels are the argmax of the decision values with
/// ties going to the lowest class id.
pub fn predict(model: &LinearModel, features: &DMatrix<f64>) -> Result<Prediction> {
    let mut p = model.margins(features)?;
    let mut labels = Vec::with_capacity(p.nrows());
    for r in 0..p.nrows() {
        let max = p.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut row = p.row_mut(r);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
        labels.push(model.classes[argmax_lowest(row.iter().copied())]);
    }
    Ok(Prediction {
        labels,
        decision_values: p,
    })
}

/// Per-class training pixels; the remaining labelled pixels form the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTestSplit {
    pub per_class: usize,
    pub seed: u64,
    /// Sorted pixel indices.
    pub train: Vec<usize>,
    /// Sorted pixel indices.
    pub test: Vec<usize>,
}

impl TrainTestSplit {
    /// Draws `min(per_class, available)` training pixels from every class.
    pub fn stratified(labels: &LabelMap, per_class: usize, seed: u64) -> Result<Self> {
        if per_class == 0 {
            return Err(Error::invalid("per_class", "must be at least 1"));
        }
        let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.labels().iter().enumerate() {
            if l != 0 {
                by_class.entry(l).or_default().push(i);
            }
        }
        if by_class.len() < 2 {
            return Err(Error::invalid("labels", "need at least two labelled classes"));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (&class, pixels) in &by_class {
            let mut pixels = pixels.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "split", class as u64));
            pixels.shuffle(&mut rng);
            let k = per_class.min(pixels.len());
            train.extend_from_slice(&pixels[..k]);
            test.extend_from_slice(&pixels[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok(Self {
            per_class,
            seed,
            train,
            test,
        })
    }

    pub fn test_mask(&self, len: usize) -> Vec<bool> {
        let mut mask = vec![false; len];
        for &i in &self.test {
            mask[i] = true;
        }
        mask
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrcConfig {
    /// `target_count` is the superpixel count `N`.
    pub ers: ErsConfig,
    /// Groups kept after regrouping, as a fraction of `N`.
    pub regroup_ratio: f64,
    pub mln: MlnConfig,
    pub spectral: SpectralConfig,
    pub svm: SvmConfig,
}

impl SrcConfig {
    pub fn new(superpixels: usize) -> Self {
        Self {
            ers: ErsConfig::new(superpixels),
            regroup_ratio: 0.7,
            mln: MlnConfig::default(),
            spectral: SpectralConfig::default(),
            svm: SvmConfig::default(),
        }
    }

    pub fn group_count(&self) -> usize {
        let n = self.ers.target_count;
        ((self.regroup_ratio * n as f64).ceil() as usize).clamp(1, n.max(1))
    }
}

/// Label-independent stages of one resolution: superpixels, multiplex
/// network, spectral regrouping.
#[derive(Debug, Clone)]
pub struct PreparedResolution {
    pub superpixels: SuperpixelMap,
    /// `N x K` mean spectra.
    pub superpixel_features: DMatrix<f64>,
    pub partition: BandPartition,
    pub entity_singular_values: Vec<f64>,
    pub embedding_size: usize,
    pub group_of_superpixel: Vec<usize>,
    /// `D x K`.
    pub group_features: DMatrix<f64>,
    pub ers_monotonicity_violations: usize,
}

impl PreparedResolution {
    pub fn superpixel_count(&self) -> usize {
        self.superpixels.count()
    }

    pub fn group_count(&self) -> usize {
        self.group_features.nrows()
    }

    pub fn group_of_pixel(&self, pixel: usize) -> usize {
        self.group_of_superpixel[self.superpixels.segments()[pixel] as usize]
    }
}

pub fn prepare_resolution(cube: &HsiCube, cfg: &SrcConfig, seed: u64) -> Result<PreparedResolution> {
    let n = cfg.ers.target_count;
    if !(cfg.regroup_ratio > 0.0 && cfg.regroup_ratio <= 1.0) {
        return Err(Error::invalid("regroup_ratio", "must be in (0, 1]"));
    }
    let graph = build_pixel_graph(cube, &cfg.ers);
    let ers = ers_segment_traced(&graph, &cfg.ers).stage("superpixels")?;
    let features = superpixel_features(cube, &ers.map).stage("superpixels")?;
    let partition = cluster_bands(&features, cfg.mln.layers, derive_seed(seed, "band-clustering", n as u64)).stage("band-clustering")?;
    let adj = build_mln_adjacency(&features, &partition, &superpixel_centroids(&ers.map), &cfg.mln).stage("multiplex-network")?;
    let clustering = mln_spectral_clustering_with(&adj, cfg.group_count(), derive_seed(seed, "spectral-clustering", n as u64), &cfg.spectral)
        .stage("spectral-clustering")?;
    let sizes = ers.map.sizes();
    let regrouped = regroup(&features, &sizes, &clustering.assignment).stage("regroup")?;
    Ok(PreparedResolution {
        superpixels: ers.map,
        superpixel_features: features,
        partition,
        entity_singular_values: clustering.embedding.singular_values,
        embedding_size: clustering.embedding.p,
        group_of_superpixel: regrouped.group_of_superpixel,
        group_features: regrouped.features,
        ers_monotonicity_violations: ers.monotonicity_violations,
    })
}

/// Majority training label per group; ties go to the lowest class id.
pub fn group_training_labels(prep: &PreparedResolution, labels: &LabelMap, train: &[usize]) -> Vec<Option<u16>> {
    let mut votes: Vec<BTreeMap<u16, usize>> = vec![BTreeMap::new(); prep.group_count()];
    for &p in train {
        let l = labels.labels()[p];
        if l != 0 {
            *votes[prep.group_of_pixel(p)].entry(l).or_default() += 1;
        }
    }
    votes
        .iter()
        .map(|v| {
            let max = v.values().copied().max()?;
            v.iter().find(|(_, &c)| c == max).map(|(&l, _)| l)
        })
        .collect()
}

/// Output of the single-resolution pipeline.
#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub prepared: PreparedResolution,
    pub model: LinearModel,
    /// Predicted label for every pixel.
    pub labels: LabelMap,
    /// `T x C` decision values inherited from each pixel's group.
    pub decision_values: DMatrix<f64>,
}

impl SegmentationResult {
    pub fn classes(&self) -> &[u16] {
        self.model.classes()
    }
}

/// Trains on the groups holding pixels from `train` and labels every pixel.
pub fn classify_prepared(prep: &PreparedResolution, labels: &LabelMap, train: &[usize], svm: &SvmConfig, seed: u64) -> Result<SegmentationResult> {
    let group_labels = group_training_labels(prep, labels, train);
    let model = train_ovr(&prep.group_features, &group_labels, svm, seed).stage("train")?;
    let groups = predict(&model, &prep.group_features).stage("predict")?;
    let t = prep.superpixels.segments().len();
    let mut pixel_labels = Vec::with_capacity(t);
    let mut dv = DMatrix::zeros(t, model.class_count());
    for p in 0..t {
        let g = prep.group_of_pixel(p);
        pixel_labels.push(groups.labels[g]);
        dv.set_row(p, &groups.decision_values.row(g));
    }
    Ok(SegmentationResult {
        prepared: prep.clone(),
        labels: LabelMap::new(labels.height(), labels.width(), pixel_labels)?,
        model,
        decision_values: dv,
    })
}

/// Single-resolution pipeline: superpixels, multiplex spectral regrouping,
/// group classification.
pub fn mln_src(cube: &HsiCube, labels: &LabelMap, split: &TrainTestSplit, cfg: &SrcConfig, seed: u64) -> Result<SegmentationResult> {
    if !labels.matches_cube(cube) {
        return Err(Error::shape("mln_src", "label map and cube dimensions differ"));
    }
    let classes = labels.classes().len();
    if cfg.group_count() < classes {
        return Err(Error::invalid(
            "regroup_ratio",
            format!("{} groups cannot hold {classes} classes", cfg.group_count()),
        ));
    }
    let prep = prepare_resolution(cube, cfg, seed)?;
    classify_prepared(&prep, labels, &split.train, &cfg.svm, derive_seed(seed, "svm", cfg.ers.target_count as u64))
}

/// Mean accuracy over `repetitions` stratified half splits of the training
/// pixels: fit on one half, score the other.
pub fn validation_accuracy(
    prep: &PreparedResolution,
    labels: &LabelMap,
    train: &[usize],
    svm: &SvmConfig,
    repetitions: usize,
    seed: u64,
) -> Result<f64> {
    let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for &p in train {
        by_class.entry(labels.labels()[p]).or_default().push(p);
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for rep in 0..repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "validation", rep as u64));
        let (mut fit, mut hold) = (Vec::new(), Vec::new());
        for pixels in by_class.values() {
            let mut pixels = pixels.clone();
            pixels.shuffle(&mut rng);
            let k = pixels.len().div_ceil(2);
            fit.extend_from_slice(&pixels[..k]);
            hold.extend_from_slice(&pixels[k..]);
        }
        if hold.is_empty() {
            continue;
        }
        fit.sort_unstable();
        let result = classify_prepared(prep, labels, &fit, svm, derive_seed(seed, "validation-svm", rep as u64))?;
        let correct = hold.iter().filter(|&&p| result.labels.labels()[p] == labels.labels()[p]).count();
        total += correct as f64 / hold.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::invalid("train", "too few training pixels for a validation split"));
    }
    Ok(total / counted as f64)
}
