//! Experiment runners and their JSON reports.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{mln_src, SegmentationResult, SrcConfig, TrainTestSplit};
use crate::cluster::{graph_spectral_clustering_with, graph_spectrum, kmeans, mln_spectral_clustering_with, ClusterAssignment, SpectralConfig};
use crate::error::{Error, Result, StageExt};
use crate::fusion::{mln_mrc, MrcConfig, MrcResult, WeightValues};
use crate::io::{inject_noise, HsiCube, LabelMap, NoiseDistribution, NoiseModel};
use crate::metrics::{boundary_accuracy, overall_accuracy};
use crate::mln::{build_mln_adjacency, build_single_layer_graph, cluster_bands, default_single_layer_params, MlnConfig};
use crate::seed::derive_seed;
use crate::superpixel::{build_pixel_graph, ers_segment_traced, superpixel_centroids, superpixel_features, ErsConfig, Neighborhood, SuperpixelMap};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Serializes a report as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn elapsed_ms(start: Instant, canonical: bool) -> Option<f64> {
    (!canonical).then(|| start.elapsed().as_secs_f64() * 1e3)
}

/// Run metadata written next to every set of results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub library: String,
    pub library_version: String,
    pub command: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, master_seed: u64, config: &C) -> Result<Self> {
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            library: env!("CARGO_PKG_NAME").to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed,
            config: serde_json::to_value(config)?,
        })
    }
}

/// Maps cluster ids of a superpixel assignment to a pixel label map (id + 1).
pub fn cluster_label_map(sp: &SuperpixelMap, assignment: &ClusterAssignment) -> Result<LabelMap> {
    let labels = sp
        .segments()
        .iter()
        .map(|&s| assignment.group_of_item()[s as usize] as u16 + 1)
        .collect();
    LabelMap::new(sp.height(), sp.width(), labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsupervisedConfig {
    /// `target_count` is the superpixel count.
    pub ers: ErsConfig,
    pub mln: MlnConfig,
    pub spectral: SpectralConfig,
    pub clusters: usize,
    /// Also run the single-layer spectral and k-means baselines.
    pub baselines: bool,
    pub boundary_neighborhood: Neighborhood,
    /// Omit timings from the report.
    pub canonical: bool,
}

impl UnsupervisedConfig {
    pub fn new(superpixels: usize, clusters: usize) -> Self {
        Self {
            ers: ErsConfig::new(superpixels),
            mln: MlnConfig::default(),
            spectral: SpectralConfig::default(),
            clusters,
            baselines: false,
            boundary_neighborhood: Neighborhood::Four,
            canonical: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub clusters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnsupervisedReport {
    pub schema_version: u32,
    pub superpixels: usize,
    pub layers: usize,
    pub layer_sizes: Vec<usize>,
    pub ers_monotonicity_violations: usize,
    pub methods: Vec<MethodReport>,
    /// Entity singular values of the multiplex network.
    pub mln_singular_values: Vec<f64>,
    /// Singular values of the single-layer graph on the same features.
    pub single_layer_singular_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl UnsupervisedReport {
    pub fn singular_values_csv(&self) -> String {
        let n = self.mln_singular_values.len().max(self.single_layer_singular_values.len());
        let cell = |v: &[f64], i: usize| v.get(i).map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = String::from("index,mln,single_layer\n");
        for i in 0..n {
            out.push_str(&format!(
                "{},{},{}\n",
                i + 1,
                cell(&self.mln_singular_values, i),
                cell(&self.single_layer_singular_values, i)
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct UnsupervisedRun {
    pub superpixels: SuperpixelMap,
    /// `(method name, pixel map)`; the multiplex method comes first.
    pub maps: Vec<(String, LabelMap)>,
    pub report: UnsupervisedReport,
}

/// Unsupervised segmentation with the multiplex spectral clustering and,
/// optionally, the single-layer spectral and k-means baselines on the same
/// superpixels. Boundary accuracy is reported when `truth` is given.
pub fn run_unsupervised(cube: &HsiCube, truth: Option<&LabelMap>, cfg: &UnsupervisedConfig, seed: u64) -> Result<UnsupervisedRun> {
    let start = Instant::now();
    if let Some(t) = truth {
        if !t.matches_cube(cube) {
            return Err(Error::shape("run_unsupervised", "label map and cube dimensions differ"));
        }
    }
    let n = cfg.ers.target_count;
    let ers = ers_segment_traced(&build_pixel_graph(cube, &cfg.ers), &cfg.ers).stage("superpixels")?;
    let features = superpixel_features(cube, &ers.map).stage("superpixels")?;
    let partition = cluster_bands(&features, cfg.mln.layers, derive_seed(seed, "band-clustering", n as u64)).stage("band-clustering")?;
    let adj = build_mln_adjacency(&features, &partition, &superpixel_centroids(&ers.map), &cfg.mln).stage("multiplex-network")?;
    let mgsp = mln_spectral_clustering_with(&adj, cfg.clusters, derive_seed(seed, "spectral-clustering", n as u64), &cfg.spectral)
        .stage("spectral-clustering")?;
    let (sigma, tau) = default_single_layer_params(&features);
    let w = build_single_layer_graph(&features, sigma, tau).stage("single-layer-graph")?;
    let single_values = graph_spectrum(&w).stage("single-layer-graph")?.values;

    let mut maps = vec![("mgsp".to_string(), cluster_label_map(&ers.map, &mgsp.assignment)?)];
    let mut methods = vec![MethodReport {
        method: "mgsp".into(),
        clusters: cfg.clusters,
        embedding_size: Some(mgsp.embedding.p),
        boundary_accuracy: None,
    }];
    if cfg.baselines {
        let gsp = graph_spectral_clustering_with(&w, cfg.clusters, derive_seed(seed, "gsp-clustering", n as u64), &cfg.spectral)
            .stage("gsp-baseline")?;
        maps.push(("gsp".into(), cluster_label_map(&ers.map, &gsp.assignment)?));
        methods.push(MethodReport {
            method: "gsp".into(),
            clusters: cfg.clusters,
            embedding_size: Some(gsp.embedding.p),
            boundary_accuracy: None,
        });
        let km = kmeans(&features, cfg.clusters, derive_seed(seed, "kmeans-baseline", n as u64), &cfg.spectral.kmeans).stage("kmeans-baseline")?;
        maps.push(("kmeans".into(), cluster_label_map(&ers.map, &km)?));
        methods.push(MethodReport {
            method: "kmeans".into(),
            clusters: cfg.clusters,
            embedding_size: None,
            boundary_accuracy: None,
        });
    }
    if let Some(t) = truth {
        for (m, (_, map)) in methods.iter_mut().zip(&maps) {
            m.boundary_accuracy = Some(boundary_accuracy(map, t, cfg.boundary_neighborhood)?);
        }
    }
    let report = UnsupervisedReport {
        schema_version: REPORT_SCHEMA_VERSION,
        superpixels: ers.map.count(),
        layers: partition.layer_count(),
        layer_sizes: partition.layer_sizes(),
        ers_monotonicity_violations: ers.monotonicity_violations,
        methods,
        mln_singular_values: mgsp.embedding.singular_values,
        single_layer_singular_values: single_values,
        elapsed_ms: elapsed_ms(start, cfg.canonical),
    };
    Ok(UnsupervisedRun {
        superpixels: ers.map,
        maps,
        report,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrcReport {
    pub schema_version: u32,
    pub superpixels: usize,
    pub groups: usize,
    pub embedding_size: usize,
    pub training_pixels: usize,
    pub test_pixels: usize,
    pub classes: Vec<u16>,
    pub overall_accuracy: f64,
    pub ers_monotonicity_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

pub fn run_src(
    cube: &HsiCube,
    labels: &LabelMap,
    split: &TrainTestSplit,
    cfg: &SrcConfig,
    seed: u64,
    canonical: bool,
) -> Result<(SegmentationResult, SrcReport)> {
    let start = Instant::now();
    let result = mln_src(cube, labels, split, cfg, seed)?;
    let oa = overall_accuracy(&result.labels, labels, &split.test_mask(labels.len())).stage("metrics")?;
    let report = SrcReport {
        schema_version: REPORT_SCHEMA_VERSION,
        superpixels: result.prepared.superpixel_count(),
        groups: result.prepared.group_count(),
        embedding_size: result.prepared.embedding_size,
        training_pixels: split.train.len(),
        test_pixels: split.test.len(),
        classes: result.classes().to_vec(),
        overall_accuracy: oa,
        ers_monotonicity_violations: result.prepared.ers_monotonicity_violations,
        elapsed_ms: elapsed_ms(start, canonical),
    };
    Ok((result, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub superpixels: usize,
    pub groups: usize,
    pub overall_accuracy: f64,
    /// Per-resolution scalar weight; mean weight for per-pixel strategies.
    pub weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrcReport {
    pub schema_version: u32,
    pub strategy: String,
    pub training_pixels: usize,
    pub test_pixels: usize,
    pub resolutions: Vec<ResolutionReport>,
    pub fused_overall_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

pub fn run_mrc(
    cube: &HsiCube,
    labels: &LabelMap,
    split: &TrainTestSplit,
    cfg: &MrcConfig,
    seed: u64,
    canonical: bool,
) -> Result<(MrcResult, MrcReport)> {
    let start = Instant::now();
    let result = mln_mrc(cube, labels, split, cfg, seed)?;
    let mask = split.test_mask(labels.len());
    let mut resolutions = Vec::with_capacity(result.resolutions.len());
    for (j, r) in result.resolutions.iter().enumerate() {
        let weight = match &result.weights.values {
            WeightValues::PerResolution(w) => w[j],
            WeightValues::PerPixel { pixels, values, .. } => values[j * pixels..(j + 1) * pixels].iter().sum::<f64>() / *pixels as f64,
        };
        resolutions.push(ResolutionReport {
            superpixels: r.superpixels,
            groups: r.result.prepared.group_count(),
            overall_accuracy: overall_accuracy(&r.result.labels, labels, &mask).stage("metrics")?,
            weight,
            validation_accuracy: r.validation_accuracy,
            diagnostic: result.diagnostics.get(j).copied(),
        });
    }
    let report = MrcReport {
        schema_version: REPORT_SCHEMA_VERSION,
        strategy: cfg.strategy.to_string(),
        training_pixels: split.train.len(),
        test_pixels: split.test.len(),
        resolutions,
        fused_overall_accuracy: overall_accuracy(&result.fused, labels, &mask).stage("metrics")?,
        elapsed_ms: elapsed_ms(start, canonical),
    };
    Ok((result, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepConfig {
    pub levels: Vec<f64>,
    pub models: Vec<NoiseModel>,
    pub distributions: Vec<NoiseDistribution>,
    /// Independent (noise draw, split, pipeline seed) triples averaged per cell.
    pub trials: usize,
    pub per_class: usize,
    pub src: SrcConfig,
    pub canonical: bool,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.05, 0.10, 0.15],
            models: vec![NoiseModel::PixelDependent, NoiseModel::GlobalMean],
            distributions: vec![NoiseDistribution::Uniform, NoiseDistribution::Gaussian],
            trials: 48,
            per_class: 10,
            src: SrcConfig::new(80),
            canonical: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSweepRow {
    pub model: NoiseModel,
    pub distribution: NoiseDistribution,
    pub level: f64,
    pub mean_overall_accuracy: f64,
    pub std_overall_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSweepReport {
    pub schema_version: u32,
    pub trials: usize,
    pub rows: Vec<NoiseSweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl NoiseSweepReport {
    /// Mean OA per level for one setup, in level order.
    pub fn curve(&self, model: NoiseModel, distribution: NoiseDistribution) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.model == model && r.distribution == distribution)
            .map(|r| r.mean_overall_accuracy)
            .collect()
    }
}

/// Single-resolution OA under injected noise. Trial `t` reuses the same noise
/// draw (scaled per level), split and pipeline seed in every cell, so the
/// levels are compared on common random numbers.
pub fn run_noise_sweep(cube: &HsiCube, labels: &LabelMap, cfg: &NoiseSweepConfig, seed: u64) -> Result<NoiseSweepReport> {
    let start = Instant::now();
    if cfg.trials == 0 || cfg.levels.is_empty() {
        return Err(Error::invalid("trials", "need at least one trial and one level"));
    }
    let t = labels.len();
    let mut rows = Vec::new();
    for &model in &cfg.models {
        for &dist in &cfg.distributions {
            for &level in &cfg.levels {
                let oas: Vec<f64> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| -> Result<f64> {
                        let trial = trial as u64;
                        let split = TrainTestSplit::stratified(labels, cfg.per_class, derive_seed(seed, "noise-split", trial))?;
                        let noisy = inject_noise(cube, model, dist, level, derive_seed(seed, "noise", trial)).stage("noise")?;
                        let r = mln_src(&noisy, labels, &split, &cfg.src, derive_seed(seed, "noise-pipeline", trial))?;
                        overall_accuracy(&r.labels, labels, &split.test_mask(t))
                    })
                    .collect::<Result<_>>()?;
                let mean = oas.iter().sum::<f64>() / oas.len() as f64;
                let var = oas.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / oas.len() as f64;
                rows.push(NoiseSweepRow {
                    model,
                    distribution: dist,
                    level,
                    mean_overall_accuracy: mean,
                    std_overall_accuracy: var.sqrt(),
                });
            }
        }
    }
    Ok(NoiseSweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        trials: cfg.trials,
        rows,
        elapsed_ms: elapsed_ms(start, cfg.canonical),
    })
}

/// Fraction of squared singular-value energy in the leading `k` values.
pub fn cumulative_energy(values: &[f64], k: usize) -> f64 {
    let total: f64 = values.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 0.0;
    }
    values.iter().take(k).map(|v| v * v).sum::<f64>() / total
}

