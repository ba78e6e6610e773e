//! Weighted majority fusion of several resolutions and the weighting
//! strategies: equal votes, validation accuracy, decision values, graph
//! total variation and Von Neumann entropy.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{mln_src, validation_accuracy, SegmentationResult, SrcConfig, TrainTestSplit};
use crate::error::{Error, Result, StageExt};
use crate::io::{HsiCube, LabelMap};
use crate::linalg;
use crate::mln::{build_single_layer_graph, default_single_layer_params};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Mv,
    Va,
    Dv,
    Tv,
    Vn,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Mv, Strategy::Va, Strategy::Dv, Strategy::Tv, Strategy::Vn];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Mv => "mv",
            Strategy::Va => "va",
            Strategy::Dv => "dv",
            Strategy::Tv => "tv",
            Strategy::Vn => "vn",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("strategy", format!("unknown strategy `{s}` (expected mv, va, dv, tv or vn)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightValues {
    PerResolution(Vec<f64>),
    /// Row-major `resolutions x pixels`.
    PerPixel { resolutions: usize, pixels: usize, values: Vec<f64> },
}

/// Voting strength of each resolution, optionally per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub strategy: Strategy,
    pub values: WeightValues,
}

impl FusionWeights {
    pub fn per_resolution(strategy: Strategy, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(Self {
            strategy,
            values: WeightValues::PerResolution(weights),
        })
    }

    pub fn per_pixel(strategy: Strategy, resolutions: usize, pixels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != resolutions * pixels {
            return Err(Error::shape("fusion weights", format!("{} values for {resolutions} x {pixels}", values.len())));
        }
        check_weights(&values)?;
        Ok(Self {
            strategy,
            values: WeightValues::PerPixel { resolutions, pixels, values },
        })
    }

    pub fn resolution_count(&self) -> usize {
        match &self.values {
            WeightValues::PerResolution(w) => w.len(),
            WeightValues::PerPixel { resolutions, .. } => *resolutions,
        }
    }

    #[inline]
    pub fn get(&self, resolution: usize, pixel: usize) -> f64 {
        match &self.values {
            WeightValues::PerResolution(w) => w[resolution],
            WeightValues::PerPixel { pixels, values, .. } => values[resolution * pixels + pixel],
        }
    }

    /// Multiplies every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("factor", "must be positive and finite"));
        }
        let values = match &self.values {
            WeightValues::PerResolution(w) => WeightValues::PerResolution(w.iter().map(|v| v * factor).collect()),
            WeightValues::PerPixel { resolutions, pixels, values } => WeightValues::PerPixel {
                resolutions: *resolutions,
                pixels: *pixels,
                values: values.iter().map(|v| v * factor).collect(),
            },
        };
        Ok(Self {
            strategy: self.strategy,
            values,
        })
    }
}

fn check_weights(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("weights", "must be finite and non-negative"));
    }
    if !values.is_empty() && values.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("weights", "all weights are zero"));
    }
    Ok(())
}

/// Per pixel, sums the weights of the resolutions voting for each class and
/// returns the best-scoring class among those that received a vote; ties go
/// to the lowest class id.
pub fn fuse_majority(labels: &[&[u16]], weights: &FusionWeights) -> Result<Vec<u16>> {
    let Some(first) = labels.first() else {
        return Err(Error::invalid("results", "no resolutions to fuse"));
    };
    let t = first.len();
    if labels.iter().any(|l| l.len() != t) {
        return Err(Error::shape("fuse_majority", "label maps differ in size"));
    }
    if weights.resolution_count() != labels.len() {
        return Err(Error::shape(
            "fuse_majority",
            format!("{} weights for {} resolutions", weights.resolution_count(), labels.len()),
        ));
    }
    if let WeightValues::PerPixel { pixels, .. } = weights.values {
        if pixels != t {
            return Err(Error::shape("fuse_majority", format!("weights cover {pixels} pixels, maps have {t}")));
        }
    }
    let mut scores: Vec<(u16, f64)> = Vec::with_capacity(labels.len());
    Ok((0..t)
        .map(|p| {
            scores.clear();
            for (j, l) in labels.iter().enumerate() {
                let w = weights.get(j, p);
                match scores.iter_mut().find(|(c, _)| *c == l[p]) {
                    Some(entry) => entry.1 += w,
                    None => scores.push((l[p], w)),
                }
            }
            scores
                .iter()
                .copied()
                .reduce(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
                .map(|(c, _)| c)
                .unwrap()
        })
        .collect())
}

/// Equal weights `1 / C`.
pub fn weight_mv(resolutions: usize) -> Result<FusionWeights> {
    if resolutions == 0 {
        return Err(Error::invalid("results", "no resolutions"));
    }
    FusionWeights::per_resolution(Strategy::Mv, vec![1.0 / resolutions as f64; resolutions])
}

pub fn weight_va(accuracies: &[f64]) -> Result<FusionWeights> {
    if accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::invalid("validation_accuracy", "must lie in [0, 1]"));
    }
    FusionWeights::per_resolution(Strategy::Va, accuracies.to_vec())
}

/// `w_ij` = largest decision value of pixel `i` at resolution `j`.
pub fn weight_dv(decision_values: &[Option<&DMatrix<f64>>]) -> Result<FusionWeights> {
    let mut values = Vec::new();
    let mut pixels = None;
    for dv in decision_values {
        let dv = dv.ok_or(Error::MissingDecisionValues("dv"))?;
        if *pixels.get_or_insert(dv.nrows()) != dv.nrows() {
            return Err(Error::shape("weight_dv", "decision value matrices differ in row count"));
        }
        values.extend(dv.row_iter().map(|r| r.max()));
    }
    FusionWeights::per_pixel(Strategy::Dv, decision_values.len(), pixels.unwrap_or(0), values)
}

/// Combinatorial Laplacian `D - A`.
pub fn laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -a.clone();
    for i in 0..a.nrows() {
        l[(i, i)] += a.row(i).sum();
    }
    l
}

/// `‖s - L s / |λ_max|‖²`.
pub fn total_variation(laplacian: &DMatrix<f64>, signal: &[f64], lambda_max: f64) -> f64 {
    let s = nalgebra::DVector::from_column_slice(signal);
    let ls = laplacian * &s;
    (s - ls / lambda_max.abs()).norm_squared()
}

/// Largest Laplacian eigenvalue, 1 for an edgeless graph.
pub fn laplacian_lambda_max(laplacian: &DMatrix<f64>) -> f64 {
    let lambda = linalg::power_iteration_max(laplacian, 1e-9, 100_000);
    if lambda > 0.0 {
        lambda
    } else {
        1.0
    }
}

fn z_scored(features: &DMatrix<f64>) -> DMatrix<f64> {
    let n = features.nrows() as f64;
    let mut out = features.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        col.iter_mut().for_each(|v| *v = if std > 0.0 { (*v - mean) / std } else { 0.0 });
    }
    out
}

/// Single-layer self-tuned Gaussian graph on per-band z-scored superpixel
/// features; shared by the smoothness and entropy weights.
pub fn resolution_graph(features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let z = z_scored(features);
    let (sigma, tau) = default_single_layer_params(&z);
    build_single_layer_graph(&z, sigma, tau)
}

/// Mean band-wise total variation of z-scored superpixel features on the
/// resolution graph.
pub fn smoothness(features: &DMatrix<f64>) -> Result<f64> {
    if features.nrows() < 2 {
        return Err(Error::invalid("superpixels", "need at least two per resolution"));
    }
    let z = z_scored(features);
    let (sigma, tau) = default_single_layer_params(&z);
    let a = build_single_layer_graph(&z, sigma, tau)?;
    if a.iter().all(|&v| v == 0.0) {
        log::warn!("total variation: graph has no edges, using λ_max = 1");
    }
    let l = laplacian(&a);
    let lambda = laplacian_lambda_max(&l);
    let k = z.ncols();
    let total: f64 = z.column_iter().map(|s| total_variation(&l, s.as_slice(), lambda)).sum();
    Ok(total / k.max(1) as f64)
}

/// Weights `exp(-SM_j)`, divided by `exp(-min_k SM_k)` so the smoothest
/// resolution has weight 1 (a positive rescaling; fused labels unchanged).
/// Returns the weights and the raw `SM_j`.
pub fn weight_tv(features: &[&DMatrix<f64>]) -> Result<(FusionWeights, Vec<f64>)> {
    let sm: Vec<f64> = features.iter().map(|f| smoothness(f)).collect::<Result<_>>()?;
    let min = sm.iter().copied().fold(f64::INFINITY, f64::min);
    let w = sm.iter().map(|s| (-(s - min)).exp()).collect();
    Ok((FusionWeights::per_resolution(Strategy::Tv, w)?, sm))
}

/// Eigenvalues of `L_G = (D - A) / Σ a_pq`.
pub fn scaled_laplacian_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let total: f64 = a.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EdgelessGraph);
    }
    let lg = laplacian(a) / total;
    Ok(linalg::symmetric_eigen_desc(lg).0)
}

/// `-Σ λ log₂ λ` over the eigenvalues of the trace-normalized Laplacian.
pub fn von_neumann_entropy(a: &DMatrix<f64>) -> Result<f64> {
    let h: f64 = scaled_laplacian_eigenvalues(a)?
        .into_iter()
        .map(|l| if l < 1e-12 || (l - 1.0).abs() < 1e-12 { 0.0 } else { -l * l.log2() })
        .sum();
    Ok(h.max(0.0))
}

/// Weights `exp(-h_j)`; returns the weights and the entropies.
pub fn weight_vn(graphs: &[&DMatrix<f64>]) -> Result<(FusionWeights, Vec<f64>)> {
    let h: Vec<f64> = graphs.iter().map(|a| von_neumann_entropy(a)).collect::<Result<_>>()?;
    let w = h.iter().map(|v| (-v).exp()).collect();
    Ok((FusionWeights::per_resolution(Strategy::Vn, w)?, h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrcConfig {
    pub resolutions: Vec<usize>,
    /// Shared settings; `ers.target_count` is replaced per resolution.
    pub src: SrcConfig,
    pub strategy: Strategy,
    pub validation_repetitions: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl MrcConfig {
    pub fn new(resolutions: Vec<usize>, strategy: Strategy) -> Self {
        Self {
            src: SrcConfig::new(resolutions.first().copied().unwrap_or(1)),
            resolutions,
            strategy,
            validation_repetitions: 5,
            jobs: None,
        }
    }
}

/// One resolution of the multi-resolution pipeline.
#[derive(Debug, Clone)]
pub struct ResolutionResult {
    pub superpixels: usize,
    pub seed: u64,
    pub result: SegmentationResult,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MrcResult {
    pub resolutions: Vec<ResolutionResult>,
    pub weights: FusionWeights,
    /// `SM_j` for tv, `h_j` for vn, empty otherwise.
    pub diagnostics: Vec<f64>,
    pub fused: LabelMap,
}

/// Runs the single-resolution pipeline at every resolution on the same split
/// and fuses the label maps with the configured strategy.
pub fn mln_mrc(cube: &HsiCube, labels: &LabelMap, split: &TrainTestSplit, cfg: &MrcConfig, seed: u64) -> Result<MrcResult> {
    if cfg.resolutions.len() < 2 {
        return Err(Error::invalid("resolutions", "need at least two"));
    }
    let run_one = |j: usize| -> Result<ResolutionResult> {
        let n = cfg.resolutions[j];
        let mut src = cfg.src.clone();
        src.ers.target_count = n;
        let res_seed = derive_seed(seed, "resolution", j as u64);
        let tag = format!("resolution {n}");
        let result = mln_src(cube, labels, split, &src, res_seed).stage(tag.clone())?;
        let validation = if cfg.strategy == Strategy::Va {
            Some(validation_accuracy(&result.prepared, labels, &split.train, &src.svm, cfg.validation_repetitions, res_seed).stage(tag)?)
        } else {
            None
        };
        Ok(ResolutionResult {
            superpixels: n,
            seed: res_seed,
            result,
            validation_accuracy: validation,
        })
    };
    let run_all = || (0..cfg.resolutions.len()).into_par_iter().map(run_one).collect::<Result<Vec<_>>>();
    let resolutions = match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::invalid("jobs", e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };

    let (weights, diagnostics) = match cfg.strategy {
        Strategy::Mv => (weight_mv(resolutions.len())?, Vec::new()),
        Strategy::Va => {
            let acc: Vec<f64> = resolutions.iter().map(|r| r.validation_accuracy.unwrap_or(0.0)).collect();
            (weight_va(&acc)?, Vec::new())
        }
        Strategy::Dv => {
            let dv: Vec<Option<&DMatrix<f64>>> = resolutions.iter().map(|r| Some(&r.result.decision_values)).collect();
            (weight_dv(&dv)?, Vec::new())
        }
        Strategy::Tv => {
            let f: Vec<&DMatrix<f64>> = resolutions.iter().map(|r| &r.result.prepared.superpixel_features).collect();
            weight_tv(&f).stage("fusion weights")?
        }
        Strategy::Vn => {
            let graphs: Vec<DMatrix<f64>> = resolutions
                .iter()
                .map(|r| resolution_graph(&r.result.prepared.superpixel_features))
                .collect::<Result<_>>()
                .stage("fusion weights")?;
            weight_vn(&graphs.iter().collect::<Vec<_>>()).stage("fusion weights")?
        }
    };
    let maps: Vec<&[u16]> = resolutions.iter().map(|r| r.result.labels.labels()).collect();
    let fused = fuse_majority(&maps, &weights).stage("fusion")?;
    Ok(MrcResult {
        fused: LabelMap::new(labels.height(), labels.width(), fused)?,
        resolutions,
        weights,
        diagnostics,
    })
}
