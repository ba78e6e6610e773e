#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mgsp::classify::{SrcConfig, SvmConfig, TrainTestSplit};
use mgsp::cluster::SpectralConfig;
use mgsp::experiment::{self, NoiseSweepConfig, Provenance, UnsupervisedConfig};
use mgsp::fusion::{MrcConfig, Strategy};
use mgsp::io::{self, HsiCube, LabelMap, NoiseDistribution, NoiseModel};
use mgsp::metrics::boundary_map;
use mgsp::mln::MlnConfig;
use mgsp::seed::derive_seed;
use mgsp::superpixel::{build_pixel_graph, ers_segment_traced, ErsConfig, Neighborhood};
use mgsp::synthetic::{self, SyntheticConfig};

const JOBS_ENV: &str = "MGSP_JOBS";

#[derive(Parser)]
#[command(name = "mgsp", version, about = "Multilayer-network segmentation of hyperspectral images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a headerless raw cube plus JSON sidecar to the HSIC format.
    Convert(ConvertArgs),
    /// Write the bundled synthetic scene (cube.hsic, labels.hsil).
    Synthesize(SynthesizeArgs),
    /// Entropy-rate superpixels only.
    Superpixels(ExperimentArgs),
    /// Unsupervised multiplex spectral clustering.
    Segment(ExperimentArgs),
    /// Single-resolution semi-supervised classification.
    Classify(ExperimentArgs),
    /// Multi-resolution classification with decision fusion.
    ClassifyMr(ExperimentArgs),
    /// Boundary accuracy of the multiplex method and its baselines.
    Boundary(ExperimentArgs),
    /// Classification accuracy under injected noise.
    NoiseSweep(ExperimentArgs),
    /// Run any pipeline selected by `--mode`.
    Run {
        #[arg(long, value_enum)]
        mode: Mode,
        #[command(flatten)]
        args: ExperimentArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Superpixels,
    Unsupervised,
    Src,
    Mrc,
    Boundary,
    Noise,
}

impl Mode {
    fn default_superpixels(self) -> usize {
        match self {
            Mode::Superpixels | Mode::Unsupervised => 500,
            Mode::Src | Mode::Boundary => 100,
            Mode::Noise => 80,
            Mode::Mrc => 0,
        }
    }

    fn needs_labels(self) -> bool {
        matches!(self, Mode::Src | Mode::Mrc | Mode::Boundary | Mode::Noise)
    }
}

#[derive(Args)]
struct ConvertArgs {
    /// Headerless sample file.
    #[arg(long)]
    raw: PathBuf,
    /// JSON sidecar with bands, height, width, data_type, byte_order, interleave.
    #[arg(long)]
    header: PathBuf,
    /// Output HSIC file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct SynthesizeArgs {
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
    #[arg(long, default_value_t = SyntheticConfig::default().seed)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StrategyArg {
    Mv,
    Va,
    Dv,
    Tv,
    Vn,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Mv => Strategy::Mv,
            StrategyArg::Va => Strategy::Va,
            StrategyArg::Dv => Strategy::Dv,
            StrategyArg::Tv => Strategy::Tv,
            StrategyArg::Vn => Strategy::Vn,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NoiseModelArg {
    PixelDependent,
    GlobalMean,
}

impl From<NoiseModelArg> for NoiseModel {
    fn from(m: NoiseModelArg) -> Self {
        match m {
            NoiseModelArg::PixelDependent => NoiseModel::PixelDependent,
            NoiseModelArg::GlobalMean => NoiseModel::GlobalMean,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NoiseDistArg {
    Uniform,
    Gaussian,
}

impl From<NoiseDistArg> for NoiseDistribution {
    fn from(d: NoiseDistArg) -> Self {
        match d {
            NoiseDistArg::Uniform => NoiseDistribution::Uniform,
            NoiseDistArg::Gaussian => NoiseDistribution::Gaussian,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct ExperimentArgs {
    /// Hyperspectral cube (HSIC).
    #[arg(long)]
    cube: Option<PathBuf>,
    /// Ground-truth label map (HSIL); 0 marks unlabelled pixels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "mgsp-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Superpixel count N (default depends on the command).
    #[arg(long)]
    superpixels: Option<usize>,
    /// Superpixel counts for multi-resolution runs.
    #[arg(long, value_delimiter = ',', default_value = "25,35,50,70,100,140,200,280,400")]
    resolutions: Vec<usize>,
    /// Layer count M of the multiplex network.
    #[arg(long, default_value_t = 10)]
    layers: usize,
    /// Cluster count Q (defaults to the number of distinct ground-truth labels).
    #[arg(long)]
    clusters: Option<usize>,
    /// Training pixels per class.
    #[arg(long, default_value_t = 10)]
    per_class: usize,
    #[arg(long, value_enum, default_value = "dv")]
    strategy: StrategyArg,
    /// Superpixel balancing strength.
    #[arg(long, default_value_t = 0.5)]
    balance: f64,
    /// Pixel graph neighbourhood for superpixels (4 or 8).
    #[arg(long, default_value_t = 8)]
    neighborhood: u8,
    /// Pixel similarity kernel width (self-tuned when omitted).
    #[arg(long)]
    kernel_sigma: Option<f64>,
    #[arg(long, default_value_t = 0.7)]
    regroup_ratio: f64,
    /// Centroid distance gate q in pixels.
    #[arg(long, default_value_t = 100.0)]
    spatial_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    interlayer_weight: f64,
    /// Unit-normalize embedding rows before k-means.
    #[arg(long)]
    normalize_rows: bool,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Also run the single-layer spectral and k-means baselines.
    #[arg(long)]
    baselines: bool,
    /// Neighbourhood used to extract boundaries (4 or 8).
    #[arg(long, default_value_t = 4)]
    boundary_neighborhood: u8,
    /// Inject noise before running (single runs), or restrict a sweep.
    #[arg(long, value_enum)]
    noise_model: Option<NoiseModelArg>,
    #[arg(long, value_enum)]
    noise_dist: Option<NoiseDistArg>,
    /// Noise level as a fraction, e.g. 0.05.
    #[arg(long)]
    noise_level: Option<f64>,
    /// Noise levels for sweeps.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15")]
    levels: Vec<f64>,
    /// Trials averaged per sweep cell.
    #[arg(long, default_value_t = 48)]
    trials: usize,
    /// Worker threads (overridden by MGSP_JOBS).
    #[arg(long)]
    jobs: Option<usize>,
    /// Omit timings so repeated runs produce identical reports.
    #[arg(long)]
    canonical: bool,
}

enum Failure {
    Config(Vec<String>),
    Compute(mgsp::Error),
}

impl From<mgsp::Error> for Failure {
    fn from(e: mgsp::Error) -> Self {
        Failure::Compute(e)
    }
}

fn stage(name: &str) -> impl Fn(mgsp::Error) -> Failure + '_ {
    move |e| {
        Failure::Compute(match e {
            e @ mgsp::Error::Stage { .. } => e,
            e => mgsp::Error::Stage {
                stage: name.to_string(),
                source: Box::new(e),
            },
        })
    }
}

fn neighborhood(v: u8) -> Neighborhood {
    if v == 4 {
        Neighborhood::Four
    } else {
        Neighborhood::Eight
    }
}

fn resolve_jobs(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{JOBS_ENV}: expected a positive integer, got `{v}`")),
        },
        Err(_) => match flag {
            Some(0) => Err("--jobs: must be at least 1".into()),
            other => Ok(other),
        },
    }
}

fn validate(mode: Mode, a: &ExperimentArgs) -> Vec<String> {
    let mut errs = Vec::new();
    match &a.cube {
        None => errs.push("--cube: dataset path is required".into()),
        Some(p) if !p.is_file() => errs.push(format!("--cube: `{}` does not exist", p.display())),
        _ => {}
    }
    match &a.labels {
        None if mode.needs_labels() => errs.push("--labels: ground truth is required for this command".into()),
        Some(p) if !p.is_file() => errs.push(format!("--labels: `{}` does not exist", p.display())),
        _ => {}
    }
    if a.superpixels == Some(0) {
        errs.push("--superpixels: must be at least 1".into());
    }
    if mode == Mode::Mrc {
        if a.resolutions.len() < 2 {
            errs.push("--resolutions: need at least two".into());
        }
        if a.resolutions.contains(&0) {
            errs.push("--resolutions: counts must be positive".into());
        }
    }
    if a.layers == 0 {
        errs.push("--layers: must be at least 1".into());
    }
    if a.clusters == Some(0) {
        errs.push("--clusters: must be at least 1".into());
    }
    if mode == Mode::Unsupervised && a.clusters.is_none() && a.labels.is_none() {
        errs.push("--clusters: required when no --labels are given".into());
    }
    if a.per_class == 0 {
        errs.push("--per-class: must be at least 1".into());
    }
    if !(a.balance >= 0.0 && a.balance.is_finite()) {
        errs.push("--balance: must be non-negative".into());
    }
    for (name, v) in [("--neighborhood", a.neighborhood), ("--boundary-neighborhood", a.boundary_neighborhood)] {
        if v != 4 && v != 8 {
            errs.push(format!("{name}: must be 4 or 8"));
        }
    }
    if a.kernel_sigma.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
        errs.push("--kernel-sigma: must be positive".into());
    }
    if !(a.regroup_ratio > 0.0 && a.regroup_ratio <= 1.0) {
        errs.push("--regroup-ratio: must be in (0, 1]".into());
    }
    if !(a.spatial_threshold > 0.0) {
        errs.push("--spatial-threshold: must be positive".into());
    }
    if !(a.interlayer_weight >= 0.0 && a.interlayer_weight.is_finite()) {
        errs.push("--interlayer-weight: must be non-negative".into());
    }
    if !(a.lambda > 0.0 && a.lambda.is_finite()) {
        errs.push("--lambda: must be positive".into());
    }
    if a.epochs == 0 {
        errs.push("--epochs: must be at least 1".into());
    }
    if let Some(l) = a.noise_level {
        if !(l > 0.0 && l.is_finite()) {
            errs.push("--noise-level: must be positive".into());
        }
        if mode != Mode::Noise && a.noise_model.is_none() {
            errs.push("--noise-model: required with --noise-level".into());
        }
    }
    if mode == Mode::Noise {
        if a.levels.is_empty() || a.levels.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            errs.push("--levels: need positive levels".into());
        }
        if a.trials == 0 {
            errs.push("--trials: must be at least 1".into());
        }
    }
    if let Err(e) = resolve_jobs(a.jobs) {
        errs.push(e);
    }
    errs
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = experiment::to_json(value).map_err(stage("write"))?;
    fs::write(path, text).map_err(|e| stage("write")(e.into()))
}

fn write_provenance(out: &Path, command: &str, args: &ExperimentArgs, jobs: Option<usize>) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Recorded<'a> {
        args: &'a ExperimentArgs,
        jobs: Option<usize>,
    }
    let p = Provenance::new(command, args.seed, &Recorded { args, jobs }).map_err(stage("write"))?;
    write_json(&out.join("provenance.json"), &p)
}

fn src_config(a: &ExperimentArgs, superpixels: usize) -> SrcConfig {
    SrcConfig {
        ers: ErsConfig {
            target_count: superpixels,
            balance: a.balance,
            kernel_sigma: a.kernel_sigma,
            neighborhood: neighborhood(a.neighborhood),
        },
        regroup_ratio: a.regroup_ratio,
        mln: mln_config(a),
        spectral: spectral_config(a),
        svm: SvmConfig {
            lambda: a.lambda,
            epochs: a.epochs,
        },
    }
}

fn mln_config(a: &ExperimentArgs) -> MlnConfig {
    MlnConfig {
        layers: a.layers,
        spatial_threshold: a.spatial_threshold,
        interlayer_weight: a.interlayer_weight,
        ..MlnConfig::default()
    }
}

fn spectral_config(a: &ExperimentArgs) -> SpectralConfig {
    SpectralConfig {
        normalize_rows: a.normalize_rows,
        ..SpectralConfig::default()
    }
}

fn distinct_labels(labels: &LabelMap) -> usize {
    let mut seen = labels.labels().to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

fn export_maps(out: &Path, name: &str, map: &LabelMap, nb: Neighborhood) -> Result<(), Failure> {
    io::export_label_map_image(map, out.join(format!("{name}.ppm"))).map_err(stage("write"))?;
    let b = boundary_map(map, nb);
    io::export_mask_pgm(b.height, b.width, &b.values, out.join(format!("{name}_boundaries.pgm"))).map_err(stage("write"))
}

fn run_experiment(mode: Mode, command: &str, a: &ExperimentArgs) -> Result<(), Failure> {
    let errs = validate(mode, a);
    if !errs.is_empty() {
        return Err(Failure::Config(errs));
    }
    let jobs = resolve_jobs(a.jobs).map_err(|e| Failure::Config(vec![e]))?;
    if let Some(j) = jobs {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }

    let mut cube: HsiCube = io::load_cube(a.cube.as_ref().unwrap()).map_err(stage("load"))?;
    let labels: Option<LabelMap> = match &a.labels {
        Some(p) => Some(io::load_labels(p).map_err(stage("load"))?),
        None => None,
    };
    if let Some(l) = &labels {
        if !l.matches_cube(&cube) {
            return Err(Failure::Config(vec![format!(
                "--labels: map is {}x{} but the cube is {}x{}",
                l.height(),
                l.width(),
                cube.height(),
                cube.width()
            )]));
        }
    }
    if mode != Mode::Noise {
        if let (Some(level), Some(model)) = (a.noise_level, a.noise_model) {
            let dist = a.noise_dist.unwrap_or(NoiseDistArg::Gaussian);
            cube = io::inject_noise(&cube, model.into(), dist.into(), level, derive_seed(a.seed, "noise", 0)).map_err(stage("noise"))?;
        }
    }

    let out = a.out.as_path();
    fs::create_dir_all(out).map_err(|e| stage("write")(e.into()))?;
    let superpixels = a.superpixels.unwrap_or(mode.default_superpixels());
    let bnb = neighborhood(a.boundary_neighborhood);

    match mode {
        Mode::Superpixels => {
            let cfg = src_config(a, superpixels).ers;
            let outcome = ers_segment_traced(&build_pixel_graph(&cube, &cfg), &cfg).map_err(stage("superpixels"))?;
            let map = LabelMap::new(cube.height(), cube.width(), outcome.map.segments().iter().map(|&s| s as u16 + 1).collect())
                .map_err(stage("superpixels"))?;
            io::save_labels(&map, out.join("superpixels.hsil")).map_err(stage("write"))?;
            export_maps(out, "superpixels", &map, bnb)?;
            let sizes = outcome.map.sizes();
            write_json(
                &out.join("metrics.json"),
                &serde_json::json!({
                    "schema_version": experiment::REPORT_SCHEMA_VERSION,
                    "superpixels": outcome.map.count(),
                    "min_size": sizes.iter().min(),
                    "max_size": sizes.iter().max(),
                    "four_connected": outcome.map.is_four_connected(),
                    "ers_monotonicity_violations": outcome.monotonicity_violations,
                }),
            )?;
        }
        Mode::Unsupervised | Mode::Boundary => {
            let truth = labels.as_ref();
            let clusters = a.clusters.unwrap_or_else(|| distinct_labels(truth.unwrap()));
            let cfg = UnsupervisedConfig {
                ers: src_config(a, superpixels).ers,
                mln: mln_config(a),
                spectral: spectral_config(a),
                clusters,
                baselines: a.baselines || mode == Mode::Boundary,
                boundary_neighborhood: bnb,
                canonical: a.canonical,
            };
            let run = experiment::run_unsupervised(&cube, truth, &cfg, a.seed)?;
            for (name, map) in &run.maps {
                export_maps(out, &format!("segmentation_{name}"), map, bnb)?;
            }
            if let Some(t) = truth {
                let b = boundary_map(t, bnb);
                io::export_mask_pgm(b.height, b.width, &b.values, out.join("truth_boundaries.pgm")).map_err(stage("write"))?;
            }
            fs::write(out.join("singular_values.csv"), run.report.singular_values_csv()).map_err(|e| stage("write")(e.into()))?;
            write_json(&out.join("metrics.json"), &run.report)?;
        }
        Mode::Src => {
            let labels = labels.as_ref().unwrap();
            let split = TrainTestSplit::stratified(labels, a.per_class, derive_seed(a.seed, "split", 0)).map_err(stage("split"))?;
            let (result, report) = experiment::run_src(&cube, labels, &split, &src_config(a, superpixels), a.seed, a.canonical)?;
            io::save_labels(&result.labels, out.join("classification.hsil")).map_err(stage("write"))?;
            export_maps(out, "classification", &result.labels, bnb)?;
            result.model.save(out.join("model.hsim")).map_err(stage("write"))?;
            write_json(&out.join("metrics.json"), &report)?;
        }
        Mode::Mrc => {
            let labels = labels.as_ref().unwrap();
            let split = TrainTestSplit::stratified(labels, a.per_class, derive_seed(a.seed, "split", 0)).map_err(stage("split"))?;
            let mut cfg = MrcConfig::new(a.resolutions.clone(), a.strategy.into());
            cfg.src = src_config(a, a.resolutions[0]);
            let (result, report) = experiment::run_mrc(&cube, labels, &split, &cfg, a.seed, a.canonical)?;
            io::save_labels(&result.fused, out.join("fused.hsil")).map_err(stage("write"))?;
            export_maps(out, "fused", &result.fused, bnb)?;
            for r in &result.resolutions {
                io::export_label_map_image(&r.result.labels, out.join(format!("resolution_{}.ppm", r.superpixels))).map_err(stage("write"))?;
            }
            write_json(&out.join("metrics.json"), &report)?;
        }
        Mode::Noise => {
            let labels = labels.as_ref().unwrap();
            let cfg = NoiseSweepConfig {
                levels: a.levels.clone(),
                models: match a.noise_model {
                    Some(m) => vec![m.into()],
                    None => vec![NoiseModel::PixelDependent, NoiseModel::GlobalMean],
                },
                distributions: match a.noise_dist {
                    Some(d) => vec![d.into()],
                    None => vec![NoiseDistribution::Uniform, NoiseDistribution::Gaussian],
                },
                trials: a.trials,
                per_class: a.per_class,
                src: src_config(a, superpixels),
                canonical: a.canonical,
            };
            let report = experiment::run_noise_sweep(&cube, labels, &cfg, a.seed)?;
            let mut csv = String::from("model,distribution,level,mean_oa,std_oa\n");
            for r in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    serde_json::to_value(r.model).unwrap().as_str().unwrap_or_default(),
                    serde_json::to_value(r.distribution).unwrap().as_str().unwrap_or_default(),
                    r.level,
                    r.mean_overall_accuracy,
                    r.std_overall_accuracy
                ));
            }
            fs::write(out.join("noise_sweep.csv"), csv).map_err(|e| stage("write")(e.into()))?;
            write_json(&out.join("metrics.json"), &report)?;
        }
    }
    write_provenance(out, command, a, jobs)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Convert(c) => {
            for (flag, p) in [("--raw", &c.raw), ("--header", &c.header)] {
                if !p.is_file() {
                    return Err(Failure::Config(vec![format!("{flag}: `{}` does not exist", p.display())]));
                }
            }
            io::convert_raw(&c.raw, &c.header, &c.output).map_err(stage("convert"))?;
            Ok(())
        }
        Command::Synthesize(s) => {
            let scene = synthetic::generate(&SyntheticConfig {
                seed: s.seed,
                ..SyntheticConfig::default()
            })
            .map_err(stage("synthesize"))?;
            fs::create_dir_all(&s.out).map_err(|e| stage("write")(e.into()))?;
            io::save_cube(&scene.cube, s.out.join("cube.hsic")).map_err(stage("write"))?;
            io::save_labels(&scene.labels, s.out.join("labels.hsil")).map_err(stage("write"))?;
            io::export_label_map_image(&scene.labels, s.out.join("labels.ppm")).map_err(stage("write"))?;
            Ok(())
        }
        Command::Superpixels(a) => run_experiment(Mode::Superpixels, "superpixels", &a),
        Command::Segment(a) => run_experiment(Mode::Unsupervised, "segment", &a),
        Command::Classify(a) => run_experiment(Mode::Src, "classify", &a),
        Command::ClassifyMr(a) => run_experiment(Mode::Mrc, "classify-mr", &a),
        Command::Boundary(a) => run_experiment(Mode::Boundary, "boundary", &a),
        Command::NoiseSweep(a) => run_experiment(Mode::Noise, "noise-sweep", &a),
        Command::Run { mode, args } => run_experiment(mode, "run", &args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errs)) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            match &e {
                mgsp::Error::Stage { stage, source } => eprintln!("error [{stage}]: {source} (code {})", e.code()),
                other => eprintln!("error: {other} (code {})", e.code()),
            }
            ExitCode::from(1)
        }
    }
}
