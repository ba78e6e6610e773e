//! Small synthetic hyperspectral scene with ground truth, used as the
//! bundled benchmark when no public dataset is available.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{HsiCube, LabelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    /// Labelled classes; one extra unlabelled background material is added.
    pub classes: usize,
    /// Voronoi sites per material.
    pub sites_per_class: usize,
    /// Amplitude of the material-specific spectral features.
    pub contrast: f64,
    /// Std of the per-pixel brightness factor.
    pub brightness_jitter: f64,
    /// Std of the independent per-sample perturbation.
    pub sample_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            height: 48,
            width: 48,
            bands: 40,
            classes: 5,
            sites_per_class: 2,
            contrast: 0.04,
            brightness_jitter: 0.04,
            sample_noise: 0.01,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cube: HsiCube,
    pub labels: LabelMap,
    /// `(classes + 1) x bands`; row 0 is the background material.
    pub endmembers: DMatrix<f64>,
}

/// Smooth endmember spectra: a shared sloped continuum plus a few
/// material-specific Gaussian features of amplitude up to `contrast`.
fn endmembers(materials: usize, bands: usize, contrast: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let base = rng.random_range(0.25..0.4);
    let slope = rng.random_range(-0.15..0.15);
    let mut out = DMatrix::zeros(materials, bands);
    for m in 0..materials {
        let offset = rng.random_range(-0.5..0.5) * contrast;
        let features: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.05..0.2), rng.random_range(-1.0..1.0) * contrast))
            .collect();
        for b in 0..bands {
            let x = b as f64 / (bands.max(2) - 1) as f64;
            let bumps: f64 = features.iter().map(|&(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum();
            out[(m, b)] = (base + offset + slope * (x - 0.5) + bumps).clamp(0.02, 0.95);
        }
    }
    out
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticScene> {
    if cfg.height == 0 || cfg.width == 0 || cfg.bands == 0 {
        return Err(Error::invalid("size", "height, width and bands must be positive"));
    }
    if cfg.classes < 2 || cfg.classes > u16::MAX as usize - 1 {
        return Err(Error::invalid("classes", "need at least two"));
    }
    if cfg.sites_per_class == 0 {
        return Err(Error::invalid("sites_per_class", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let materials = cfg.classes + 1;
    let spectra = endmembers(materials, cfg.bands, cfg.contrast, &mut rng);
    let sites: Vec<(f64, f64, usize)> = (0..materials * cfg.sites_per_class)
        .map(|s| {
            (
                rng.random_range(0.0..cfg.height as f64),
                rng.random_range(0.0..cfg.width as f64),
                s % materials,
            )
        })
        .collect();

    let t = cfg.height * cfg.width;
    let mut material = vec![0usize; t];
    for r in 0..cfg.height {
        for c in 0..cfg.width {
            let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
            material[r * cfg.width + c] = sites
                .iter()
                .min_by(|a, b| {
                    let da = (a.0 - y).powi(2) + (a.1 - x).powi(2);
                    let db = (b.0 - y).powi(2) + (b.1 - x).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap()
                .2;
        }
    }

    let jitter = Normal::new(0.0, cfg.brightness_jitter.max(0.0)).map_err(|e| Error::invalid("brightness_jitter", e.to_string()))?;
    let noise = Normal::new(0.0, cfg.sample_noise.max(0.0)).map_err(|e| Error::invalid("sample_noise", e.to_string()))?;
    let mut values = vec![0f32; cfg.bands * t];
    for p in 0..t {
        let scale = 1.0 + jitter.sample(&mut rng);
        for b in 0..cfg.bands {
            let v = spectra[(material[p], b)] * scale + noise.sample(&mut rng);
            values[b * t + p] = v.max(1e-4) as f32;
        }
    }
    Ok(SyntheticScene {
        cube: HsiCube::new(cfg.bands, cfg.height, cfg.width, values)?,
        labels: LabelMap::new(cfg.height, cfg.width, material.iter().map(|&m| m as u16).collect())?,
        endmembers: spectra,
    })
}

/// Two-class scene split into left and right halves with constant spectra.
pub fn two_halves(height: usize, width: usize, bands: usize) -> Result<(HsiCube, LabelMap)> {
    let cube = HsiCube::from_pixel_fn(bands, height, width, |b, _, c| {
        if c < width / 2 {
            0.2 + 0.01 * b as f32
        } else {
            0.6 - 0.01 * b as f32
        }
    })?;
    let labels = (0..height * width).map(|p| if p % width < width / 2 { 1 } else { 2 }).collect();
    Ok((cube, LabelMap::new(height, width, labels)?))
}
