//! Hyperspectral cube and label-map containers, their binary file formats,
//! noise injection, and image export.
//!
//! Cube file (`HSIC`): magic `b"HSIC"`, `u32` version (1), `u32` bands,
//! `u32` height, `u32` width, then `bands * height * width` little-endian
//! `f32` samples, band-major then row-major. All integers little-endian.
//!
//! Label file (`HSIL`): magic `b"HSIL"`, `u32` version (1), `u32` height,
//! `u32` width, then `height * width` little-endian `u16` labels, row-major.
//! Label 0 is background / unlabeled.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CUBE_MAGIC: [u8; 4] = *b"HSIC";
pub const LABEL_MAGIC: [u8; 4] = *b"HSIL";
pub const FORMAT_VERSION: u32 = 1;
const CUBE_HEADER_LEN: usize = 20;
const LABEL_HEADER_LEN: usize = 16;

/// A `bands x height x width` reflectance cube stored band-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    bands: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl HsiCube {
    pub fn new(bands: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if bands == 0 || height == 0 || width == 0 {
            return Err(Error::shape("HsiCube::new", format!("dimensions must be positive, got {bands}x{height}x{width}")));
        }
        if values.len() != bands * height * width {
            return Err(Error::shape(
                "HsiCube::new",
                format!("{bands}x{height}x{width} needs {} values, got {}", bands * height * width, values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(pos));
        }
        Ok(Self {
            bands,
            height,
            width,
            values,
        })
    }

    /// Builds a cube from per-pixel spectra given in row-major pixel order.
    pub fn from_pixel_fn(bands: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let mut values = vec![0.0; bands * height * width];
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    values[(b * height + r) * width + c] = f(b, r, c);
                }
            }
        }
        Self::new(bands, height, width, values)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, band: usize, pixel: usize) -> f32 {
        self.values[band * self.height * self.width + pixel]
    }

    /// Copy of the samples in pixel-major order (`pixel * bands + band`).
    pub fn pixel_major(&self) -> Vec<f32> {
        let t = self.pixel_count();
        let mut out = vec![0.0; self.values.len()];
        for b in 0..self.bands {
            let band = &self.values[b * t..(b + 1) * t];
            for (p, v) in band.iter().enumerate() {
                out[p * self.bands + b] = *v;
            }
        }
        out
    }

    /// Pixels whose spectrum is identically zero. Such samples carry no
    /// information and are excluded from evaluation.
    pub fn discard_mask(&self) -> Vec<bool> {
        let t = self.pixel_count();
        let mut mask = vec![true; t];
        for b in 0..self.bands {
            for (p, m) in mask.iter_mut().enumerate() {
                if *m && self.values[b * t + p] != 0.0 {
                    *m = false;
                }
            }
        }
        mask
    }
}

/// Per-pixel class labels; 0 marks unlabeled background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(Error::shape(
                "LabelMap::new",
                format!("{height}x{width} map needs {} labels, got {}", height * width, labels.len()),
            ));
        }
        Ok(Self { height, width, labels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u16 {
        self.labels[r * self.width + c]
    }

    /// Distinct nonzero labels, ascending.
    pub fn classes(&self) -> Vec<u16> {
        let mut seen = std::collections::BTreeSet::new();
        seen.extend(self.labels.iter().copied().filter(|&l| l != 0));
        seen.into_iter().collect()
    }

    pub fn matches_cube(&self, cube: &HsiCube) -> bool {
        self.height == cube.height && self.width == cube.width
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

fn check_header(bytes: &[u8], magic: [u8; 4], header_len: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: header_len,
            found: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if found != magic {
        return Err(Error::BadMagic { expected: magic, found });
    }
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            expected: header_len,
            found: bytes.len(),
        });
    }
    let version = read_u32(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(())
}

/// Parses an `HSIC` byte buffer.
pub fn decode_cube(bytes: &[u8]) -> Result<HsiCube> {
    check_header(bytes, CUBE_MAGIC, CUBE_HEADER_LEN)?;
    let bands = read_u32(bytes, 8) as usize;
    let height = read_u32(bytes, 12) as usize;
    let width = read_u32(bytes, 16) as usize;
    let count = bands
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .ok_or_else(|| Error::shape("decode_cube", "header dimensions overflow"))?;
    let expected = CUBE_HEADER_LEN + count * 4;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let values: Vec<f32> = bytes[CUBE_HEADER_LEN..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
        .collect();
    HsiCube::new(bands, height, width, values)
}

pub fn encode_cube(cube: &HsiCube) -> Vec<u8> {
    let mut out = Vec::with_capacity(CUBE_HEADER_LEN + cube.values.len() * 4);
    out.extend_from_slice(&CUBE_MAGIC);
    for v in [FORMAT_VERSION, cube.bands as u32, cube.height as u32, cube.width as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &cube.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    decode_cube(&fs::read(path)?)
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_cube(cube))?;
    Ok(())
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelMap> {
    check_header(bytes, LABEL_MAGIC, LABEL_HEADER_LEN)?;
    let height = read_u32(bytes, 8) as usize;
    let width = read_u32(bytes, 12) as usize;
    let expected = LABEL_HEADER_LEN + height * width * 2;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let labels = bytes[LABEL_HEADER_LEN..expected]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    LabelMap::new(height, width, labels)
}

pub fn encode_labels(labels: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(LABEL_HEADER_LEN + labels.labels.len() * 2);
    out.extend_from_slice(&LABEL_MAGIC);
    for v in [FORMAT_VERSION, labels.height as u32, labels.width as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for l in &labels.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    decode_labels(&fs::read(path)?)
}

pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_labels(labels))?;
    Ok(())
}

/// How the noise standard deviation is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// std = level * |sample value|.
    PixelDependent,
    /// std = level * |mean of all samples|.
    GlobalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDistribution {
    /// Uniform on `[-sqrt(3) std, sqrt(3) std]`, which has variance `std^2`.
    Uniform,
    Gaussian,
}

/// Adds zero-mean noise to every sample. Deterministic for a given seed.
pub fn inject_noise(cube: &HsiCube, model: NoiseModel, dist: NoiseDistribution, level: f64, seed: u64) -> Result<HsiCube> {
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::invalid("level", format!("noise level must be positive and finite, got {level}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let global_std = match model {
        NoiseModel::GlobalMean => {
            let mean = cube.values.iter().map(|&v| v as f64).sum::<f64>() / cube.values.len() as f64;
            level * mean.abs()
        }
        NoiseModel::PixelDependent => 0.0,
    };
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let half_width = 3f64.sqrt();
    let values = cube
        .values
        .iter()
        .map(|&v| {
            let std = match model {
                NoiseModel::PixelDependent => level * (v as f64).abs(),
                NoiseModel::GlobalMean => global_std,
            };
            // always draw so the stream does not depend on the data
            let z = match dist {
                NoiseDistribution::Gaussian => unit_normal.sample(&mut rng),
                NoiseDistribution::Uniform => rng.random_range(-half_width..=half_width),
            };
            (v as f64 + std * z) as f32
        })
        .collect();
    HsiCube::new(cube.bands, cube.height, cube.width, values)
}

/// Palette colour for a label: black for 0, otherwise the fully saturated
/// hue `(label * 137) mod 360` degrees.
pub fn label_color(label: u16) -> [u8; 3] {
    if label == 0 {
        return [0, 0, 0];
    }
    let hue = ((label as u64 * 137) % 360) as f64;
    let sector = hue / 60.0;
    let x = 1.0 - (sector % 2.0 - 1.0).abs();
    let (r, g, b) = match sector as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |v: f64| (v * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// Renders a label map as binary PPM (P6).
pub fn encode_label_ppm(labels: &LabelMap) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", labels.width, labels.height).into_bytes();
    for &l in &labels.labels {
        out.extend_from_slice(&label_color(l));
    }
    out
}

pub fn export_label_map_image(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_label_ppm(labels))?;
    Ok(())
}

/// Writes a binary mask as PGM (P5): set pixels white, others black.
pub fn export_mask_pgm(height: usize, width: usize, mask: &[bool], path: impl AsRef<Path>) -> Result<()> {
    if mask.len() != height * width {
        return Err(Error::shape("export_mask_pgm", "mask length does not match dimensions"));
    }
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    let body: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    f.write_all(&body)?;
    Ok(())
}

/// Sample encoding of a headerless raw cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawDataType {
    U8,
    U16,
    I16,
    I32,
    F32,
    F64,
}

impl RawDataType {
    fn size(self) -> usize {
        match self {
            RawDataType::U8 => 1,
            RawDataType::U16 | RawDataType::I16 => 2,
            RawDataType::I32 | RawDataType::F32 => 4,
            RawDataType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    Little,
    Big,
}

/// Band interleave of a raw cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    /// band, row, column
    Bsq,
    /// row, band, column
    Bil,
    /// row, column, band
    Bip,
}

/// JSON sidecar describing a headerless raw cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub data_type: RawDataType,
    pub byte_order: ByteOrder,
    pub interleave: Interleave,
}

fn decode_sample(chunk: &[u8], ty: RawDataType, order: ByteOrder) -> f64 {
    macro_rules! num {
        ($t:ty) => {{
            let arr = chunk.try_into().expect("sample width");
            (match order {
                ByteOrder::Little => <$t>::from_le_bytes(arr),
                ByteOrder::Big => <$t>::from_be_bytes(arr),
            }) as f64
        }};
    }
    match ty {
        RawDataType::U8 => chunk[0] as f64,
        RawDataType::U16 => num!(u16),
        RawDataType::I16 => num!(i16),
        RawDataType::I32 => num!(i32),
        RawDataType::F32 => num!(f32),
        RawDataType::F64 => num!(f64),
    }
}

/// Converts a raw band-interleaved buffer into a cube.
pub fn decode_raw(bytes: &[u8], header: &RawHeader) -> Result<HsiCube> {
    let (k, h, w) = (header.bands, header.height, header.width);
    let size = header.data_type.size();
    let expected = k * h * w * size;
    if bytes.len() != expected {
        return Err(Error::shape(
            "decode_raw",
            format!("declared {k}x{h}x{w} {:?} needs {expected} bytes, file has {}", header.data_type, bytes.len()),
        ));
    }
    let mut values = vec![0f32; k * h * w];
    for (n, chunk) in bytes.chunks_exact(size).enumerate() {
        let (b, r, c) = match header.interleave {
            Interleave::Bsq => (n / (h * w), (n / w) % h, n % w),
            Interleave::Bil => ((n / w) % k, n / (k * w), n % w),
            Interleave::Bip => (n % k, n / (w * k), (n / k) % w),
        };
        values[(b * h + r) * w + c] = decode_sample(chunk, header.data_type, header.byte_order) as f32;
    }
    HsiCube::new(k, h, w, values)
}

/// Reads a raw cube plus its JSON sidecar and writes an `HSIC` file.
pub fn convert_raw(raw_path: impl AsRef<Path>, header_path: impl AsRef<Path>, out_path: impl AsRef<Path>) -> Result<HsiCube> {
    let header: RawHeader = serde_json::from_slice(&fs::read(header_path)?)?;
    let cube = decode_raw(&fs::read(raw_path)?, &header)?;
    save_cube(&cube, out_path)?;
    Ok(cube)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cube() -> HsiCube {
        HsiCube::from_pixel_fn(3, 2, 2, |b, r, c| (b * 10 + r * 2 + c) as f32 * 0.37 - 1.0).unwrap()
    }

    #[test]
    fn cube_round_trip() {
        let cube = small_cube();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.hsic");
        save_cube(&cube, &path).unwrap();
        assert_eq!(load_cube(&path).unwrap(), cube);
    }

    #[test]
    fn payload_length_follows_header() {
        let (k, h, w) = (200usize, 145usize, 145usize);
        let mut bytes = CUBE_MAGIC.to_vec();
        for v in [1u32, k as u32, h as u32, w as u32] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        match decode_cube(&bytes).unwrap_err() {
            Error::Truncated { expected, .. } => assert_eq!(expected - 20, 200 * 145 * 145 * 4),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_payload_is_truncated() {
        let mut bytes = CUBE_MAGIC.to_vec();
        for v in [1u32, 1, 1, 1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(decode_cube(&bytes), Err(Error::Truncated { expected: 24, found: 20 })));
    }

    #[test]
    fn distinct_error_codes() {
        let mut bad_magic = encode_cube(&small_cube());
        bad_magic[0] = b'X';
        let e1 = decode_cube(&bad_magic).unwrap_err();
        let mut nan = encode_cube(&small_cube());
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        let e2 = decode_cube(&nan).unwrap_err();
        let e3 = decode_cube(&encode_cube(&small_cube())[..30]).unwrap_err();
        assert!(matches!(e1, Error::BadMagic { .. }));
        assert!(matches!(e2, Error::NonFiniteSample(0)));
        assert!(matches!(e3, Error::Truncated { .. }));
        let codes = [e1.code(), e2.code(), e3.code()];
        assert!(codes[0] != codes[1] && codes[1] != codes[2] && codes[0] != codes[2]);
        let mut v2 = encode_cube(&small_cube());
        v2[4] = 2;
        assert!(matches!(decode_cube(&v2), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn labels_round_trip() {
        let map = LabelMap::new(2, 3, vec![0, 1, 2, 3, 65535, 7]).unwrap();
        assert_eq!(decode_labels(&encode_labels(&map)).unwrap(), map);
        assert_eq!(map.classes(), vec![1, 2, 3, 7, 65535]);
    }

    #[test]
    fn tiny_noise_leaves_cube_unchanged() {
        let cube = small_cube();
        for model in [NoiseModel::PixelDependent, NoiseModel::GlobalMean] {
            for dist in [NoiseDistribution::Uniform, NoiseDistribution::Gaussian] {
                assert_eq!(inject_noise(&cube, model, dist, 1e-12, 3).unwrap(), cube);
            }
        }
    }

    #[test]
    fn zero_pixel_is_untouched_by_pixel_noise() {
        let cube = HsiCube::new(1, 1, 2, vec![0.0, 5.0]).unwrap();
        let noisy = inject_noise(&cube, NoiseModel::PixelDependent, NoiseDistribution::Gaussian, 0.15, 1).unwrap();
        assert_eq!(noisy.values()[0], 0.0);
        assert_ne!(noisy.values()[1], 5.0);
    }

    #[test]
    fn noise_is_seed_reproducible() {
        let cube = small_cube();
        let a = inject_noise(&cube, NoiseModel::GlobalMean, NoiseDistribution::Uniform, 0.1, 9).unwrap();
        let b = inject_noise(&cube, NoiseModel::GlobalMean, NoiseDistribution::Uniform, 0.1, 9).unwrap();
        let c = inject_noise(&cube, NoiseModel::GlobalMean, NoiseDistribution::Uniform, 0.1, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn non_positive_level_rejected() {
        let cube = small_cube();
        assert!(inject_noise(&cube, NoiseModel::GlobalMean, NoiseDistribution::Uniform, 0.0, 1).is_err());
        assert!(inject_noise(&cube, NoiseModel::GlobalMean, NoiseDistribution::Uniform, -0.1, 1).is_err());
    }

    #[test]
    fn palette() {
        assert_eq!(label_color(0), [0, 0, 0]);
        let (a, b) = (label_color(1), label_color(2));
        assert!(a.iter().zip(&b).all(|(x, y)| x != y), "{a:?} {b:?}");
        // hue 137 deg: between green and cyan
        assert_eq!(a, [0, 255, 72]);
    }

    #[test]
    fn ppm_output() {
        let black = LabelMap::new(1, 1, vec![0]).unwrap();
        assert_eq!(encode_label_ppm(&black), b"P6\n1 1\n255\n\0\0\0".to_vec());
        let two = LabelMap::new(1, 2, vec![1, 1]).unwrap();
        let bytes = encode_label_ppm(&two);
        let body = &bytes[bytes.len() - 6..];
        assert_eq!(body[..3], body[3..]);
        assert_ne!(body[..3], [0, 0, 0]);
    }

    #[test]
    fn raw_bsq_round_trip() {
        let header = RawHeader {
            bands: 2,
            height: 2,
            width: 2,
            data_type: RawDataType::F32,
            byte_order: ByteOrder::Little,
            interleave: Interleave::Bsq,
        };
        let samples: Vec<f32> = (0..8).map(|v| v as f32 * 1.25).collect();
        let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
        let cube = decode_raw(&bytes, &header).unwrap();
        assert_eq!(cube.values(), samples.as_slice());
        let dir = tempfile::tempdir().unwrap();
        let (raw, json, out) = (dir.path().join("a.raw"), dir.path().join("a.json"), dir.path().join("a.hsic"));
        fs::write(&raw, &bytes).unwrap();
        fs::write(&json, serde_json::to_vec(&header).unwrap()).unwrap();
        convert_raw(&raw, &json, &out).unwrap();
        assert_eq!(load_cube(&out).unwrap(), cube);
    }

    #[test]
    fn raw_bip_reordering() {
        // 2 bands, 1 row, 2 columns; BIP stores (c0:b0,b1), (c1:b0,b1)
        let header = RawHeader {
            bands: 2,
            height: 1,
            width: 2,
            data_type: RawDataType::I16,
            byte_order: ByteOrder::Big,
            interleave: Interleave::Bip,
        };
        let bytes: Vec<u8> = [10i16, 20, 11, 21].iter().flat_map(|v| v.to_be_bytes()).collect();
        let cube = decode_raw(&bytes, &header).unwrap();
        // band-major: band0 = (10, 11), band1 = (20, 21)
        assert_eq!(cube.values(), &[10.0, 11.0, 20.0, 21.0]);
        let bil = RawHeader { interleave: Interleave::Bil, ..header.clone() };
        let bytes: Vec<u8> = [10i16, 11, 20, 21].iter().flat_map(|v| v.to_be_bytes()).collect();
        assert_eq!(decode_raw(&bytes, &bil).unwrap().values(), &[10.0, 11.0, 20.0, 21.0]);
    }

    #[test]
    fn raw_size_mismatch() {
        let header = RawHeader {
            bands: 3,
            height: 2,
            width: 2,
            data_type: RawDataType::F32,
            byte_order: ByteOrder::Little,
            interleave: Interleave::Bsq,
        };
        assert!(decode_raw(&[0u8; 32], &header).is_err());
    }

    #[test]
    fn discard_mask_flags_all_zero_spectra() {
        let cube = HsiCube::new(2, 1, 3, vec![0.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(cube.discard_mask(), vec![true, false, false]);
    }
}
