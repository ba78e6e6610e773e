//! Dense order-4 tensors, mode-n unfolding and products, HOSVD, and the
//! multilayer singular transform.
//!
//! # Index conventions
//!
//! Values are stored row-major over `(i1, i2, i3, i4)`: the flat offset of
//! `[a, b, c, d]` is `((a * I2 + b) * I3 + c) * I4 + d`.
//!
//! The mode-n unfolding has `I_n` rows. Its columns enumerate the remaining
//! indices in ascending cyclic order starting after `n`, with the first of
//! them varying slowest. For mode 2 the column of `(i3, i4, i1)` is
//! `(i3 * I4 + i4) * I1 + i1`; for mode 4 it is `(i1 * I2 + i2) * I3 + i3`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// One of the four tensor modes (1-based in the usual notation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    One,
    Two,
    Three,
    Four,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::One, Mode::Two, Mode::Three, Mode::Four];

    /// Zero-based axis index.
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
            Mode::Four => 3,
        }
    }

    /// Mode from its 1-based number.
    pub fn from_number(n: usize) -> Option<Mode> {
        match n {
            1 => Some(Mode::One),
            2 => Some(Mode::Two),
            3 => Some(Mode::Three),
            4 => Some(Mode::Four),
            _ => None,
        }
    }

    /// The other three axes in unfolding column order (slowest first).
    fn column_axes(self) -> [usize; 3] {
        let k = self.axis();
        [(k + 1) % 4, (k + 2) % 4, (k + 3) % 4]
    }
}

/// Dense real tensor of order four.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor4 {
    dims: [usize; 4],
    values: Vec<f64>,
}

impl DenseTensor4 {
    pub fn new(dims: [usize; 4], values: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::shape("DenseTensor4::new", format!("dimensions must be positive, got {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if values.len() != len {
            return Err(Error::shape(
                "DenseTensor4::new",
                format!("dims {dims:?} need {len} values, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseTensor4::new"));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "dimensions must be positive");
        Self {
            dims,
            values: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    for d in 0..dims[3] {
                        let off = t.offset([a, b, c, d]);
                        t.values[off] = f([a, b, c, d]);
                    }
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 4]) -> usize {
        ((idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]) * self.dims[3] + idx[3]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> f64 {
        self.values[self.offset(idx)]
    }

    pub fn set(&mut self, idx: [usize; 4], v: f64) {
        let off = self.offset(idx);
        self.values[off] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Column index of a multi-index in the unfolding along `mode`.
    fn unfold_column(&self, mode: Mode, idx: [usize; 4]) -> usize {
        let [p, q, r] = mode.column_axes();
        (idx[p] * self.dims[q] + idx[q]) * self.dims[r] + idx[r]
    }

    /// Mode-n matricization (`I_n x` product of the other dims).
    pub fn unfold(&self, mode: Mode) -> DMatrix<f64> {
        let k = mode.axis();
        let cols = self.values.len() / self.dims[k];
        let mut m = DMatrix::zeros(self.dims[k], cols);
        self.for_each_index(|idx, v| {
            m[(idx[k], self.unfold_column(mode, idx))] = v;
        });
        m
    }

    /// Inverse of [`DenseTensor4::unfold`].
    pub fn fold(m: &DMatrix<f64>, mode: Mode, dims: [usize; 4]) -> Result<Self> {
        let k = mode.axis();
        let len: usize = dims.iter().product();
        if dims.contains(&0) || m.nrows() != dims[k] || m.nrows() * m.ncols() != len {
            return Err(Error::shape(
                "fold",
                format!("{}x{} matrix cannot fold to {dims:?} along mode {}", m.nrows(), m.ncols(), k + 1),
            ));
        }
        let mut t = Self::zeros(dims);
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    for d in 0..dims[3] {
                        let idx = [a, b, c, d];
                        let off = t.offset(idx);
                        t.values[off] = m[(idx[k], t.unfold_column(mode, idx))];
                    }
                }
            }
        }
        Ok(t)
    }

    fn for_each_index(&self, mut f: impl FnMut([usize; 4], f64)) {
        let mut off = 0;
        for a in 0..self.dims[0] {
            for b in 0..self.dims[1] {
                for c in 0..self.dims[2] {
                    for d in 0..self.dims[3] {
                        f([a, b, c, d], self.values[off]);
                        off += 1;
                    }
                }
            }
        }
    }

    /// n-mode product `self x_n m`: contracts axis `mode` with the columns of `m`.
    pub fn mode_product(&self, m: &DMatrix<f64>, mode: Mode) -> Result<Self> {
        let k = mode.axis();
        if m.ncols() != self.dims[k] {
            return Err(Error::shape(
                "mode_product",
                format!(
                    "mode {} has size {} but matrix is {}x{}",
                    k + 1,
                    self.dims[k],
                    m.nrows(),
                    m.ncols()
                ),
            ));
        }
        if m.nrows() == 0 {
            return Err(Error::shape("mode_product", "matrix has no rows"));
        }
        let mut dims = self.dims;
        dims[k] = m.nrows();
        let product = m * self.unfold(mode);
        Self::fold(&product, mode, dims)
    }

    /// Frobenius norms of the subtensors obtained by freezing axis `mode`
    /// at each of its indices.
    pub fn slice_norms(&self, mode: Mode) -> Vec<f64> {
        let k = mode.axis();
        let mut acc = vec![0.0; self.dims[k]];
        self.for_each_index(|idx, v| acc[idx[k]] += v * v);
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// Inner product of the subtensors at indices `alpha` and `beta` of axis `mode`.
    pub fn slice_inner(&self, mode: Mode, alpha: usize, beta: usize) -> f64 {
        let u = self.unfold(mode);
        u.row(alpha).dot(&u.row(beta))
    }

    fn permute_axis(&self, mode: Mode, order: &[usize]) -> Self {
        let k = mode.axis();
        let mut out = Self::zeros(self.dims);
        self.for_each_index(|idx, _| {
            let mut src = idx;
            src[k] = order[idx[k]];
            let off = out.offset(idx);
            out.values[off] = self.get(src);
        });
        out
    }
}

/// Full higher-order SVD of an order-4 tensor.
#[derive(Debug, Clone)]
pub struct HosvdResult {
    pub core: DenseTensor4,
    /// Square orthonormal factor per mode; column `i` pairs with index `i` of the core.
    pub factors: [DMatrix<f64>; 4],
    /// Mode-n singular values, each non-increasing.
    pub mode_singular_values: [Vec<f64>; 4],
}

impl HosvdResult {
    /// `core x1 U1 x2 U2 x3 U3 x4 U4`.
    pub fn reconstruct(&self) -> DenseTensor4 {
        let mut t = self.core.clone();
        for mode in Mode::ALL {
            t = t
                .mode_product(&self.factors[mode.axis()], mode)
                .expect("factor shapes match the core");
        }
        t
    }

    pub fn factor(&self, mode: Mode) -> &DMatrix<f64> {
        &self.factors[mode.axis()]
    }
}

/// Exact (untruncated) HOSVD. Each factor holds the left singular vectors of
/// the corresponding unfolding, with columns sign-normalised so their
/// largest-magnitude entry is positive; an all-zero unfolding yields the
/// identity factor.
pub fn hosvd(t: &DenseTensor4) -> Result<HosvdResult> {
    if t.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hosvd"));
    }
    let mut factors: Vec<DMatrix<f64>> = Mode::ALL
        .iter()
        .map(|&mode| linalg::full_left_singular(&t.unfold(mode)).1)
        .collect();

    let mut core = t.clone();
    for mode in Mode::ALL {
        core = core.mode_product(&factors[mode.axis()].transpose(), mode)?;
    }

    // Rounding can swap nearly-equal singular values; reorder so every
    // sequence is non-increasing when measured on the core itself.
    let mut singular: Vec<Vec<f64>> = Vec::with_capacity(4);
    for mode in Mode::ALL {
        let norms = core.slice_norms(mode);
        let mut order: Vec<usize> = (0..norms.len()).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        if order.iter().enumerate().any(|(i, &o)| i != o) {
            core = core.permute_axis(mode, &order);
            factors[mode.axis()] = factors[mode.axis()].select_columns(&order);
        }
        singular.push(order.iter().map(|&i| norms[i]).collect());
    }

    let [f1, f2, f3, f4]: [DMatrix<f64>; 4] = factors.try_into().expect("four factors");
    let [s1, s2, s3, s4]: [Vec<f64>; 4] = singular.try_into().expect("four spectra");
    Ok(HosvdResult {
        core,
        factors: [f1, f2, f3, f4],
        mode_singular_values: [s1, s2, s3, s4],
    })
}

/// Mode-n singular values measured as Frobenius norms of the frozen-index
/// core subtensors.
pub fn mode_singular_values(r: &HosvdResult, mode: Mode) -> Vec<f64> {
    r.core.slice_norms(mode)
}

/// Multilayer singular transform `Fsᵀ · signal · Es` of an `M x N` signal.
pub fn mgst(signal: &DMatrix<f64>, layer_vectors: &DMatrix<f64>, entity_vectors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_transform_shapes("mgst", signal, layer_vectors, entity_vectors)?;
    Ok(layer_vectors.transpose() * signal * entity_vectors)
}

/// Inverse transform `Fs · coeffs · Esᵀ`.
pub fn inverse_mgst(coeffs: &DMatrix<f64>, layer_vectors: &DMatrix<f64>, entity_vectors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_transform_shapes("inverse_mgst", coeffs, layer_vectors, entity_vectors)?;
    Ok(layer_vectors * coeffs * entity_vectors.transpose())
}

fn check_transform_shapes(op: &'static str, s: &DMatrix<f64>, f: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<()> {
    let (m, n) = s.shape();
    if f.shape() != (m, m) || e.shape() != (n, n) {
        return Err(Error::shape(
            op,
            format!(
                "signal {m}x{n} needs layer basis {m}x{m} and entity basis {n}x{n}, got {:?} and {:?}",
                f.shape(),
                e.shape()
            ),
        ));
    }
    Ok(())
}
