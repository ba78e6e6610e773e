//! Small dense linear-algebra helpers shared by the tensor, graph and
//! clustering code. Decompositions are delegated to `nalgebra`; this module
//! adds deterministic ordering and the sign convention used crate-wide.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

/// Flips each column so that its largest-magnitude entry is positive.
/// Ties in magnitude resolve to the lowest row index.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if best_abs > 0.0 && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenpairs ordered by
/// descending eigenvalue (stable with respect to the solver's order).
pub fn symmetric_eigen_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), m);
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    fix_column_signs(&mut vectors);
    (values, vectors)
}

/// Left singular vectors of `a` as a full square orthonormal basis together
/// with the singular values (padded with zeros to `a.nrows()`), descending.
pub fn full_left_singular(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let rows = a.nrows();
    if a.iter().all(|v| *v == 0.0) {
        return (vec![0.0; rows], DMatrix::identity(rows, rows));
    }
    let svd = SVD::new(a.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let mut values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let thin = u.select_columns(&order);
    let mut full = complete_basis(&thin);
    values.resize(rows, 0.0);
    fix_column_signs(&mut full);
    (values, full)
}

/// Extends orthonormal columns to a square orthonormal basis by
/// Gram-Schmidt against the canonical unit vectors.
pub fn complete_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    if q.ncols() >= n {
        return q.columns(0, n).into_owned();
    }
    let mut basis: Vec<nalgebra::DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    while basis.len() < n {
        let mut best: Option<nalgebra::DVector<f64>> = None;
        let mut best_norm = 0.0;
        for e in 0..n {
            let mut v = nalgebra::DVector::zeros(n);
            v[e] = 1.0;
            // two passes for numerical orthogonality
            for _ in 0..2 {
                for b in &basis {
                    let d = b.dot(&v);
                    v.axpy(-d, b, 1.0);
                }
            }
            let norm = v.norm();
            if norm > best_norm + 1e-12 {
                best_norm = norm;
                best = Some(v);
            }
        }
        let v = best.expect("canonical vectors span the space");
        basis.push(v / best_norm);
    }
    DMatrix::from_columns(&basis)
}

/// Squared Euclidean distance between two rows of (possibly different) matrices.
#[inline]
pub fn row_sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..a.ncols() {
        let d = a[(i, k)] - b[(j, k)];
        s += d * d;
    }
    s
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration. Converges when the Rayleigh quotient changes by less than `tol`
/// (relative).
pub fn power_iteration_max(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Start away from the constant vector, which is a Laplacian null vector.
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs().max(1e-300) {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let mut m = DMatrix::from_row_slice(2, 2, &[0.1, -0.2, -0.9, 0.1]);
        fix_column_signs(&mut m);
        assert_eq!(m[(1, 0)], 0.9);
        assert_eq!(m[(0, 1)], 0.2);
    }

    #[test]
    fn complete_basis_is_orthonormal() {
        let q = DMatrix::from_column_slice(3, 1, &[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0]);
        let full = complete_basis(&q);
        let gram = full.transpose() * &full;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_eigen() {
        let l = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        let lmax = power_iteration_max(&l, 1e-12, 10_000);
        assert!((lmax - 3.0).abs() < 1e-9);
    }
}
