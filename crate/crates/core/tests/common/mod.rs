//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use mgsp::mln::MlnAdjacency;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Singular values (descending) by one-sided Jacobi rotations on the columns
/// of `a`, transposed first when it is wide.
pub fn jacobi_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = a.shape();
    // columns as plain vectors
    let mut cs: Vec<Vec<f64>> = if rows >= cols {
        (0..cols).map(|j| (0..rows).map(|i| a[(i, j)]).collect()).collect()
    } else {
        (0..rows).map(|i| (0..cols).map(|j| a[(i, j)]).collect()).collect()
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cs.len() {
            for q in (p + 1)..cs.len() {
                let alpha = dot(&cs[p], &cs[p]);
                let beta = dot(&cs[q], &cs[q]);
                let gamma = dot(&cs[p], &cs[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cs.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cs.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi, descending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn random_symmetric_layer(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

pub fn random_mln(n: usize, m: usize, rng: &mut impl Rng) -> MlnAdjacency {
    MlnAdjacency::new((0..m).map(|_| random_symmetric_layer(n, rng)).collect(), 1.0).unwrap()
}

/// Expansion written straight from the multiplex rule, independent of the
/// library's `entry`.
pub fn hand_expand(layers: &[DMatrix<f64>], c: f64) -> Vec<f64> {
    let m = layers.len();
    let n = layers[0].nrows();
    let mut out = vec![0.0; m * n * m * n];
    for a in 0..m {
        for i in 0..n {
            for b in 0..m {
                for j in 0..n {
                    let off = ((a * n + i) * m + b) * n + j;
                    out[off] = if a == b {
                        layers[a][(i, j)]
                    } else if i == j {
                        c
                    } else {
                        0.0
                    };
                }
            }
        }
    }
    out
}

/// Agreement between two labelings under the best relabeling of `b`
/// (exhaustive over permutations; fine for up to ~8 groups).
pub fn best_permutation_agreement(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().map_or(0, |v| v + 1);
    let kb = b.iter().max().map_or(0, |v| v + 1);
    let k = ka.max(kb);
    let mut counts = vec![vec![0usize; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        counts[x][y] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let s: usize = (0..k).map(|i| counts[i][p[i]]).sum();
        best = best.max(s);
    });
    best as f64 / a.len() as f64
}

fn permute(p: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        f(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, f);
        p.swap(start, i);
    }
}

/// True when two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let pairs: BTreeSet<(usize, usize)> = a.iter().copied().zip(b.iter().copied()).collect();
    let left: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
    let right: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    pairs.len() == left.len() && pairs.len() == right.len()
}

/// Multiplex stochastic block model with `n` entities split round-robin into
/// `q` blocks.
pub fn sbm(n: usize, m: usize, q: usize, in_block: f64, cross: f64, rng: &mut impl Rng) -> (MlnAdjacency, Vec<usize>) {
    let truth: Vec<usize> = (0..n).map(|i| i % q).collect();
    let layers = (0..m)
        .map(|_| {
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let base = if truth[i] == truth[j] { in_block } else { cross };
                    let v = (base * rng.random_range(0.8..1.2)).min(1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            w
        })
        .collect();
    (MlnAdjacency::new(layers, 1.0).unwrap(), truth)
}

/// Weighted vote by direct enumeration of every candidate class.
pub fn brute_force_fusion(labels: &[Vec<u16>], weight: impl Fn(usize, usize) -> f64, classes: u16) -> Vec<u16> {
    let pixels = labels[0].len();
    (0..pixels)
        .map(|p| {
            let mut best: Option<(u16, f64)> = None;
            for c in 0..classes {
                let votes: Vec<usize> = (0..labels.len()).filter(|&j| labels[j][p] == c).collect();
                if votes.is_empty() {
                    continue;
                }
                let score: f64 = votes.iter().map(|&j| weight(j, p)).sum();
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((c, score));
                }
            }
            best.unwrap().0
        })
        .collect()
}
