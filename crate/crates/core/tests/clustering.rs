mod common;

use mgsp::cluster::{
    graph_spectral_clustering, kmeans, kmeans_traced, mln_spectral_clustering, regroup, select_p_largest_gap, ClusterAssignment,
    KMeansConfig,
};
use mgsp::experiment::{cumulative_energy, run_unsupervised, UnsupervisedConfig};
use mgsp::mln::MlnAdjacency;
use mgsp::synthetic::{generate, SyntheticConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn points_strategy() -> impl Strategy<Value = (DMatrix<f64>, usize)> {
    (2usize..30, 1usize..4).prop_flat_map(|(n, d)| {
        (prop::collection::vec(-10.0f64..10.0, n * d), 1..=n).prop_map(move |(v, k)| (DMatrix::from_row_slice(n, d, &v), k))
    })
}

/// Multiplex instance made of `sizes.len()` disconnected complete blocks.
fn disconnected_blocks(sizes: &[usize], m: usize, seed: u64) -> (MlnAdjacency, Vec<usize>) {
    let mut rng = common::rng(seed);
    let truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    let n = truth.len();
    let layers = (0..m)
        .map(|_| {
            let weights: Vec<f64> = sizes.iter().map(|_| rng.random_range(0.8..1.0)).collect();
            DMatrix::from_fn(n, n, |i, j| if i != j && truth[i] == truth[j] { weights[truth[i]] } else { 0.0 })
        })
        .collect();
    (MlnAdjacency::new(layers, 1.0).unwrap(), truth)
}

fn permuted(adj: &MlnAdjacency, perm: &[usize]) -> MlnAdjacency {
    let n = perm.len();
    let layers = (0..adj.layer_count())
        .map(|a| {
            let w = adj.intralayer(a);
            DMatrix::from_fn(n, n, |i, j| w[(perm[i], perm[j])])
        })
        .collect();
    MlnAdjacency::new(layers, adj.interlayer_weight()).unwrap()
}

proptest! {
    #[test]
    fn kmeans_sse_never_increases((points, k) in points_strategy(), seed in any::<u64>()) {
        let out = kmeans_traced(&points, k, seed, &KMeansConfig::default()).unwrap();
        for w in out.sse_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        prop_assert_eq!(out.assignment.group_count(), k);
        prop_assert!(out.assignment.group_sizes().iter().all(|&s| s > 0));
        let again = kmeans(&points, k, seed, &KMeansConfig::default()).unwrap();
        prop_assert_eq!(again, out.assignment);
    }

    #[test]
    fn disconnected_components_are_recovered(
        sizes in prop::collection::vec(3usize..6, 2..5),
        m in 1usize..4,
        seed in any::<u64>(),
    ) {
        let (adj, truth) = disconnected_blocks(&sizes, m, seed);
        let out = mln_spectral_clustering(&adj, sizes.len(), seed).unwrap();
        prop_assert!(common::same_partition(out.assignment.group_of_item(), &truth));
    }

    #[test]
    fn relabelling_entities_relabels_clusters(
        sizes in prop::collection::vec(3usize..6, 2..4),
        seed in any::<u64>(),
    ) {
        let (adj, _) = disconnected_blocks(&sizes, 2, seed);
        let n = adj.entity_count();
        let mut rng = common::rng(seed ^ 1);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let base = mln_spectral_clustering(&adj, sizes.len(), seed).unwrap();
        let moved = mln_spectral_clustering(&permuted(&adj, &perm), sizes.len(), seed).unwrap();
        // entity i of the permuted instance is entity perm[i] of the original
        let pulled: Vec<usize> = (0..n).map(|i| base.assignment.group_of_item()[perm[i]]).collect();
        prop_assert!(common::same_partition(moved.assignment.group_of_item(), &pulled));
    }

    #[test]
    fn largest_gap_stays_in_range(mut values in prop::collection::vec(0.0f64..100.0, 1..80), min_p in 1usize..5) {
        values.sort_by(|a, b| b.total_cmp(a));
        let p = select_p_largest_gap(&values, min_p);
        if values.len() < min_p + 1 {
            prop_assert_eq!(p, values.len());
        } else {
            let hi = 50.min(values.len() - 1);
            prop_assert!(p >= min_p && p <= hi.max(min_p));
            let gap = |i: usize| values[i - 1] - values[i];
            for i in min_p..=hi {
                prop_assert!(gap(i) <= gap(p));
            }
        }
    }

    #[test]
    fn regroup_is_a_pixel_weighted_mean(
        n in 1usize..10,
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let d = rng.random_range(1..=n);
        let mut groups: Vec<usize> = (0..n).map(|i| if i < d { i } else { rng.random_range(0..d) }).collect();
        groups.rotate_left(rng.random_range(0..n));
        let features = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let counts: Vec<usize> = (0..n).map(|_| rng.random_range(1..20)).collect();
        let r = regroup(&features, &counts, &ClusterAssignment::new(groups.clone(), d).unwrap()).unwrap();
        for g in 0..d {
            let members: Vec<usize> = (0..n).filter(|&i| groups[i] == g).collect();
            let total: usize = members.iter().map(|&i| counts[i]).sum();
            prop_assert_eq!(r.group_pixels[g], total);
            for c in 0..3 {
                let mean = members.iter().map(|&i| features[(i, c)] * counts[i] as f64).sum::<f64>() / total as f64;
                prop_assert!((r.features[(g, c)] - mean).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn one_dimensional_groups_match_exhaustive_sse() {
    let values = [0.0, 0.1, 10.0, 10.1];
    let points = DMatrix::from_column_slice(4, 1, &values);
    let sse = |labels: &[usize]| {
        (0..2)
            .map(|g| {
                let m: Vec<f64> = (0..4).filter(|&i| labels[i] == g).map(|i| values[i]).collect();
                if m.is_empty() {
                    return f64::INFINITY;
                }
                let mean = m.iter().sum::<f64>() / m.len() as f64;
                m.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
    };
    let best = (0u32..16)
        .map(|mask| (0..4).map(|i| ((mask >> i) & 1) as usize).collect::<Vec<_>>())
        .min_by(|a, b| sse(a).total_cmp(&sse(b)))
        .unwrap();
    for seed in 0..20 {
        let got = kmeans(&points, 2, seed, &KMeansConfig::default()).unwrap();
        assert!(common::same_partition(got.group_of_item(), &best));
    }
}

#[test]
fn six_node_block_model_minimises_normalized_cut() {
    let mut rng = common::rng(77);
    let (adj, _) = common::sbm(6, 3, 2, 1.0, 0.01, &mut rng);
    let total: DMatrix<f64> = (0..3).map(|a| adj.intralayer(a).clone()).fold(DMatrix::zeros(6, 6), |acc, w| acc + w);
    let ncut = |side: &[usize]| {
        let (mut cut, mut vol) = (0.0, [0.0; 2]);
        for i in 0..6 {
            for j in 0..6 {
                vol[side[i]] += total[(i, j)];
                if side[i] != side[j] {
                    cut += total[(i, j)];
                }
            }
        }
        cut / 2.0 * (1.0 / vol[0] + 1.0 / vol[1])
    };
    let best = (1u32..32)
        .map(|mask| (0..6).map(|i| ((mask >> i) & 1) as usize).collect::<Vec<_>>())
        .min_by(|a, b| ncut(a).total_cmp(&ncut(b)))
        .unwrap();
    for seed in 0..10 {
        let got = mln_spectral_clustering(&adj, 2, seed).unwrap();
        assert!(common::same_partition(got.assignment.group_of_item(), &best));
    }
}

#[test]
fn block_diagonal_graph_splits_into_blocks() {
    let w = DMatrix::from_fn(6, 6, |i, j| if i != j && i / 3 == j / 3 { 1.0 } else { 0.0 });
    let out = graph_spectral_clustering(&w, 2, 3).unwrap();
    assert!(common::same_partition(out.assignment.group_of_item(), &[0, 0, 0, 1, 1, 1]));
}

/// Top-10 energy of the multiplex entity spectrum against the single-layer
/// graph on the bundled synthetic scene.
///
/// Known failure: the interlayer coupling adds `M (M - 1) c^2` to every
/// squared entity singular value, which spreads energy over the whole
/// spectrum, while the single-layer graph is dominated by its Perron value.
#[test]
#[ignore = "fails on the synthetic scene; see the doc comment"]
fn multiplex_spectrum_is_more_concentrated() {
    let scene = generate(&SyntheticConfig::default()).unwrap();
    let cfg = UnsupervisedConfig::new(100, 6);
    let run = run_unsupervised(&scene.cube, None, &cfg, 3).unwrap();
    let mln = cumulative_energy(&run.report.mln_singular_values, 10);
    let single = cumulative_energy(&run.report.single_layer_singular_values, 10);
    assert!(mln >= single, "multiplex {mln:.4} < single-layer {single:.4}");
}
