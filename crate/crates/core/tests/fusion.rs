mod common;

use mgsp::fusion::{
    fuse_majority, laplacian, laplacian_lambda_max, scaled_laplacian_eigenvalues, smoothness, total_variation, von_neumann_entropy,
    weight_dv, weight_mv, weight_va, weight_vn, FusionWeights, Strategy as FusionStrategy,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

#[derive(Debug, Clone)]
struct Instance {
    labels: Vec<Vec<u16>>,
    weights: FusionWeights,
    classes: u16,
}

fn instance_strategy() -> impl Strategy<Value = Instance> {
    (1usize..=6, 1u16..=8, 1usize..40, any::<bool>(), any::<u64>()).prop_map(|(res, classes, pixels, per_pixel, seed)| {
        let mut rng = common::rng(seed);
        let labels = (0..res).map(|_| (0..pixels).map(|_| rng.random_range(0..classes)).collect()).collect();
        // a few exact zeros and repeated values exercise the tie rule
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| match rng.random_range(0..4) {
            0 => 0.0,
            1 => 0.5,
            _ => rng.random_range(0.0..1.0),
        };
        let weights = if per_pixel {
            let mut v: Vec<f64> = (0..res * pixels).map(|_| draw(&mut rng)).collect();
            v[0] = 1.0;
            FusionWeights::per_pixel(FusionStrategy::Dv, res, pixels, v).unwrap()
        } else {
            let mut v: Vec<f64> = (0..res).map(|_| draw(&mut rng)).collect();
            v[0] = 1.0;
            FusionWeights::per_resolution(FusionStrategy::Va, v).unwrap()
        };
        Instance { labels, weights, classes }
    })
}

fn random_graph(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = common::rng(seed);
    let mut a = common::random_symmetric_layer(n, &mut rng);
    // keep at least one edge
    a[(0, 1)] += 0.5;
    a[(1, 0)] += 0.5;
    a
}

fn permute_graph(a: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(perm[i], perm[j])])
}

proptest! {
    #[test]
    fn fusion_matches_exhaustive_scores(inst in instance_strategy()) {
        let refs: Vec<&[u16]> = inst.labels.iter().map(|l| l.as_slice()).collect();
        let fused = fuse_majority(&refs, &inst.weights).unwrap();
        let oracle = common::brute_force_fusion(&inst.labels, |j, p| inst.weights.get(j, p), inst.classes);
        prop_assert_eq!(fused, oracle);
    }

    #[test]
    fn positive_rescaling_keeps_fused_labels(inst in instance_strategy(), factor in 1e-3f64..1e3) {
        let refs: Vec<&[u16]> = inst.labels.iter().map(|l| l.as_slice()).collect();
        let a = fuse_majority(&refs, &inst.weights).unwrap();
        let b = fuse_majority(&refs, &inst.weights.scaled(factor).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unanimous_resolutions_fuse_to_the_common_map(inst in instance_strategy()) {
        let common_map = inst.labels[0].clone();
        let same: Vec<&[u16]> = (0..inst.weights.resolution_count()).map(|_| common_map.as_slice()).collect();
        prop_assert_eq!(fuse_majority(&same, &inst.weights).unwrap(), common_map);
    }

    #[test]
    fn von_neumann_entropy_properties(n in 2usize..9, seed in any::<u64>()) {
        let a = random_graph(n, seed);
        let ev = scaled_laplacian_eigenvalues(&a).unwrap();
        prop_assert!((ev.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(ev.iter().all(|&l| l > -1e-12));
        let h = von_neumann_entropy(&a).unwrap();
        prop_assert!(h >= 0.0);
        let oracle: f64 = common::jacobi_eigenvalues(&(laplacian(&a) / a.sum()))
            .into_iter()
            .filter(|&l| l > 1e-12)
            .map(|l| -l * l.log2())
            .sum();
        prop_assert!((h - oracle.max(0.0)).abs() <= 1e-9);
    }

    #[test]
    fn total_variation_properties(n in 2usize..9, seed in any::<u64>(), c in -3.0f64..3.0) {
        let a = random_graph(n, seed);
        let l = laplacian(&a);
        let lambda = laplacian_lambda_max(&l);
        prop_assert_eq!(total_variation(&l, &vec![0.0; n], lambda), 0.0);
        let constant = vec![c; n];
        prop_assert!((total_variation(&l, &constant, lambda) - c * c * n as f64).abs() <= 1e-10);

        let mut rng = common::rng(seed ^ 7);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let lp = laplacian(&permute_graph(&a, &perm));
        let sp: Vec<f64> = perm.iter().map(|&i| s[i]).collect();
        let tv = total_variation(&l, &s, lambda);
        let tvp = total_variation(&lp, &sp, laplacian_lambda_max(&lp));
        prop_assert!((tv - tvp).abs() <= 1e-8 * (1.0 + tv));
    }

    #[test]
    fn smoothness_ignores_superpixel_order(n in 3usize..10, k in 1usize..5, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let f = DMatrix::from_fn(n, k, |_, _| rng.random_range(0.0..1.0));
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let fp = f.select_rows(&perm);
        let (a, b) = (smoothness(&f).unwrap(), smoothness(&fp).unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a));
    }

    #[test]
    fn decision_value_weights_are_row_maxima(rows in 1usize..20, cols in 1usize..6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let dv: Vec<DMatrix<f64>> = (0..3).map(|_| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.01..1.0))).collect();
        let w = weight_dv(&dv.iter().map(Some).collect::<Vec<_>>()).unwrap();
        for (j, m) in dv.iter().enumerate() {
            for p in 0..rows {
                let oracle = (0..cols).map(|c| m[(p, c)]).fold(f64::MIN, f64::max);
                prop_assert_eq!(w.get(j, p), oracle);
            }
        }
    }
}

#[test]
fn single_edge_pair_is_a_pure_state() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert_eq!(von_neumann_entropy(&a).unwrap(), 0.0);
    let (w, h) = weight_vn(&[&a]).unwrap();
    assert_eq!(h, vec![0.0]);
    assert_eq!(w.get(0, 0), 1.0);
}

#[test]
fn triangle_entropy_closed_form() {
    // L_G = (D - A) / 6 has eigenvalues {0, 1/2, 1/2}
    let a = DMatrix::from_fn(3, 3, |i, j| if i != j { 1.0 } else { 0.0 });
    assert!((von_neumann_entropy(&a).unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn path_graph_total_variation_closed_form() {
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    let l = laplacian(&a);
    let lambda = laplacian_lambda_max(&l);
    assert!((lambda - 3.0).abs() <= 1e-8);
    // L s = (1, 0, -1), so s - L s / 3 = (2/3, 0, -2/3)
    let tv = total_variation(&l, &[1.0, 0.0, -1.0], lambda);
    assert!((tv - 8.0 / 9.0).abs() <= 1e-8);
}

#[test]
fn simple_weight_rules() {
    let mv = weight_mv(3).unwrap();
    assert!((0..3).all(|j| (mv.get(j, 0) - 1.0 / 3.0).abs() < 1e-15));
    let l = [vec![1u16, 2], vec![1, 1], vec![2, 1]];
    let refs: Vec<&[u16]> = l.iter().map(|v| v.as_slice()).collect();
    assert_eq!(fuse_majority(&refs, &mv).unwrap(), vec![1, 1]);

    // a dominant validation accuracy decides
    let a = vec![3u16, 1, 2, 2];
    let b = vec![1u16, 2, 2, 3];
    let va = weight_va(&[0.9, 0.1]).unwrap();
    assert_eq!(fuse_majority(&[&a, &b], &va).unwrap(), a);
    assert!(weight_dv(&[None]).is_err());
}
