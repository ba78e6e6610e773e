mod common;

use mgsp::classify::{mln_src, predict, prepare_resolution, train_ovr, SrcConfig, SvmConfig, TrainTestSplit};
use mgsp::metrics::overall_accuracy;
use mgsp::synthetic::{generate, two_halves, SyntheticConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

/// Random labelled rows with at least two classes present.
fn instance(seed: u64) -> (DMatrix<f64>, Vec<Option<u16>>) {
    let mut rng = common::rng(seed);
    let rows = rng.random_range(4..30);
    let dim = rng.random_range(1..5);
    let classes = rng.random_range(2..5u16);
    let x = DMatrix::from_fn(rows, dim, |_, _| rng.random_range(-3.0..3.0));
    let labels = (0..rows)
        .map(|i| match i {
            0 => Some(1),
            1 => Some(2),
            _ if rng.random_bool(0.2) => None,
            _ => Some(rng.random_range(1..=classes)),
        })
        .collect();
    (x, labels)
}

fn fast() -> SvmConfig {
    SvmConfig { lambda: 1e-2, epochs: 40 }
}

proptest! {
    #[test]
    fn labels_are_the_argmax_of_decision_values(seed in any::<u64>()) {
        let (x, labels) = instance(seed);
        let model = train_ovr(&x, &labels, &fast(), seed).unwrap();
        let mut rng = common::rng(seed ^ 0xabc);
        let probe = DMatrix::from_fn(20, x.ncols(), |_, _| rng.random_range(-5.0..5.0));
        let pred = predict(&model, &probe).unwrap();
        let classes: Vec<u16> = labels.iter().flatten().copied().collect();
        for r in 0..probe.nrows() {
            let row = pred.decision_values.row(r);
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            let best = (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            prop_assert_eq!(pred.labels[r], model.classes()[best]);
            prop_assert!(classes.contains(&pred.labels[r]));
        }
    }

    #[test]
    fn uniform_feature_scaling_keeps_predictions(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let (x, labels) = instance(seed);
        let a = predict(&train_ovr(&x, &labels, &fast(), seed).unwrap(), &x).unwrap();
        let xs = &x * scale;
        let b = predict(&train_ovr(&xs, &labels, &fast(), seed).unwrap(), &xs).unwrap();
        prop_assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn model_blob_round_trips(seed in any::<u64>()) {
        let (x, labels) = instance(seed);
        let model = train_ovr(&x, &labels, &fast(), seed).unwrap();
        let back = mgsp::classify::LinearModel::from_bytes(&model.to_bytes()).unwrap();
        prop_assert_eq!(back.to_bytes(), model.to_bytes());
        prop_assert_eq!(predict(&back, &x).unwrap().labels, predict(&model, &x).unwrap().labels);
    }
}

#[test]
fn halves_are_classified_perfectly() {
    let (cube, labels) = two_halves(16, 16, 16).unwrap();
    for seed in 0..5 {
        let split = TrainTestSplit::stratified(&labels, 2, seed).unwrap();
        let mut cfg = SrcConfig::new(8);
        // the balancing term pairs stray border pixels across the edge
        cfg.ers.balance = 0.0;
        let result = mln_src(&cube, &labels, &split, &cfg, seed).unwrap();
        let mask = split.test_mask(labels.len());
        assert_eq!(overall_accuracy(&result.labels, &labels, &mask).unwrap(), 1.0, "seed {seed}");
    }
}

#[test]
fn every_pixel_gets_one_training_class() {
    let scene = generate(&SyntheticConfig {
        height: 24,
        width: 24,
        bands: 10,
        classes: 3,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let split = TrainTestSplit::stratified(&scene.labels, 5, 1).unwrap();
    let result = mln_src(&scene.cube, &scene.labels, &split, &SrcConfig::new(40), 1).unwrap();
    let trained: Vec<u16> = split.train.iter().map(|&p| scene.labels.labels()[p]).collect();
    assert_eq!(result.labels.len(), scene.labels.len());
    assert!(result.labels.labels().iter().all(|l| trained.contains(l)));
    assert_eq!(result.decision_values.nrows(), scene.labels.len());
}

#[test]
fn full_regroup_ratio_keeps_every_superpixel() {
    let scene = generate(&SyntheticConfig {
        height: 20,
        width: 20,
        bands: 12,
        classes: 3,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let mut cfg = SrcConfig::new(30);
    cfg.regroup_ratio = 1.0;
    let prep = prepare_resolution(&scene.cube, &cfg, 4).unwrap();
    assert_eq!(prep.group_count(), prep.superpixel_count());
    let mut seen = prep.group_of_superpixel.clone();
    seen.sort_unstable();
    assert_eq!(seen, (0..30).collect::<Vec<_>>());
    for (s, &g) in prep.group_of_superpixel.iter().enumerate() {
        let diff = (prep.group_features.row(g) - prep.superpixel_features.row(s)).abs().max();
        assert!(diff <= 1e-12);
    }
}
