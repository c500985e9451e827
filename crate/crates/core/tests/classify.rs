mod common;

use common::*;
use logvuln::classify::{
    self, accuracy_over_windows, confusion, cross_validate, evaluate, holdout_split, roc_auc, stratified_folds,
    ClassifierConfig, ClassifierKind, EvalProtocol, LogReg, ModelParams, TrainedModel,
};
use logvuln::features::{featurize, DistanceFormula, TimedPoint};
use logvuln::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, d: usize, gap: f64, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
    let y = random_labels(n, rng);
    let x = gaussian_points(n, d, rng)
        .into_iter()
        .zip(&y)
        .map(|(mut row, &l)| {
            row[0] += gap * f64::from(l);
            row
        })
        .collect();
    (x, y)
}

#[test]
fn knn_matches_brute_force() {
    let cfg = ClassifierConfig::default();
    for seed in 0..50 {
        let mut r = rng(seed);
        let d = r.random_range(1..6);
        let (x, y) = blobs(30, d, 1.0, &mut r);
        let query = gaussian_points(20, d, &mut r);
        for k in [1, 3, 5, 7] {
            let model = classify::fit(ClassifierKind::Knn, &x, &y, &ClassifierConfig { knn_k: k, ..cfg.clone() }, 0).unwrap();
            assert_eq!(model.predict(&query).unwrap(), brute_knn(&x, &y, &query, k), "seed {seed} k {k}");
        }
    }
}

#[test]
fn knn_k_is_clamped_to_training_size() {
    let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
    let y = vec![0, 0, 1, 1];
    let model = classify::fit(ClassifierKind::Knn, &x, &y, &ClassifierConfig { knn_k: 9, ..Default::default() }, 0).unwrap();
    let ModelParams::Knn(knn) = &model.params else { panic!() };
    assert_eq!(knn.k, 3);
}

#[test]
fn auc_equals_mann_whitney() {
    for seed in 0..200 {
        let mut r = rng(seed);
        let n = r.random_range(2..80);
        let y = random_labels(n, &mut r);
        // coarse scores force plenty of ties
        let levels = r.random_range(1..10);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let auc = roc_auc(&scores, &y).unwrap().auc;
        assert!((auc - mann_whitney(&scores, &y)).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn auc_extremes() {
    let y = [0, 0, 1, 1, 0, 1];
    let separated = [0.1, 0.2, 0.8, 0.9, 0.3, 0.7];
    assert_eq!(roc_auc(&separated, &y).unwrap().auc, 1.0);
    assert_eq!(roc_auc(&[0.5; 6], &y).unwrap().auc, 0.5);
    let reversed: Vec<f64> = separated.iter().map(|s| 1.0 - s).collect();
    assert_eq!(roc_auc(&reversed, &y).unwrap().auc, 0.0);
    let roc = roc_auc(&separated, &y).unwrap();
    assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
    assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
    assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
}

#[test]
fn standardization_invariance() {
    // rescaling and shifting a column leaves standardized models unchanged
    let mut r = rng(7);
    let (x, y) = blobs(60, 3, 1.5, &mut r);
    let query = gaussian_points(25, 3, &mut r);
    let affine = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter().map(|v| vec![v[0] * 1000.0 + 5.0, v[1] * 0.001 - 2.0, v[2] * 4.0]).collect()
    };
    let cfg = ClassifierConfig::default();
    for kind in [ClassifierKind::Knn, ClassifierKind::LogReg] {
        let a = classify::fit(kind, &x, &y, &cfg, 1).unwrap().predict_scores(&query).unwrap();
        let b = classify::fit(kind, &affine(&x), &y, &cfg, 1).unwrap().predict_scores(&affine(&query)).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9, "{kind}: {u} vs {v}");
        }
    }
}

#[test]
fn logreg_loss_is_monotone() {
    let mut r = rng(9);
    let (x, y) = blobs(100, 5, 2.0, &mut r);
    let m = LogReg::fit(&x, &y, &ClassifierConfig::default()).unwrap();
    assert_eq!(m.loss_trace.len(), 501);
    assert!(m.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(m.loss_trace.last().unwrap() < &m.loss_trace[0]);
}

#[test]
fn logreg_rejects_runaway_learning_rate() {
    let mut r = rng(10);
    let (x, y) = blobs(50, 4, 1.0, &mut r);
    let cfg = ClassifierConfig {
        logreg_learning_rate: 500.0,
        ..Default::default()
    };
    assert!(matches!(LogReg::fit(&x, &y, &cfg), Err(Error::Config(_))));
}

#[test]
fn every_kind_separates_easy_blobs() {
    let mut r = rng(12);
    let (x, y) = blobs(120, 4, 5.0, &mut r);
    for kind in ClassifierKind::ALL {
        let rep = evaluate(kind, &x, &y, EvalProtocol::default(), 3, &ClassifierConfig::default()).unwrap();
        assert!(rep.accuracy >= 0.95, "{kind}: {}", rep.accuracy);
        assert!(rep.auc >= 0.95);
        assert_eq!(rep.confusion.total(), 120);
    }
}

#[test]
fn forest_is_seed_deterministic_and_serializes() {
    let mut r = rng(13);
    let (x, y) = blobs(80, 6, 1.0, &mut r);
    let cfg = ClassifierConfig::default();
    let a = classify::fit(ClassifierKind::RandomForest, &x, &y, &cfg, 5).unwrap();
    let b = classify::fit(ClassifierKind::RandomForest, &x, &y, &cfg, 5).unwrap();
    assert_eq!(a, b);
    let back = TrainedModel::from_json(&a.to_json()).unwrap();
    assert_eq!(back.predict_scores(&x).unwrap(), a.predict_scores(&x).unwrap());
    let scores = a.predict_scores(&x).unwrap();
    assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn arity_and_single_class_errors() {
    let cfg = ClassifierConfig::default();
    let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]];
    assert!(matches!(
        classify::fit(ClassifierKind::LogReg, &x, &[1, 1, 1], &cfg, 0),
        Err(Error::SingleClass)
    ));
    let model = classify::fit(ClassifierKind::Knn, &x, &[0, 1, 1], &cfg, 0).unwrap();
    assert!(matches!(model.predict(&[vec![1.0]]), Err(Error::Arity { expected: 2, got: 1 })));
    assert!(matches!(
        ClassifierConfig { knn_k: 4, ..Default::default() }.validate(),
        Err(Error::Config(_))
    ));
}

#[test]
fn folds_and_holdout() {
    let mut r = rng(14);
    let y = random_labels(57, &mut r);
    let a = stratified_folds(&y, 5, 1).unwrap();
    let pos = y.iter().filter(|&&l| l == 1).count();
    for f in 0..5 {
        let in_fold = (0..57).filter(|&i| a[i] == f && y[i] == 1).count();
        assert!(in_fold == pos / 5 || in_fold == pos / 5 + 1);
    }
    assert!(matches!(stratified_folds(&[0, 0, 1], 2, 0), Err(Error::Folds { folds: 2, smallest: 1 })));
    let (train, test) = holdout_split(&y, 0.25, 3).unwrap();
    assert_eq!(train.len() + test.len(), 57);
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort();
    assert_eq!(all, (0..57).collect::<Vec<_>>());
}

#[test]
fn cross_validation_is_reproducible() {
    let mut r = rng(15);
    let (x, y) = blobs(40, 3, 1.0, &mut r);
    let cfg = ClassifierConfig::default();
    for kind in ClassifierKind::ALL {
        let a = cross_validate(kind, &x, &y, 4, 2, &cfg).unwrap();
        assert_eq!(a, cross_validate(kind, &x, &y, 4, 2, &cfg).unwrap());
        let predicted: Vec<u8> = a.iter().map(|&s| u8::from(s >= 0.5)).collect();
        let rep = evaluate(kind, &x, &y, EvalProtocol::CrossValidation { folds: 4 }, 2, &cfg).unwrap();
        assert_eq!(rep.confusion, confusion(&predicted, &y));
    }
}

#[test]
fn window_sweep_sees_only_visible_bins() {
    // class signal lives only in seconds 20..25
    let mut r = rng(16);
    let rows: Vec<_> = (0..60)
        .map(|i| {
            let label = (i % 2) as u8;
            let pts: Vec<TimedPoint> = (0..45)
                .map(|s| {
                    let base = r.random_range(0.0..1.0);
                    let lift = if (20..25).contains(&s) && label == 1 { 5.0 } else { 0.0 };
                    TimedPoint { elapsed_s: s, y: [base + lift, 0.0] }
                })
                .collect();
            featurize(&format!("{i}.log"), &pts, label, None, DistanceFormula::Norm)
        })
        .collect();
    let acc = accuracy_over_windows(
        ClassifierKind::LogReg,
        &rows,
        &[10, 19, 25, 40],
        EvalProtocol::default(),
        1,
        &ClassifierConfig::default(),
        true,
    )
    .unwrap();
    assert!(acc[&10] <= 0.75 && acc[&19] <= 0.75);
    assert!(acc[&25] >= 0.95 && acc[&40] >= 0.95);
    assert!(accuracy_over_windows(ClassifierKind::Knn, &rows, &[41], EvalProtocol::default(), 1, &ClassifierConfig::default(), true).is_err());
}
