use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, roc_auc, Confusion};
use super::{fit, ClassifierConfig, ClassifierKind};
use crate::error::{Error, Result};
use crate::features::{truncate_to_window, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EvalProtocol {
    /// Stratified k-fold cross-validation; scores are pooled out-of-fold.
    CrossValidation { folds: usize },
    /// One stratified split holding out `test_fraction` of each class.
    Holdout { test_fraction: f64 },
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol::CrossValidation { folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ClassifierKind,
    pub protocol: EvalProtocol,
    pub accuracy: f64,
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub confusion: Confusion,
    /// Horizon (s) -> accuracy; filled by the window sweep.
    #[serde(default)]
    pub per_window: BTreeMap<u64, f64>,
}

fn class_indices(y: &[u8], seed: u64) -> [Vec<usize>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &l) in y.iter().enumerate() {
        by_class[usize::from(l == 1)].push(i);
    }
    for idx in by_class.iter_mut() {
        idx.shuffle(&mut rng);
    }
    by_class
}

/// Fold number of every example. Each class is shuffled with `seed` and
/// dealt round-robin into `folds` folds.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let by_class = class_indices(y, seed);
    let smallest = by_class[0].len().min(by_class[1].len());
    if folds < 2 || folds > smallest {
        return Err(Error::Folds { folds, smallest });
    }
    let mut assignment = vec![0; y.len()];
    for idx in &by_class {
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Stratified train/test index split.
pub fn holdout_split(y: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for idx in class_indices(y, seed) {
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len().saturating_sub(1).max(1));
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn take<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Out-of-fold scores for every example.
pub fn cross_validate(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[u8],
    folds: usize,
    seed: u64,
    config: &ClassifierConfig,
) -> Result<Vec<f64>> {
    let assignment = stratified_folds(y, folds, seed)?;
    let per_fold: Vec<Result<(Vec<usize>, Vec<f64>)>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
            let mut model = fit(kind, &take(x, &train), &take(y, &train), config, fold_seed(seed, f))?;
            model.train_meta.fold = Some(f);
            Ok((test.clone(), model.predict_scores(&take(x, &test))?))
        })
        .collect();
    let mut scores = vec![0.0; y.len()];
    for r in per_fold {
        let (idx, s) = r?;
        for (i, v) in idx.into_iter().zip(s) {
            scores[i] = v;
        }
    }
    Ok(scores)
}

/// Evaluate `kind` under `protocol` and build a report.
pub fn evaluate(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[u8],
    protocol: EvalProtocol,
    seed: u64,
    config: &ClassifierConfig,
) -> Result<EvalReport> {
    let (scores, labels) = match protocol {
        EvalProtocol::CrossValidation { folds } => (cross_validate(kind, x, y, folds, seed, config)?, y.to_vec()),
        EvalProtocol::Holdout { test_fraction } => {
            let (train, test) = holdout_split(y, test_fraction, seed)?;
            let model = fit(kind, &take(x, &train), &take(y, &train), config, fold_seed(seed, 0))?;
            (model.predict_scores(&take(x, &test))?, take(y, &test))
        }
    };
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= config.threshold)).collect();
    let conf = confusion(&predicted, &labels);
    let roc = roc_auc(&scores, &labels)?;
    Ok(EvalReport {
        kind,
        protocol,
        accuracy: conf.accuracy(),
        auc: roc.auc,
        roc_points: roc.points,
        confusion: conf,
        per_window: BTreeMap::new(),
    })
}

/// Accuracy of `kind` when only bins up to each horizon are visible. Every
/// horizon uses the same fold assignment.
pub fn accuracy_over_windows(
    kind: ClassifierKind,
    dataset: &[FeatureVector],
    horizons: &[u64],
    protocol: EvalProtocol,
    seed: u64,
    config: &ClassifierConfig,
    with_masks: bool,
) -> Result<BTreeMap<u64, f64>> {
    if let Some(h) = horizons.iter().find(|&&h| h > 40) {
        return Err(Error::Config(format!("horizon {h} outside [0, 40]")));
    }
    let y: Vec<u8> = dataset.iter().map(|f| f.label).collect();
    let mut out = BTreeMap::new();
    for &h in horizons {
        let x: Vec<Vec<f64>> = dataset
            .iter()
            .map(|f| truncate_to_window(f, h).to_inputs(with_masks))
            .collect();
        out.insert(h, evaluate(kind, &x, &y, protocol, seed, config)?.accuracy);
    }
    Ok(out)
}
