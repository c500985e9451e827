//! Binary classifiers over feature vectors, ROC/AUC, and cross-validated
//! evaluation including the accuracy-versus-horizon sweep.

mod eval;
mod forest;
mod knn;
mod logreg;
mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{
    accuracy_over_windows, cross_validate, evaluate, holdout_split, stratified_folds, EvalProtocol,
    EvalReport,
};
pub use forest::{DecisionTree, Node, RandomForest};
pub use knn::Knn;
pub use logreg::LogReg;
pub use metrics::{accuracy, confusion, roc_auc, Confusion, RocCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    LogReg,
    Knn,
    RandomForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::LogReg, ClassifierKind::Knn, ClassifierKind::RandomForest];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::Knn => "knn",
            ClassifierKind::RandomForest => "forest",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" | "log-reg" | "logistic" => Ok(ClassifierKind::LogReg),
            "knn" => Ok(ClassifierKind::Knn),
            "forest" | "random-forest" | "rf" => Ok(ClassifierKind::RandomForest),
            other => Err(Error::Config(format!("unknown classifier {other:?}"))),
        }
    }
}

/// Hyperparameters for every classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub logreg_l2: f64,
    pub logreg_learning_rate: f64,
    pub logreg_epochs: usize,
    pub knn_k: usize,
    pub forest_trees: usize,
    /// Candidate features per split; `None` means floor(sqrt(n_features)).
    pub forest_max_features: Option<usize>,
    pub forest_min_samples_split: usize,
    pub threshold: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            logreg_l2: 1e-4,
            logreg_learning_rate: 0.1,
            logreg_epochs: 500,
            knn_k: 5,
            forest_trees: 100,
            forest_max_features: None,
            forest_min_samples_split: 2,
            threshold: 0.5,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.knn_k == 0 || self.knn_k % 2 == 0 {
            return Err(Error::Config(format!("k must be odd, got {}", self.knn_k)));
        }
        if self.forest_trees == 0 || self.forest_min_samples_split < 2 {
            return Err(Error::Config("forest needs >= 1 tree and min-samples-split >= 2".into()));
        }
        if !(self.logreg_learning_rate > 0.0) || !(self.logreg_l2 >= 0.0) || self.logreg_epochs == 0 {
            return Err(Error::Config("bad logistic regression settings".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-column standardization fitted on training data. Constant columns
/// get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelParams {
    LogReg(LogReg),
    Knn(Knn),
    RandomForest(RandomForest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub fold: Option<usize>,
    pub config: ClassifierConfig,
    pub n_train: usize,
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub n_features: usize,
    pub params: ModelParams,
    pub threshold: f64,
    pub train_meta: TrainMeta,
}

fn check_training_set(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Config(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Arity {
            expected: d,
            got: row.len(),
        });
    }
    Ok(d)
}

/// Train a classifier of `kind` on rows `x` with 0/1 labels `y`.
pub fn fit(kind: ClassifierKind, x: &[Vec<f64>], y: &[u8], config: &ClassifierConfig, seed: u64) -> Result<TrainedModel> {
    config.validate()?;
    let n_features = check_training_set(x, y)?;
    let params = match kind {
        ClassifierKind::LogReg => ModelParams::LogReg(LogReg::fit(x, y, config)?),
        ClassifierKind::Knn => ModelParams::Knn(Knn::fit(x, y, config.knn_k)),
        ClassifierKind::RandomForest => ModelParams::RandomForest(RandomForest::fit(x, y, config, seed)),
    };
    Ok(TrainedModel {
        kind,
        n_features,
        params,
        threshold: config.threshold,
        train_meta: TrainMeta {
            seed,
            fold: None,
            config: config.clone(),
            n_train: x.len(),
        },
    })
}

impl TrainedModel {
    /// Probability-like scores in [0, 1] for the positive class.
    pub fn predict_scores(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(row) = x.iter().find(|r| r.len() != self.n_features) {
            return Err(Error::Arity {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(match &self.params {
            ModelParams::LogReg(m) => x.iter().map(|r| m.score(r)).collect(),
            ModelParams::Knn(m) => x.iter().map(|r| m.score(r)).collect(),
            ModelParams::RandomForest(m) => x.iter().map(|r| m.score(r)).collect(),
        })
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<u8>> {
        Ok(self
            .predict_scores(x)?
            .into_iter()
            .map(|s| u8::from(s >= self.threshold))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad model file: {e}")))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing() {
        assert_eq!("forest".parse::<ClassifierKind>().unwrap(), ClassifierKind::RandomForest);
        assert_eq!("random-forest".parse::<ClassifierKind>().unwrap(), ClassifierKind::RandomForest);
        assert!("svm".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            fit(ClassifierKind::LogReg, &x, &[1, 1], &ClassifierConfig::default(), 0),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn arity_checked() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5], vec![0.2, 0.1]];
        let m = fit(ClassifierKind::Knn, &x, &[0, 1, 0, 1], &ClassifierConfig { knn_k: 1, ..Default::default() }, 0).unwrap();
        assert!(matches!(m.predict_scores(&[vec![1.0]]), Err(Error::Arity { expected: 2, got: 1 })));
    }

    #[test]
    fn even_k_rejected() {
        let cfg = ClassifierConfig { knn_k: 4, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.transform_row(&[3.0, 5.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn model_json_round_trip() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        for kind in ClassifierKind::ALL {
            let m = fit(kind, &x, &y, &ClassifierConfig { forest_trees: 5, ..Default::default() }, 3).unwrap();
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back.predict_scores(&x).unwrap(), m.predict_scores(&x).unwrap());
        }
    }
}
