use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false positive rate, true positive rate), from (0,0) to (1,1) as the
    /// threshold decreases.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve over all distinct score thresholds; tied scores form one
/// step. AUC by the trapezoidal rule.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let (fpr, tpr) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let (px, py) = *points.last().expect("nonempty");
        auc += (fpr - px) * (tpr + py) / 2.0;
        points.push((fpr, tpr));
    }
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_positive + self.true_negative) as f64 / self.total() as f64
    }
}

pub fn confusion(predicted: &[u8], labels: &[u8]) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &l) in predicted.iter().zip(labels) {
        match (p, l) {
            (1, 1) => c.true_positive += 1,
            (1, _) => c.false_positive += 1,
            (_, 1) => c.false_negative += 1,
            _ => c.true_negative += 1,
        }
    }
    c
}

pub fn accuracy(predicted: &[u8], labels: &[u8]) -> f64 {
    confusion(predicted, labels).accuracy()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_tied() {
        let r = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(r.auc, 1.0);
        let r = roc_auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn inverted_scores() {
        let r = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]).unwrap();
        assert_eq!(r.auc, 0.0);
    }

    #[test]
    fn single_class_error() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn confusion_counts() {
        let c = confusion(&[1, 1, 0, 0, 1], &[1, 0, 0, 1, 1]);
        assert_eq!((c.true_positive, c.false_positive, c.true_negative, c.false_negative), (2, 1, 1, 1));
        assert_eq!(c.total(), 5);
        assert!((c.accuracy() - 0.6).abs() < 1e-15);
    }
}
