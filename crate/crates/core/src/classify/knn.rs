use serde::{Deserialize, Serialize};

use super::Standardizer;

/// k-nearest-neighbour classifier over standardized inputs, Euclidean
/// metric. Distance ties are broken by training-row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub scaler: Standardizer,
    pub k: usize,
    pub train: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Knn {
    /// `k` is clamped to the training size (kept odd).
    pub fn fit(x: &[Vec<f64>], y: &[u8], k: usize) -> Self {
        let scaler = Standardizer::fit(x);
        let mut k = k.min(x.len());
        if k % 2 == 0 {
            k -= 1;
        }
        Knn {
            train: scaler.transform(x),
            scaler,
            k,
            labels: y.to_vec(),
        }
    }

    /// Indices of the k nearest training rows, nearest first.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let q = self.scaler.transform_row(row);
        let mut dist: Vec<(f64, usize)> = self
            .train
            .iter()
            .enumerate()
            .map(|(i, t)| (t.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    /// Fraction of the k neighbours labelled 1.
    pub fn score(&self, row: &[f64]) -> f64 {
        let nb = self.neighbours(row);
        nb.iter().filter(|&&i| self.labels[i] == 1).count() as f64 / nb.len() as f64
    }
}
