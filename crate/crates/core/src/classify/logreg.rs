use serde::{Deserialize, Serialize};

use super::{sigmoid, ClassifierConfig, Standardizer};
use crate::error::{Error, Result};

/// L2-penalised logistic regression trained by full-batch gradient descent
/// on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Penalised training loss before each epoch and after the last one.
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

fn loss(x: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.len() as f64;
    let mut total = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        // log(1 + e^z) - y z, computed stably
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        total += softplus - f64::from(label) * z;
    }
    total / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

impl LogReg {
    pub fn fit(x: &[Vec<f64>], y: &[u8], config: &ClassifierConfig) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let xs = scaler.transform(x);
        let d = xs[0].len();
        let n = xs.len() as f64;
        let (lr, l2) = (config.logreg_learning_rate, config.logreg_l2);
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut trace = Vec::with_capacity(config.logreg_epochs + 1);
        for _ in 0..config.logreg_epochs {
            trace.push(loss(&xs, y, &w, b, l2));
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for (row, &label) in xs.iter().zip(y) {
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let err = sigmoid(z) - f64::from(label);
                for (g, v) in gw.iter_mut().zip(row) {
                    *g += err * v;
                }
                gb += err;
            }
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= lr * (g / n + l2 * *wi);
            }
            b -= lr * gb / n;
        }
        trace.push(loss(&xs, y, &w, b, l2));
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::Config("logistic regression diverged".into()));
        }
        let increases = trace.windows(2).filter(|p| p[1] > p[0] + 1e-9).count();
        if increases * 100 > config.logreg_epochs {
            return Err(Error::Config(format!(
                "logistic regression loss increased on {increases} of {} epochs; lower the learning rate",
                config.logreg_epochs
            )));
        }
        Ok(LogReg {
            scaler,
            weights: w,
            bias: b,
            loss_trace: trace,
        })
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let z = self
            .scaler
            .transform_row(row)
            .iter()
            .zip(&self.weights)
            .map(|(a, c)| a * c)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }
}
