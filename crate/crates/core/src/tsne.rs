//! Exact t-SNE: Gaussian input affinities with per-point bandwidths chosen
//! by perplexity, Student-t output kernel, and momentum gradient descent on
//! KL(P || Q).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

const LOG2_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub eta: f64,
    pub momentum_early: f64,
    pub momentum_late: f64,
    pub momentum_switch_iter: usize,
    pub iters: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            eta: 200.0,
            momentum_early: 0.5,
            momentum_late: 0.8,
            momentum_switch_iter: 250,
            iters: 1000,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perplexity >= 2.0) {
            return Err(Error::Config(format!("perplexity must be >= 2, got {}", self.perplexity)));
        }
        if self.iters == 0 {
            return Err(Error::Config("iters must be >= 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.early_exaggeration >= 1.0) {
            return Err(Error::Config("early exaggeration must be >= 1".into()));
        }
        Ok(())
    }

    /// Perplexity actually targeted for `n` points: at most (n-1)/3, but
    /// never below min(2, 0.75 (n-1)) so tiny inputs keep a usable target.
    pub fn effective_perplexity(&self, n: usize) -> f64 {
        let neighbours = n.saturating_sub(1) as f64;
        let cap = (neighbours / 3.0).max((0.75 * neighbours).min(2.0));
        self.perplexity.min(cap)
    }
}

/// Joint input affinities of one point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    pub n: usize,
    /// Row-major n x n.
    pub p: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub target_perplexity: f64,
}

impl AffinityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub y: Vec<[f64; 2]>,
    /// KL(P || Q) per iteration after the exaggeration window.
    pub kl_trace: Vec<f64>,
    /// KL at the initial layout.
    pub initial_kl: f64,
    pub final_kl: f64,
    pub seed: u64,
    pub iters: usize,
}

/// Result of a bandwidth search over one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth {
    pub sigma: f64,
    /// Conditional probabilities p(j|i), same order as the input distances.
    pub row: Vec<f64>,
    /// 2^H of `row`.
    pub perplexity: f64,
}

/// Shannon entropy in bits.
pub fn entropy_bits(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

// Conditional row for precision beta = 1/(2 sigma^2). Distances are shifted
// by their minimum, which leaves the normalized row unchanged.
fn conditional_row(d: &[f64], dmin: f64, beta: f64) -> Vec<f64> {
    let mut row: Vec<f64> = d.iter().map(|&x| (-(x - dmin) * beta).exp()).collect();
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= sum);
    row
}

/// Find the Gaussian bandwidth whose conditional distribution over the
/// neighbours (squared distances `distances_sq`, self excluded) has the
/// target perplexity.
pub fn bandwidth_search(distances_sq: &[f64], target_perplexity: f64) -> Bandwidth {
    let m = distances_sq.len();
    assert!(m >= 1, "bandwidth search needs at least one neighbour");
    let dmin = distances_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let dmax = distances_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // all neighbours equally far (up to rounding): nothing to calibrate
    if dmax - dmin <= 1e-12 * dmax {
        let row = vec![1.0 / m as f64; m];
        return Bandwidth {
            sigma: 1.0,
            perplexity: m as f64,
            row,
        };
    }
    let target = target_perplexity.log2();
    let spread = distances_sq.iter().map(|&x| x - dmin).sum::<f64>() / m as f64;
    let mut beta = 1.0 / spread;
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut row = conditional_row(distances_sq, dmin, beta);
    let mut h = entropy_bits(&row);
    for _ in 0..MAX_BISECTIONS {
        let diff = h - target;
        if diff.abs() < LOG2_TOL {
            break;
        }
        if diff > 0.0 {
            // too flat: sharpen
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (lo + hi);
        }
        row = conditional_row(distances_sq, dmin, beta);
        h = entropy_bits(&row);
    }
    Bandwidth {
        sigma: (0.5 / beta).sqrt(),
        perplexity: h.exp2(),
        row,
    }
}

pub fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Symmetric joint affinities `(p(j|i) + p(i|j)) / 2n` with zero diagonal.
pub fn compute_affinities(x: &[Vec<f64>], config: &TsneConfig) -> Result<AffinityMatrix> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { need: 3, got: n });
    }
    let target = config.effective_perplexity(n);
    let d = squared_distances(x);
    let mut cond = vec![0.0; n * n];
    let mut sigmas = Vec::with_capacity(n);
    let mut others = Vec::with_capacity(n - 1);
    for i in 0..n {
        others.clear();
        others.extend((0..n).filter(|&j| j != i).map(|j| d[i * n + j]));
        let bw = bandwidth_search(&others, target);
        let mut k = 0;
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = bw.row[k];
            k += 1;
        }
        sigmas.push(bw.sigma);
    }
    let denom = 2.0 * n as f64;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
            }
        }
    }
    Ok(AffinityMatrix {
        n,
        p,
        sigmas,
        target_perplexity: target,
    })
}

/// `sum p log(p/q)` over paired entries, natural log, both floored at 1e-12.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "shape mismatch");
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let a = a.max(PROB_FLOOR);
            let b = b.max(PROB_FLOOR);
            a * (a / b).ln()
        })
        .sum()
}

/// Student-t kernel values `(1 + |y_i - y_j|^2)^-1` (zero diagonal) and
/// their sum.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

/// Output joint probabilities q_ij for a layout.
pub fn low_dim_affinities(y: &[[f64; 2]]) -> Vec<f64> {
    let (mut num, z) = student_kernel(y);
    num.iter_mut().for_each(|v| *v /= z);
    num
}

/// KL(P || Q(y)).
pub fn objective(p: &[f64], y: &[[f64; 2]]) -> f64 {
    kl_divergence(p, &low_dim_affinities(y))
}

/// dC/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1
pub fn gradient(p: &[f64], y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, z) = student_kernel(y);
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        let mut g = [0.0; 2];
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let coef = 4.0 * (p[i * n + j] - w / z) * w;
            g[0] += coef * (y[i][0] - y[j][0]);
            g[1] += coef * (y[i][1] - y[j][1]);
        }
        grad[i] = g;
    }
    grad
}

/// Seeded N(0, 1e-4 I) initial layout.
pub fn initial_layout(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [1e-2 * a, 1e-2 * b]
        })
        .collect()
}

/// Embed `x` (n rows of equal length) into two dimensions.
pub fn fit(x: &[Vec<f64>], config: &TsneConfig) -> Result<Projection2D> {
    config.validate()?;
    let aff = compute_affinities(x, config)?;
    fit_affinities(&aff, config)
}

pub fn fit_affinities(aff: &AffinityMatrix, config: &TsneConfig) -> Result<Projection2D> {
    config.validate()?;
    let n = aff.n;
    let p: Vec<f64> = aff
        .p
        .iter()
        .enumerate()
        .map(|(k, &v)| if k / n == k % n { 0.0 } else { v.max(PROB_FLOOR) })
        .collect();
    let p_exag: Vec<f64> = p.iter().map(|v| v * config.early_exaggeration).collect();

    let mut y = initial_layout(n, config.seed);
    let mut y_prev = y.clone();
    let initial_kl = objective(&p, &y);
    let mut kl_trace = Vec::with_capacity(config.iters.saturating_sub(config.exaggeration_iters));

    for iter in 0..config.iters {
        let exaggerating = iter < config.exaggeration_iters;
        let grad = gradient(if exaggerating { &p_exag } else { &p }, &y);
        let momentum = if iter < config.momentum_switch_iter {
            config.momentum_early
        } else {
            config.momentum_late
        };
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            next.push([
                y[i][0] - config.eta * grad[i][0] + momentum * (y[i][0] - y_prev[i][0]),
                y[i][1] - config.eta * grad[i][1] + momentum * (y[i][1] - y_prev[i][1]),
            ]);
        }
        if next.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            let max_gradient = grad
                .iter()
                .flat_map(|g| g.iter())
                .fold(0.0_f64, |m, g| m.max(g.abs()));
            return Err(Error::Diverged {
                iteration: iter,
                max_gradient,
            });
        }
        y_prev = std::mem::replace(&mut y, next);
        if !exaggerating {
            kl_trace.push(objective(&p, &y));
        }
    }
    let final_kl = kl_trace.last().copied().unwrap_or_else(|| objective(&p, &y));
    Ok(Projection2D {
        y,
        kl_trace,
        initial_kl,
        final_kl,
        seed: config.seed,
        iters: config.iters,
    })
}
