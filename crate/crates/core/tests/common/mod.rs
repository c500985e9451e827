//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_points(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect())
        .collect()
}

/// Perplexity 2^H of the Gaussian conditional row of point `i` under
/// bandwidth `sigma`.
pub fn row_perplexity(x: &[Vec<f64>], i: usize, sigma: f64) -> f64 {
    let d: Vec<f64> = (0..x.len())
        .filter(|&j| j != i)
        .map(|j| x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d.iter().map(|v| (-(v - dmin) / (2.0 * sigma * sigma)).exp()).collect();
    let z: f64 = w.iter().sum();
    let h: f64 = w
        .iter()
        .map(|v| v / z)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    h.exp2()
}

/// Central finite-difference gradient of `f` at `y`.
pub fn numeric_gradient(f: impl Fn(&[[f64; 2]]) -> f64, y: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    let mut g = vec![[0.0; 2]; y.len()];
    let mut probe = y.to_vec();
    for i in 0..y.len() {
        for k in 0..2 {
            let orig = probe[i][k];
            probe[i][k] = orig + h;
            let up = f(&probe);
            probe[i][k] = orig - h;
            let down = f(&probe);
            probe[i][k] = orig;
            g[i][k] = (up - down) / (2.0 * h);
        }
    }
    g
}

/// Two Gaussian blobs in `dim` dimensions, `per` points each, with the
/// centres `factor` within-cluster radii apart. Returns points and cluster
/// ids.
pub fn planted_clusters(per: usize, dim: usize, factor: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let radius = (dim as f64).sqrt();
    let mut offset = vec![0.0; dim];
    offset[0] = factor * radius;
    let mut x = Vec::new();
    let mut ids = Vec::new();
    for c in 0..2 {
        for p in gaussian_points(per, dim, &mut r) {
            x.push(p.iter().zip(&offset).map(|(v, o)| v + c as f64 * o).collect());
            ids.push(c);
        }
    }
    (x, ids)
}

/// Fraction of points closer to their own cluster's 2-D centroid than to
/// any other.
pub fn nearest_centroid_purity(y: &[[f64; 2]], ids: &[usize]) -> f64 {
    let k = ids.iter().max().unwrap() + 1;
    let mut cent = vec![[0.0; 2]; k];
    let mut count = vec![0.0; k];
    for (p, &c) in y.iter().zip(ids) {
        cent[c][0] += p[0];
        cent[c][1] += p[1];
        count[c] += 1.0;
    }
    for (c, n) in cent.iter_mut().zip(&count) {
        c[0] /= n;
        c[1] /= n;
    }
    let hits = y
        .iter()
        .zip(ids)
        .filter(|(p, &c)| {
            let d = |q: &[f64; 2]| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            (0..k).all(|o| o == c || d(&cent[c]) < d(&cent[o]))
        })
        .count();
    hits as f64 / y.len() as f64
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(s, _)| *s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Brute-force k-NN majority vote on population-standardized columns.
pub fn brute_knn(train: &[Vec<f64>], labels: &[u8], query: &[Vec<f64>], k: usize) -> Vec<u8> {
    let d = train[0].len();
    let n = train.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| train.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let sd = (train.iter().map(|r| (r[j] - mean[j]) * (r[j] - mean[j])).sum::<f64>() / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let z = |r: &[f64]| -> Vec<f64> { (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect() };
    let zt: Vec<Vec<f64>> = train.iter().map(|r| z(r)).collect();
    query
        .iter()
        .map(|q| {
            let zq = z(q);
            let mut all: Vec<(f64, usize)> = zt
                .iter()
                .enumerate()
                .map(|(i, t)| (t.iter().zip(&zq).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let votes = all[..k].iter().filter(|(_, i)| labels[*i] == 1).count();
            u8::from(2 * votes >= k)
        })
        .collect()
}

/// Mean of the points, then its Euclidean length.
pub fn centroid_norm(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    (mx * mx + my * my).sqrt()
}

pub fn random_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    loop {
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if y.contains(&0) && y.contains(&1) {
            return y;
        }
    }
}
