use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClassifierConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Fraction of training samples in the leaf labelled 1.
    Leaf { positive_fraction: f64 },
}

/// CART tree grown with Gini impurity. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub max_features: usize,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    max_features: usize,
    min_samples_split: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, samples: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let n = samples.len();
        let pos = samples.iter().filter(|&&i| self.y[i] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positive_fraction: pos as f64 / n as f64,
        });
        if pos == 0 || pos == n || n < self.min_samples_split {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(samples, rng) else {
            return id;
        };
        // partition in place: left block holds x <= threshold
        let mut split = 0;
        for k in 0..n {
            if self.x[samples[k]][feature] <= threshold {
                samples.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = samples.split_at_mut(split);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, samples: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let n = samples.len();
        let total_pos = samples.iter().filter(|&&i| self.y[i] == 1).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut evaluated = 0;
        let mut column: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in features {
            if evaluated == self.max_features {
                break;
            }
            column.clear();
            column.extend(samples.iter().map(|&i| (self.x[i][f], self.y[i])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            if column[0].0 == column[n - 1].0 {
                continue;
            }
            evaluated += 1;
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(column[k - 1].1);
                if column[k].0 == column[k - 1].0 {
                    continue;
                }
                let impurity = k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(total_pos - left_pos, n - k);
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    let (lo, hi) = (column[k - 1].0, column[k].0);
                    let mut thr = lo + (hi - lo) / 2.0;
                    if thr >= hi {
                        thr = lo;
                    }
                    best = Some((impurity, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl DecisionTree {
    pub fn fit(x: &[Vec<f64>], y: &[u8], samples: &mut [usize], max_features: usize, min_samples_split: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut b = Builder {
            x,
            y,
            max_features,
            min_samples_split,
            nodes: Vec::new(),
        };
        b.grow(samples, rng);
        DecisionTree { nodes: b.nodes }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { positive_fraction } => return *positive_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, id: usize) -> usize {
            match &t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[u8], config: &ClassifierConfig, seed: u64) -> Self {
        let d = x[0].len();
        let max_features = config
            .forest_max_features
            .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
            .clamp(1, d);
        let n = x.len();
        let trees = (0..config.forest_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let mut samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::fit(x, y, &mut samples, max_features, config.forest_min_samples_split, &mut rng)
            })
            .collect();
        RandomForest { trees, max_features }
    }

    /// Mean leaf positive fraction across trees.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score(row)).sum::<f64>() / self.trees.len() as f64
    }
}
