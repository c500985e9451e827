//! Per-second centroid-distance features over the 2-D projection of a file.
//!
//! Bins are `T = {0, 4, 5, ..., 40}`: bin 0 covers the connection attempt
//! `[0, 4)`, bins 4..=39 cover one second each and bin 40 absorbs
//! everything from 40 s on.

use serde::{Deserialize, Serialize};

pub const N_BINS: usize = 38;
pub const LAST_BIN: u64 = 40;

/// Bin labels in feature order.
pub fn bin_labels() -> [u64; N_BINS] {
    let mut labels = [0u64; N_BINS];
    for (i, l) in labels.iter_mut().enumerate().skip(1) {
        *l = i as u64 + 3;
    }
    labels
}

/// Index into the feature vector of the bin holding `elapsed_s`.
pub fn bin_index(elapsed_s: u64) -> usize {
    match elapsed_s {
        0..=3 => 0,
        s if s >= LAST_BIN => N_BINS - 1,
        s => (s - 3) as usize,
    }
}

pub fn bin_label(index: usize) -> u64 {
    bin_labels()[index]
}

/// How a bin's centroid is turned into a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceFormula {
    /// Euclidean norm of the centroid.
    #[default]
    Norm,
    /// `sqrt(max(0, mean_y1 + mean_y2))`, kept for auditing the literal
    /// formula.
    CompatSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub elapsed_s: u64,
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub source_path: String,
    pub distances: [f64; N_BINS],
    pub present: [bool; N_BINS],
    pub label: u8,
    pub duration_s: Option<u64>,
}

impl FeatureVector {
    /// Distances followed, when `with_masks`, by the mask as 0/1.
    pub fn to_inputs(&self, with_masks: bool) -> Vec<f64> {
        let mut v = self.distances.to_vec();
        if with_masks {
            v.extend(self.present.iter().map(|&m| f64::from(u8::from(m))));
        }
        v
    }
}

/// Group points by bin. Index `i` of the result holds the points of bin
/// `bin_label(i)`.
pub fn bin_points(points: &[TimedPoint]) -> Vec<Vec<[f64; 2]>> {
    let mut bins = vec![Vec::new(); N_BINS];
    for p in points {
        bins[bin_index(p.elapsed_s)].push(p.y);
    }
    bins
}

fn centroid(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

/// Distance of the bin centroid from the origin. `points` must be nonempty.
pub fn centroid_distance(points: &[[f64; 2]]) -> f64 {
    centroid_distance_with(points, DistanceFormula::Norm)
}

pub fn centroid_distance_with(points: &[[f64; 2]], formula: DistanceFormula) -> f64 {
    assert!(!points.is_empty(), "centroid of an empty bin");
    let [cx, cy] = centroid(points);
    match formula {
        DistanceFormula::Norm => cx.hypot(cy),
        DistanceFormula::CompatSum => (cx + cy).max(0.0).sqrt(),
    }
}

pub fn featurize(
    source_path: &str,
    points: &[TimedPoint],
    label: u8,
    duration_s: Option<u64>,
    formula: DistanceFormula,
) -> FeatureVector {
    let mut distances = [0.0; N_BINS];
    let mut present = [false; N_BINS];
    for (i, bin) in bin_points(points).iter().enumerate() {
        if !bin.is_empty() {
            distances[i] = centroid_distance_with(bin, formula);
            present[i] = true;
        }
    }
    FeatureVector {
        source_path: source_path.to_string(),
        distances,
        present,
        label,
        duration_s,
    }
}

/// Drop every bin whose label exceeds `horizon_s`.
pub fn truncate_to_window(fv: &FeatureVector, horizon_s: u64) -> FeatureVector {
    let mut out = fv.clone();
    for (i, label) in bin_labels().iter().enumerate() {
        if *label > horizon_s {
            out.distances[i] = 0.0;
            out.present[i] = false;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_bins() {
        let labels = bin_labels();
        assert_eq!(labels[0], 0);
        assert_eq!(labels[1], 4);
        assert_eq!(labels[N_BINS - 1], 40);
        assert_eq!(bin_index(2), 0);
        assert_eq!(bin_index(3), 0);
        assert_eq!(bin_index(4), 1);
        assert_eq!(bin_label(bin_index(10)), 10);
        assert_eq!(bin_label(bin_index(55)), 40);
        for s in 4..=40 {
            assert_eq!(bin_label(bin_index(s)), s);
        }
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid_distance(&[[3.0, 4.0]]), 5.0);
        assert_eq!(centroid_distance(&[[1.0, 0.0], [-1.0, 0.0]]), 0.0);
    }

    #[test]
    fn compat_formula_clamps() {
        assert_eq!(centroid_distance_with(&[[-3.0, -4.0]], DistanceFormula::CompatSum), 0.0);
        assert_eq!(centroid_distance_with(&[[3.0, 1.0]], DistanceFormula::CompatSum), 2.0);
    }

    #[test]
    fn featurize_masks() {
        let pts = [
            TimedPoint { elapsed_s: 1, y: [1.0, 1.0] },
            TimedPoint { elapsed_s: 10, y: [0.0, 2.0] },
            TimedPoint { elapsed_s: 10, y: [0.0, 4.0] },
        ];
        let fv = featurize("f", &pts, 1, Some(12), DistanceFormula::Norm);
        assert_eq!(fv.present.iter().filter(|&&m| m).count(), 2);
        assert_eq!(fv.distances[bin_index(10)], 3.0);
        assert_eq!(fv.to_inputs(true).len(), 2 * N_BINS);
        assert_eq!(fv.to_inputs(false).len(), N_BINS);
    }

    #[test]
    fn origin_points_give_zero() {
        let pts: Vec<TimedPoint> = (0..50).map(|s| TimedPoint { elapsed_s: s, y: [0.0, 0.0] }).collect();
        let fv = featurize("f", &pts, 0, None, DistanceFormula::Norm);
        assert!(fv.distances.iter().all(|&d| d == 0.0));
        assert!(fv.present.iter().all(|&m| m));
    }

    #[test]
    fn truncation_examples() {
        let pts: Vec<TimedPoint> = (0..45).map(|s| TimedPoint { elapsed_s: s, y: [1.0, s as f64] }).collect();
        let fv = featurize("f", &pts, 0, None, DistanceFormula::Norm);
        assert_eq!(truncate_to_window(&fv, 40), fv);
        let t0 = truncate_to_window(&fv, 0);
        assert_eq!(t0.present.iter().filter(|&&m| m).count(), 1);
        assert!(t0.present[0]);
        let t10 = truncate_to_window(&fv, 10);
        for (i, l) in bin_labels().iter().enumerate() {
            assert_eq!(t10.present[i], *l <= 10);
            if *l <= 10 {
                assert_eq!(t10.distances[i], fv.distances[i]);
            } else {
                assert_eq!(t10.distances[i], 0.0);
            }
        }
    }
}
