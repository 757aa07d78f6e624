use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful binary-search-tree lookup among `n` points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestOptions {
    pub n_trees: usize,
    /// Subsample size per tree; clamped to the number of points.
    pub subsample: usize,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions { n_trees: 100, subsample: 256 }
    }
}

enum Node {
    Leaf { size: usize },
    Split { dim: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

fn build(points: &[Vec<f64>], idx: &mut [usize], depth: usize, limit: usize, rng: &mut impl Rng) -> Node {
    if depth >= limit || idx.len() <= 1 {
        return Node::Leaf { size: idx.len() };
    }
    let d = points[0].len();
    let ranges: Vec<(usize, f64, f64)> = (0..d)
        .filter_map(|k| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(points[i][k]), hi.max(points[i][k]))
            });
            (hi > lo).then_some((k, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return Node::Leaf { size: idx.len() };
    }
    let (dim, lo, hi) = ranges[rng.gen_range(0..ranges.len())];
    let value = rng.gen_range(lo..hi);
    let mut split = 0;
    for j in 0..idx.len() {
        if points[idx[j]][dim] < value {
            idx.swap(split, j);
            split += 1;
        }
    }
    let (l, r) = idx.split_at_mut(split);
    Node::Split {
        dim,
        value,
        left: Box::new(build(points, l, depth + 1, limit, rng)),
        right: Box::new(build(points, r, depth + 1, limit, rng)),
    }
}

fn path_length(node: &Node, x: &[f64], depth: usize) -> f64 {
    match node {
        Node::Leaf { size } => depth as f64 + average_path_length(*size),
        Node::Split { dim, value, left, right } => {
            let next = if x[*dim] < *value { left } else { right };
            path_length(next, x, depth + 1)
        }
    }
}

/// Isolation-forest anomaly scores `2^(-E[h(x)] / c(subsample))`; higher is
/// more anomalous.
pub fn isolation_forest(points: &[Vec<f64>], opts: &ForestOptions, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let n = points.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("isolation forest needs at least 8 points, got {n}")));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("points must be finite and share a dimension".into()));
    }
    if opts.n_trees == 0 || opts.subsample < 2 {
        return Err(Error::InvalidArgument("need at least one tree and a subsample of two".into()));
    }
    let psi = opts.subsample.min(n);
    let limit = (psi as f64).log2().ceil() as usize;
    let mut total = vec![0.0; n];
    for _ in 0..opts.n_trees {
        let mut idx = sample(rng, n, psi).into_vec();
        let tree = build(points, &mut idx, 0, limit, rng);
        for (t, p) in total.iter_mut().zip(points) {
            *t += path_length(&tree, p, 0);
        }
    }
    let c = average_path_length(psi);
    Ok(total.iter().map(|t| 2f64.powf(-(t / opts.n_trees as f64) / c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cloud(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..2).map(|_| StandardNormal.sample(rng)).collect()).collect()
    }

    #[test]
    fn far_point_scores_highest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = cloud(200, &mut rng);
        pts.push(vec![50.0, 0.0]);
        let s = isolation_forest(&pts, &ForestOptions::default(), &mut rng).unwrap();
        let max = s.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(s[200], max);
        assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn duplicated_inlier_scores_below_far_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = cloud(100, &mut rng);
        let dup = pts[0].clone();
        pts.push(dup);
        pts.push(vec![0.0, -40.0]);
        let s = isolation_forest(&pts, &ForestOptions::default(), &mut rng).unwrap();
        assert!(s[100] <= s[101] && s[0] <= s[101]);
    }

    #[test]
    fn seeded_runs_repeat() {
        let pts = cloud(50, &mut ChaCha8Rng::seed_from_u64(3));
        let a = isolation_forest(&pts, &ForestOptions::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = isolation_forest(&pts, &ForestOptions::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn path_length_normaliser() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // 2 H(255) - 2 * 255 / 256 with H(255) = 6.1243...
        assert!((average_path_length(256) - 10.2448).abs() < 1e-3);
    }
}
