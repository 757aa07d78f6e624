//! Linear support-vector classification with stratified cross-validation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::RocCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmOptions {
    pub k_folds: usize,
    /// Inverse regularisation strength; the L2 weight is `1 / (c * n_train)`.
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions { k_folds: 5, c: 1.0, epochs: 200 }
    }
}

/// A linear decision function in the original feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Weights on standardised features.
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for d in 0..x.len() {
            s += self.weights[d] * (x[d] - self.mean[d]) / self.scale[d];
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmCv {
    pub roc: RocCurve,
    /// Out-of-fold decision values in input order.
    pub decision: Vec<f64>,
    /// Mean absolute standardised weight per feature over folds.
    pub weight_magnitudes: Vec<f64>,
}

impl SvmCv {
    pub fn auc(&self) -> f64 {
        self.roc.auc
    }

    /// Feature indices by decreasing weight magnitude.
    pub fn ranked_dims(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weight_magnitudes.len()).collect();
        idx.sort_by(|&a, &b| self.weight_magnitudes[b].total_cmp(&self.weight_magnitudes[a]).then(a.cmp(&b)));
        idx
    }
}

fn check_matrix(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map(Vec::len).ok_or_else(|| Error::InsufficientData("no samples".into()))?;
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidArgument("samples must share a non-zero dimension".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature".into()));
    }
    Ok(d)
}

/// Hinge loss + L2 linear classifier trained by averaged stochastic
/// subgradient descent (Pegasos) on standardised features.
pub fn fit_linear_svm(x: &[Vec<f64>], y: &[bool], opts: &SvmOptions, rng: &mut impl Rng) -> Result<LinearModel> {
    let d = check_matrix(x)?;
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass { positives: pos, negatives: y.len() - pos });
    }
    let n = x.len();
    let mean: Vec<f64> = (0..d).map(|k| x.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
    let scale: Vec<f64> = (0..d)
        .map(|k| {
            let var = x.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = x.iter().map(|r| (0..d).map(|k| (r[k] - mean[k]) / scale[k]).collect()).collect();
    let lambda = 1.0 / (opts.c * n as f64);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut w_avg = vec![0.0; d];
    let mut b_avg = 0.0;
    let mut averaged = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    let burn_in = opts.epochs / 2;
    for epoch in 0..opts.epochs.max(1) {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            // Pegasos step 1/(lambda t), offset so the first steps are at most 1.
            let eta = 1.0 / (lambda * t as f64 + 1.0);
            let yi = if y[i] { 1.0 } else { -1.0 };
            let margin = yi * (b + w.iter().zip(&z[i]).map(|(a, c)| a * c).sum::<f64>());
            for wk in w.iter_mut() {
                *wk *= 1.0 - eta * lambda;
            }
            if margin < 1.0 {
                for (wk, zk) in w.iter_mut().zip(&z[i]) {
                    *wk += eta * yi * zk;
                }
                b += eta * yi;
            }
            if epoch >= burn_in {
                averaged += 1;
                for (a, wk) in w_avg.iter_mut().zip(&w) {
                    *a += wk;
                }
                b_avg += b;
            }
        }
    }
    let m = averaged.max(1) as f64;
    Ok(LinearModel { mean, scale, weights: w_avg.iter().map(|v| v / m).collect(), bias: b_avg / m })
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[bool], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// k-fold stratified cross-validated linear SVM. Out-of-fold decision values
/// are pooled into one ROC curve (positives = `true`).
pub fn linear_svm_cv(x: &[Vec<f64>], y: &[bool], opts: &SvmOptions, rng: &mut impl Rng) -> Result<SvmCv> {
    let d = check_matrix(x)?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass { positives: pos, negatives: y.len() - pos });
    }
    let k = opts.k_folds;
    if k < 2 || x.len() < 2 * k {
        return Err(Error::InvalidArgument(format!("{} samples cannot fill {k} folds", x.len())));
    }
    let folds = stratified_folds(y, k, rng);
    let mut decision = vec![0.0; x.len()];
    let mut magnitudes = vec![0.0; d];
    for f in 0..k {
        let train: Vec<usize> = (0..x.len()).filter(|&i| folds[i] != f).collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let ty: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let model = fit_linear_svm(&tx, &ty, opts, rng)?;
        for i in (0..x.len()).filter(|&i| folds[i] == f) {
            decision[i] = model.decision(&x[i]);
        }
        for (m, w) in magnitudes.iter_mut().zip(&model.weights) {
            *m += w.abs() / k as f64;
        }
    }
    Ok(SvmCv { roc: RocCurve::new(&decision, y)?, decision, weight_magnitudes: magnitudes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    #[test]
    fn separable_clusters_reach_full_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            let c = if i % 2 == 0 { 10.0 } else { -10.0 };
            x.push(vec![c + 0.5 * gauss(&mut rng), 0.5 * gauss(&mut rng)]);
            y.push(i % 2 == 0);
        }
        let cv = linear_svm_cv(&x, &y, &SvmOptions::default(), &mut rng).unwrap();
        assert_eq!(cv.auc(), 1.0);
    }

    #[test]
    fn shuffled_labels_give_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| gauss(&mut rng)).collect()).collect();
        let mut y: Vec<bool> = (0..200).map(|i| i < 100).collect();
        y.shuffle(&mut rng);
        let cv = linear_svm_cv(&x, &y, &SvmOptions::default(), &mut rng).unwrap();
        assert!((cv.auc() - 0.5).abs() <= 0.15, "auc {}", cv.auc());
    }

    #[test]
    fn informative_dimension_has_largest_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..160 {
            let label = i % 2 == 0;
            let mut r: Vec<f64> = (0..6).map(|_| gauss(&mut rng)).collect();
            r[3] += if label { 1.5 } else { -1.5 };
            x.push(r);
            y.push(label);
        }
        let cv = linear_svm_cv(&x, &y, &SvmOptions::default(), &mut rng).unwrap();
        assert_eq!(cv.ranked_dims()[0], 3);
    }

    #[test]
    fn folds_are_stratified() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<bool> = (0..53).map(|i| i % 3 == 0).collect();
        let folds = stratified_folds(&y, 5, &mut rng);
        for f in 0..5 {
            let pos = (0..53).filter(|&i| folds[i] == f && y[i]).count();
            assert!((3..=4).contains(&pos));
        }
    }

    #[test]
    fn errors_on_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = vec![vec![1.0]; 20];
        assert!(matches!(
            linear_svm_cv(&x, &[true; 20], &SvmOptions::default(), &mut rng),
            Err(Error::SingleClass { .. })
        ));
        let y: Vec<bool> = (0..6).map(|i| i < 3).collect();
        assert!(linear_svm_cv(&x[..6], &y, &SvmOptions::default(), &mut rng).is_err());
    }
}
