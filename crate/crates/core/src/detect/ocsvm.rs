use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcsvmOptions {
    pub nu: f64,
    /// Gaussian kernel width `exp(-gamma |a - b|^2)`; `None` uses [`median_gamma`].
    pub gamma: Option<f64>,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OcsvmOptions {
    fn default() -> Self {
        OcsvmOptions { nu: 0.1, gamma: None, tolerance: 1e-6, max_iterations: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsvmResult {
    /// `sum_i alpha_i K(x_i, x) - rho` per training point.
    pub decision: Vec<f64>,
    /// Points strictly outside the boundary (decision below minus the solver tolerance).
    pub flags: Vec<bool>,
    /// Dual coefficients normalised to sum to one.
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub rho: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum()
}

/// `1 / (2 * median pairwise squared distance)`.
pub fn median_gamma(points: &[Vec<f64>]) -> Result<f64> {
    let mut d: Vec<f64> = Vec::with_capacity(points.len() * points.len() / 2);
    for i in 0..points.len() {
        for j in 0..i {
            d.push(sq_dist(&points[i], &points[j]));
        }
    }
    if d.is_empty() {
        return Err(Error::InsufficientData("need two points for the median heuristic".into()));
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if med <= 0.0 {
        return Err(Error::InvalidArgument("median pairwise distance is zero".into()));
    }
    Ok(1.0 / (2.0 * med))
}

/// nu-one-class SVM with a Gaussian kernel, solved in the dual
/// `min 1/2 a^T K a, 0 <= a_i <= 1, sum a = nu n` by maximal-violating-pair
/// coordinate descent.
pub fn one_class_svm(points: &[Vec<f64>], opts: &OcsvmOptions) -> Result<OcsvmResult> {
    let n = points.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("one-class SVM needs at least 4 points, got {n}")));
    }
    if !(opts.nu > 0.0 && opts.nu <= 1.0) {
        return Err(Error::InvalidArgument(format!("nu must lie in (0, 1], got {}", opts.nu)));
    }
    let gamma = match opts.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}"))),
        None => median_gamma(points)?,
    };
    let k: Vec<f64> = (0..n * n).map(|ij| (-gamma * sq_dist(&points[ij / n], &points[ij % n])).exp()).collect();
    let kk = |i: usize, j: usize| k[i * n + j];

    // Feasible start: the first floor(nu n) coefficients at the bound.
    let total = opts.nu * n as f64;
    let mut alpha = vec![0.0; n];
    let full = total.floor() as usize;
    for a in alpha.iter_mut().take(full) {
        *a = 1.0;
    }
    if full < n {
        alpha[full] = total - full as f64;
    }
    let mut grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| kk(i, j) * alpha[j]).sum()).collect();

    let mut iterations = 0;
    loop {
        // i may grow (alpha < 1), j may shrink (alpha > 0).
        let mut up = None;
        let mut low = None;
        for t in 0..n {
            if alpha[t] < 1.0 && up.is_none_or(|u: usize| grad[t] < grad[u]) {
                up = Some(t);
            }
            if alpha[t] > 0.0 && low.is_none_or(|l: usize| grad[t] > grad[l]) {
                low = Some(t);
            }
        }
        let (Some(i), Some(j)) = (up, low) else { break };
        let gap = grad[j] - grad[i];
        if gap <= opts.tolerance {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged { iterations, gap });
        }
        iterations += 1;
        let curvature = (kk(i, i) + kk(j, j) - 2.0 * kk(i, j)).max(1e-12);
        let delta = (gap / curvature).min(1.0 - alpha[i]).min(alpha[j]);
        alpha[i] += delta;
        alpha[j] -= delta;
        for (t, g) in grad.iter_mut().enumerate() {
            *g += delta * (kk(t, i) - kk(t, j));
        }
    }

    // rho: mean gradient over free coefficients, else the midpoint of the KKT bracket.
    let free: Vec<f64> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < 1.0).map(|t| grad[t]).collect();
    let rho = if free.is_empty() {
        let ub = (0..n).filter(|&t| alpha[t] == 0.0).map(|t| grad[t]).fold(f64::INFINITY, f64::min);
        let lb = (0..n).filter(|&t| alpha[t] == 1.0).map(|t| grad[t]).fold(f64::NEG_INFINITY, f64::max);
        match (ub.is_finite(), lb.is_finite()) {
            (true, true) => 0.5 * (ub + lb),
            (true, false) => ub,
            _ => lb,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    // Report in the conventional scale where the coefficients sum to one.
    let decision: Vec<f64> = grad.iter().map(|g| (g - rho) / total).collect();
    // Free support vectors sit on the boundary only up to the solver tolerance.
    let margin = opts.tolerance / total;
    let flags = decision.iter().map(|&d| d < -margin).collect();
    let alpha = alpha.iter().map(|a| a / total).collect();
    Ok(OcsvmResult { decision, flags, alpha, gamma, rho: rho / total, iterations })
}

impl OcsvmResult {
    /// Decision value of an arbitrary point; `points` are the training points.
    pub fn decision_at(&self, points: &[Vec<f64>], x: &[f64]) -> f64 {
        points.iter().zip(&self.alpha).map(|(p, a)| a * (-self.gamma * sq_dist(p, x)).exp()).sum::<f64>() - self.rho
    }
}
