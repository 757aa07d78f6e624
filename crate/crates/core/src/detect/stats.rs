//! Rank-based two-sample statistics: AUC/ROC, Kolmogorov-Smirnov, Mann-Whitney U.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of a two-sample test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    /// Whether `p_value` is exact or from the asymptotic approximation.
    pub exact: bool,
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass { positives: pos, negatives: neg });
    }
    Ok((pos, neg))
}

/// 1-based midranks of `values` (ties share the mean rank), plus the tie
/// group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Area under the ROC curve of `scores` (higher = positive) as the
/// Mann-Whitney rank statistic; tied pairs count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, labels)?;
    let (ranks, _) = midranks(scores);
    let r_pos: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = r_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// ROC points from the highest threshold down; ties move diagonally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn new(scores: &[f64], labels: &[bool]) -> Result<Self> {
        let (pos, neg) = check_scores(scores, labels)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let (mut fpr, mut tpr) = (vec![0.0], vec![0.0]);
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut i = 0;
        while i < order.len() {
            let s = scores[order[i]];
            while i < order.len() && scores[order[i]] == s {
                if labels[order[i]] {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            fpr.push(fp as f64 / neg as f64);
            tpr.push(tp as f64 / pos as f64);
        }
        Ok(RocCurve { fpr, tpr, auc: auc(scores, labels)? })
    }

    /// Trapezoidal area under the stored points.
    pub fn trapezoid_area(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(f, t)| (f[1] - f[0]) * (t[0] + t[1]) / 2.0)
            .sum()
    }
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("two-sample test needs non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in sample".into()));
    }
    Ok(())
}

/// Largest product `n1 * n2` for which KS p-values are computed exactly.
pub const KS_EXACT_LIMIT: usize = 10_000;

/// Two-sided two-sample Kolmogorov-Smirnov test.
///
/// Small samples (`n1 * n2 <= KS_EXACT_LIMIT`) use the exact null
/// distribution of D by lattice-path enumeration; larger ones use the
/// asymptotic Kolmogorov distribution at `sqrt(n1 n2 / (n1 + n2)) * D`.
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_samples(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    // D scaled by n1 * n2, tracked exactly as an integer.
    let (mut i, mut j) = (0usize, 0usize);
    let mut d_int: i64 = 0;
    while i < n1 && j < n2 {
        let v = sa[i].min(sb[j]);
        while i < n1 && sa[i] == v {
            i += 1;
        }
        while j < n2 && sb[j] == v {
            j += 1;
        }
        d_int = d_int.max((i as i64 * n2 as i64 - j as i64 * n1 as i64).abs());
    }
    let d = d_int as f64 / (n1 as f64 * n2 as f64);
    let exact = n1 * n2 <= KS_EXACT_LIMIT;
    let p = if d_int == 0 {
        1.0
    } else if exact {
        ks_exact_p(n1, n2, d_int)
    } else {
        let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
        kolmogorov_q(ne.sqrt() * d)
    };
    Ok(TestResult { test: "kolmogorov-smirnov".into(), statistic: d, p_value: p.clamp(0.0, 1.0), n1, n2, exact })
}

/// Probability under the null that a random interleaving reaches
/// `|i n2 - j n1| >= d_int`. Mass is propagated with hypergeometric step
/// probabilities and exits are accumulated directly, so small p-values keep
/// full relative precision.
fn ks_exact_p(n1: usize, n2: usize, d_int: i64) -> f64 {
    let outside = |i: usize, j: usize| (i as i64 * n2 as i64 - j as i64 * n1 as i64).abs() >= d_int;
    let mut row = vec![0.0f64; n2 + 1];
    row[0] = 1.0;
    let mut exited = 0.0;
    for i in 0..=n1 {
        let mut next = vec![0.0f64; n2 + 1];
        for j in 0..=n2 {
            let m = row[j];
            if m == 0.0 || i + j == n1 + n2 {
                continue;
            }
            let left = (n1 + n2 - i - j) as f64;
            if i < n1 {
                let q = m * (n1 - i) as f64 / left;
                if outside(i + 1, j) {
                    exited += q;
                } else {
                    next[j] += q;
                }
            }
            if j < n2 {
                let q = m * (n2 - j) as f64 / left;
                if outside(i, j + 1) {
                    exited += q;
                } else {
                    row[j + 1] += q;
                }
            }
        }
        row = next;
    }
    exited
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-theta form, fast for small arguments.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (c * ((2 * k - 1) as f64).powi(2)).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let t = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Largest group size for which tie-free MWU p-values are exact.
pub const MWU_EXACT_LIMIT: usize = 50;

/// Two-sided Mann-Whitney U test. The statistic is U of the first sample.
///
/// Tie-free samples with both sizes at most `MWU_EXACT_LIMIT` use the exact
/// null distribution of U; otherwise the normal approximation with tie and
/// continuity corrections.
pub fn mwu_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_samples(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let has_ties = ties.iter().any(|&t| t > 1);
    let exact = !has_ties && n1 <= MWU_EXACT_LIMIT && n2 <= MWU_EXACT_LIMIT;
    let p = if exact {
        mwu_exact_p(n1, n2, u.round() as usize)
    } else {
        let n = (n1 + n2) as f64;
        let mean = (n1 * n2) as f64 / 2.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term);
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
            libm::erfc(z / std::f64::consts::SQRT_2)
        }
    };
    Ok(TestResult { test: "mann-whitney-u".into(), statistic: u, p_value: p.clamp(0.0, 1.0), n1, n2, exact })
}

/// Two-sided exact p-value of U = `u` for tie-free samples.
fn mwu_exact_p(n1: usize, n2: usize, u: usize) -> f64 {
    // counts[m][k]: number of arrangements of m first-sample and n second-sample
    // items with U = k, built up over n.
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<f64>> = (0..=n1).map(|_| vec![1.0]).collect();
    for n in 1..=n2 {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n1 + 1);
        cur.push(vec![1.0]);
        for m in 1..=n1 {
            // Largest element from sample one adds n to U; from sample two adds 0.
            let mut c = vec![0.0; m * n + 1];
            for (k, &v) in cur[m - 1].iter().enumerate() {
                c[k + n] += v;
            }
            for (k, &v) in prev[m].iter().enumerate() {
                c[k] += v;
            }
            cur.push(c);
        }
        prev = cur;
    }
    let dist = &prev[n1];
    debug_assert_eq!(dist.len(), max_u + 1);
    let total: f64 = dist.iter().sum();
    let lower: f64 = dist[..=u.min(max_u)].iter().sum::<f64>() / total;
    let upper: f64 = dist[u.min(max_u)..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}
