use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-component principal projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2d {
    pub coords: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    /// Unit loading vectors of the two components.
    pub components: [Vec<f64>; 2],
    /// Fraction of total variance carried by each component.
    pub explained: [f64; 2],
}

/// Project mean-centred rows onto the two leading covariance eigenvectors.
/// Each component is signed so that its largest-magnitude loading is positive.
pub fn pca2d(x: &[Vec<f64>]) -> Result<Pca2d> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("PCA needs at least 3 samples, got {n}")));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidArgument("rows must share a non-zero dimension".into()));
    }
    let mean: Vec<f64> = (0..d).map(|k| x.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
    let centred = DMatrix::from_fn(n, d, |i, k| x[i][k] - mean[k]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let total = cov.trace();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("data has zero variance".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let component = |rank: usize| -> (Vec<f64>, f64) {
        let Some(&k) = order.get(rank) else {
            return (vec![0.0; d], 0.0);
        };
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        (v, eig.eigenvalues[k].max(0.0) / total)
    };
    let (c0, e0) = component(0);
    let (c1, e1) = component(1);
    let coords = (0..n)
        .map(|i| {
            let row = centred.row(i);
            let dot = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&c0), dot(&c1)]
        })
        .collect();
    Ok(Pca2d { coords, mean, components: [c0, c1], explained: [e0, e1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn planar_data_keeps_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (u, v) = ([1.0, 2.0, 0.0, -1.0], [0.5, -0.5, 3.0, 0.0]);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                (0..4).map(|k| a * u[k] + b * v[k] + 7.0).collect()
            })
            .collect();
        let p = pca2d(&x).unwrap();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        for i in 0..x.len() {
            for j in 0..i {
                assert!((dist(&x[i], &x[j]) - dist(&p.coords[i], &p.coords[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn isotropic_gaussian_explained_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..10_000).map(|_| (0..16).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let p = pca2d(&x).unwrap();
        let top2 = p.explained[0] + p.explained[1];
        assert!((top2 - 2.0 / 16.0).abs() < 0.02, "{top2}");
    }

    #[test]
    fn translation_invariant_and_signed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let shifted: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v + 100.0).collect()).collect();
        let (a, b) = (pca2d(&x).unwrap(), pca2d(&shifted).unwrap());
        for (p, q) in a.coords.iter().zip(&b.coords) {
            assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
        for c in &a.components {
            let lead = c.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(pca2d(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).is_err());
        assert!(pca2d(&[vec![1.0], vec![2.0]]).is_err());
    }
}
