use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Vae;
use super::train::{train, TrainSet};
use crate::detect::{linear_svm_cv, SvmOptions};
use crate::error::{Error, Result};
use crate::preprocess::{apply_mask, NormalizedMap};
use crate::rng::{derive_seed, stream};

/// Validation reconstruction error may exceed the grid minimum by at most this factor.
pub const RECON_GATE: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub beta: f64,
    pub latent_dim: usize,
    /// Mean posterior-mean reconstruction error over the validation set.
    pub val_recon: f64,
    /// Cross-validated latent SVM AUC, validation vs proxy outliers.
    pub auc: f64,
    pub passes_gate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best: ModelConfig,
    pub best_index: usize,
    pub table: Vec<GridEntry>,
}

/// Marks gate-passing entries and returns the index of the highest-AUC one.
/// Ties go to the earlier entry.
pub fn select_entry(table: &mut [GridEntry]) -> Result<usize> {
    let min = table
        .iter()
        .map(|e| e.val_recon)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::InsufficientData("empty grid".into()));
    }
    let mut best: Option<usize> = None;
    for i in 0..table.len() {
        table[i].passes_gate = table[i].val_recon <= RECON_GATE * min;
        if table[i].passes_gate && best.is_none_or(|b| table[i].auc > table[b].auc) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::InsufficientData("no grid entry passes the reconstruction gate".into()))
}

/// Trains one model per (beta, latent size) pair and picks the configuration
/// whose latent codes best separate `proxy` from `val`, among those whose
/// validation reconstruction error is within [`RECON_GATE`] of the best.
pub fn grid_search(
    base: &ModelConfig,
    betas: &[f64],
    latent_dims: &[usize],
    train_set: TrainSet<'_>,
    val: &[NormalizedMap],
    proxy: &[NormalizedMap],
    svm: &SvmOptions,
) -> Result<GridSearch> {
    if betas.is_empty() || latent_dims.is_empty() {
        return Err(Error::InvalidArgument("grid search needs at least one beta and one latent size".into()));
    }
    if proxy.is_empty() || val.is_empty() {
        return Err(Error::InsufficientData("grid search needs validation and proxy outlier samples".into()));
    }
    let masked = |xs: &[NormalizedMap]| -> Result<Vec<NormalizedMap>> {
        match train_set.mask {
            Some(m) => xs.iter().map(|x| apply_mask(x, &m.mask)).collect(),
            None => Ok(xs.to_vec()),
        }
    };
    let val_m = masked(val)?;
    let proxy_m = masked(proxy)?;
    let mut configs = Vec::new();
    let mut table = Vec::new();
    for &beta in betas {
        for &latent_dim in latent_dims {
            let config = ModelConfig { beta, latent_dim, ..base.clone() };
            let (vae, _) = train(&config, TrainSet { inputs: train_set.inputs, mask: train_set.mask }, val)?;
            let val_recon = mean_recon(&vae, &val_m)?;
            let auc = separation_auc(&vae, &val_m, &proxy_m, svm, derive_seed(config.seed, table.len() as u64))?;
            table.push(GridEntry { beta, latent_dim, val_recon, auc, passes_gate: false });
            configs.push(config);
        }
    }
    let best_index = select_entry(&mut table)?;
    Ok(GridSearch { best: configs[best_index].clone(), best_index, table })
}

fn mean_recon(vae: &Vae<f32>, xs: &[NormalizedMap]) -> Result<f64> {
    let mut sum = 0.0;
    for x in xs {
        sum += vae.reconstruction_error(x)?;
    }
    Ok(sum / xs.len() as f64)
}

fn separation_auc(vae: &Vae<f32>, val: &[NormalizedMap], proxy: &[NormalizedMap], svm: &SvmOptions, seed: u64) -> Result<f64> {
    let mut codes = Vec::with_capacity(val.len() + proxy.len());
    let mut labels = Vec::with_capacity(codes.capacity());
    for (xs, label) in [(val, false), (proxy, true)] {
        for x in xs {
            codes.push(vae.encode(x)?.mu);
            labels.push(label);
        }
    }
    Ok(linear_svm_cv(&codes, &labels, svm, &mut stream(seed, 0))?.auc())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(val_recon: f64, auc: f64) -> GridEntry {
        GridEntry { beta: 1.0, latent_dim: 4, val_recon, auc, passes_gate: false }
    }

    #[test]
    fn single_entry_wins() {
        let mut t = vec![entry(10.0, 0.3)];
        assert_eq!(select_entry(&mut t).unwrap(), 0);
        assert!(t[0].passes_gate);
    }

    #[test]
    fn gate_breaks_auc_tie() {
        let mut t = vec![entry(20.0, 0.8), entry(10.0, 0.8)];
        assert_eq!(select_entry(&mut t).unwrap(), 1);
        assert!(!t[0].passes_gate);
    }

    #[test]
    fn gate_is_inclusive_and_argmax_holds() {
        let mut t = vec![entry(10.0, 0.6), entry(12.5, 0.9), entry(12.6, 0.99), entry(11.0, 0.7)];
        let best = select_entry(&mut t).unwrap();
        assert_eq!(best, 1);
        assert!(t.iter().filter(|e| e.passes_gate).all(|e| e.auc <= t[best].auc));
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(select_entry(&mut []).is_err());
    }
}
