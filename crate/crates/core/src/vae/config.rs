use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Dims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReconKind {
    /// Voxel-summed squared error (fixed-variance Gaussian likelihood).
    #[default]
    SumSquaredError,
}

/// Architecture and optimisation settings of a beta-VAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dims: Dims,
    /// Output channels of the three stride-2 encoder blocks.
    pub channels: [usize; 3],
    pub latent_dim: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub recon_kind: ReconKind,
    /// Half-range in degrees of the per-epoch random rotation of training inputs.
    pub augment_deg: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dims: [32, 32, 40],
            channels: [16, 32, 64],
            latent_dim: 16,
            beta: 2.0,
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            recon_kind: ReconKind::SumSquaredError,
            augment_deg: 10.0,
        }
    }
}

impl ModelConfig {
    pub const KERNEL: usize = 3;
    pub const STRIDE: usize = 2;
    pub const DEPTH: usize = 3;

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.input_dims.iter().any(|&d| d == 0 || d % 8 != 0) {
            return bad(format!("input dims {:?} must be positive multiples of 8", self.input_dims));
        }
        if self.channels.contains(&0) {
            return bad("channel counts must be positive".into());
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1".into());
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta must be finite and non-negative, got {}", self.beta));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.augment_deg.is_finite() && self.augment_deg >= 0.0) {
            return bad("augment_deg must be finite and non-negative".into());
        }
        Ok(())
    }

    /// Spatial dims after each encoder block.
    pub fn level_dims(&self) -> [Dims; 4] {
        let mut out = [self.input_dims; 4];
        for i in 1..4 {
            out[i] = out[i - 1].map(|d| d / 2);
        }
        out
    }

    /// Length of the flattened deepest feature map.
    pub fn feature_len(&self) -> usize {
        self.channels[2] * self.level_dims()[3].iter().product::<usize>()
    }
}
