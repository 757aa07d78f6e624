use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{LossParts, Vae};
use crate::error::{Error, Result};
use crate::preprocess::{apply_mask, augment, CropMask, NormalizedMap};
use crate::rng::{derive_seed, stream};

/// Adaptive-moment optimiser state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<f32>,
    v: Vec<f32>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn update(&mut self, params: &mut [f32], grad: &[f32]) {
        self.step += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let lr = (self.lr * c2.sqrt() / c1) as f32;
        let eps = (self.eps * c2.sqrt()) as f32;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * *m / (v.sqrt() + eps);
        }
    }
}

/// Mean losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub train: LossParts,
    pub val: Option<LossParts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub wall_time_s: f64,
    pub epochs: Vec<EpochLosses>,
}

impl TrainReport {
    pub fn first(&self) -> Option<&EpochLosses> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochLosses> {
        self.epochs.last()
    }

    /// Rows `epoch,recon,kl,total,split`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,recon,kl,total,split\n");
        for e in &self.epochs {
            let rows = [(Some(e.train), "train"), (e.val, "val")];
            for (parts, split) in rows {
                if let Some(p) = parts {
                    let _ = writeln!(out, "{},{},{},{},{}", e.epoch, p.recon, p.kl, p.total, split);
                }
            }
        }
        out
    }
}

/// Training inputs. With a mask, `inputs` are unmasked crops that get a fresh
/// random rotation and masking every epoch; without one they are used as given.
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a> {
    pub inputs: &'a [NormalizedMap],
    pub mask: Option<&'a CropMask>,
}

fn mean_parts(sum: LossParts, n: usize) -> LossParts {
    let n = n as f64;
    LossParts { recon: sum.recon / n, kl: sum.kl / n, total: sum.total / n }
}

fn add_parts(a: &mut LossParts, b: LossParts) {
    a.recon += b.recon;
    a.kl += b.kl;
    a.total += b.total;
}

/// Mean loss with the posterior mean as latent (`eps = 0`).
pub fn evaluate(vae: &Vae<f32>, inputs: &[NormalizedMap]) -> Result<LossParts> {
    if inputs.is_empty() {
        return Err(Error::InsufficientData("empty evaluation set".into()));
    }
    let zero = vec![0.0; vae.config().latent_dim];
    let mut sum = LossParts::default();
    for x in inputs {
        add_parts(&mut sum, vae.loss(x, &zero, vae.config().beta)?);
    }
    Ok(mean_parts(sum, inputs.len()))
}

/// Train a fresh network; see [`train_with`].
pub fn train(config: &ModelConfig, train: TrainSet<'_>, val: &[NormalizedMap]) -> Result<(Vae<f32>, TrainReport)> {
    train_with(config, train, val, |_| {})
}

/// Minibatch Adam on the batch-mean total loss. Deterministic for a given
/// seed: the batch order comes from a seeded permutation per epoch, each
/// sample's augmentation has its own stream, and gradients are reduced in
/// batch order. `progress` is called after every epoch.
pub fn train_with(
    config: &ModelConfig,
    train: TrainSet<'_>,
    val: &[NormalizedMap],
    mut progress: impl FnMut(&EpochLosses),
) -> Result<(Vae<f32>, TrainReport)> {
    config.validate()?;
    if train.inputs.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let start = Instant::now();
    let mut vae = Vae::<f32>::new(config.clone())?;
    let n_params = vae.params().len();
    let mut adam = Adam::new(n_params, config.learning_rate);
    let mut ws = vae.workspace();
    let mut grad = vec![0.0f32; n_params];
    let mut order: Vec<usize> = (0..train.inputs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, u64::MAX));
    let mut eps = vec![0.0f32; config.latent_dim];
    let val: Vec<NormalizedMap> = match train.mask {
        Some(m) => val.iter().map(|x| apply_mask(x, &m.mask)).collect::<Result<_>>()?,
        None => val.to_vec(),
    };
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let epoch_seed = derive_seed(config.seed, epoch as u64);
        let mut sum = LossParts::default();
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            grad.fill(0.0);
            for &i in batch {
                let x = match train.mask {
                    Some(m) if config.augment_deg > 0.0 => {
                        augment(&train.inputs[i], m, config.augment_deg, &mut stream(epoch_seed, i as u64))?
                    }
                    Some(m) => apply_mask(&train.inputs[i], &m.mask)?,
                    None => train.inputs[i].clone(),
                };
                vae.load_input(&x, &mut ws)?;
                for e in eps.iter_mut() {
                    *e = StandardNormal.sample(&mut rng);
                }
                let parts = vae.forward_backward(&mut ws, &eps, config.beta, &mut grad);
                if !parts.total.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: batch_idx, loss: parts.total });
                }
                add_parts(&mut sum, parts);
            }
            let scale = 1.0 / batch.len() as f32;
            grad.iter_mut().for_each(|g| *g *= scale);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_idx, loss: f64::NAN });
            }
            adam.update(vae.params_mut().values_mut(), &grad);
        }
        let record = EpochLosses {
            epoch,
            train: mean_parts(sum, train.inputs.len()),
            val: if val.is_empty() { None } else { Some(evaluate(&vae, &val)?) },
        };
        progress(&record);
        epochs.push(record);
    }
    let report = TrainReport { seed: config.seed, wall_time_s: start.elapsed().as_secs_f64(), epochs };
    Ok((vae, report))
}
