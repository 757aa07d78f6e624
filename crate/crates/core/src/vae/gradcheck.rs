use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::Vae;
use crate::error::{Error, Result};
use crate::preprocess::NormalizedMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Number of randomly chosen parameters to probe.
    pub samples: usize,
    pub seed: u64,
    /// Multiplier applied to the analytic gradient; anything but 1 is an injected fault.
    pub grad_scale: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-3, samples: 64, seed: 0, grad_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(parameter index, analytic, numeric)` for every probe.
    pub probes: Vec<(usize, f64, f64)>,
}

/// Relative discrepancy with denominator `max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compare analytic gradients of the total loss to central finite differences.
pub fn grad_check(vae: &Vae<f64>, x: &NormalizedMap, eps: &[f64], opts: &GradCheckOptions) -> Result<GradCheck> {
    let beta = vae.config().beta;
    let (_, grad) = vae.loss_and_grad(x, eps, beta)?;
    let n = grad.len();
    if opts.samples == 0 || opts.samples > n {
        return Err(Error::InvalidArgument(format!("cannot probe {} of {n} parameters", opts.samples)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut picks = sample(&mut rng, n, opts.samples).into_vec();
    picks.sort_unstable();
    let mut probe = vae.clone();
    let mut probes = Vec::with_capacity(picks.len());
    let mut max_rel_error = 0.0f64;
    for k in picks {
        let orig = probe.params().values()[k];
        probe.params_mut().values_mut()[k] = orig + opts.step;
        let up = probe.loss(x, eps, beta)?.total;
        probe.params_mut().values_mut()[k] = orig - opts.step;
        let down = probe.loss(x, eps, beta)?.total;
        probe.params_mut().values_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * opts.step);
        let analytic = grad[k] * opts.grad_scale;
        max_rel_error = max_rel_error.max(relative_error(analytic, numeric));
        probes.push((k, analytic, numeric));
    }
    Ok(GradCheck { max_rel_error, probes })
}
