use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::conv::TAPS;
use super::real::Real;
use crate::error::{Error, Result};

/// Position of each tensor in the flat parameter vector.
pub(crate) mod ix {
    pub const fn enc_w(i: usize) -> usize {
        2 * i
    }
    pub const fn enc_b(i: usize) -> usize {
        2 * i + 1
    }
    pub const MU_W: usize = 6;
    pub const MU_B: usize = 7;
    pub const LV_W: usize = 8;
    pub const LV_B: usize = 9;
    pub const FC_W: usize = 10;
    pub const FC_B: usize = 11;
    /// Decoder block producing level `l` (`l = 2` is the innermost).
    pub const fn dec_w(l: usize) -> usize {
        12 + 2 * (2 - l)
    }
    pub const fn dec_b(l: usize) -> usize {
        13 + 2 * (2 - l)
    }
    pub const COUNT: usize = 18;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tensor names and shapes in declaration order.
pub fn layout(config: &ModelConfig) -> Vec<ParamSpec> {
    let ch = [1, config.channels[0], config.channels[1], config.channels[2]];
    let (l, f) = (config.latent_dim, config.feature_len());
    let mut shapes: Vec<(String, Vec<usize>)> = Vec::with_capacity(ix::COUNT);
    for i in 0..3 {
        shapes.push((format!("encoder.{i}.weight"), vec![ch[i + 1], ch[i], 3, 3, 3]));
        shapes.push((format!("encoder.{i}.bias"), vec![ch[i + 1]]));
    }
    shapes.push(("mu.weight".into(), vec![l, f]));
    shapes.push(("mu.bias".into(), vec![l]));
    shapes.push(("logvar.weight".into(), vec![l, f]));
    shapes.push(("logvar.bias".into(), vec![l]));
    shapes.push(("decoder.fc.weight".into(), vec![f, l]));
    shapes.push(("decoder.fc.bias".into(), vec![f]));
    for lvl in (0..3).rev() {
        shapes.push((format!("decoder.{lvl}.weight"), vec![ch[lvl + 1], ch[lvl], 3, 3, 3]));
        shapes.push((format!("decoder.{lvl}.bias"), vec![ch[lvl]]));
    }
    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, shape)| {
            let spec = ParamSpec { name, shape, offset };
            offset += spec.len();
            spec
        })
        .collect()
}

/// All trainable tensors of the network, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    specs: Vec<ParamSpec>,
    values: Vec<T>,
}

impl<T: Real> Parameters<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let specs = layout(config);
        let n = specs.iter().map(ParamSpec::len).sum();
        Parameters { specs, values: vec![T::zero(); n] }
    }

    /// He-style initialisation from `config.seed`; biases start at zero.
    pub fn init(config: &ModelConfig) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let ch = [1, config.channels[0], config.channels[1], config.channels[2]];
        let (l, f) = (config.latent_dim as f64, config.feature_len() as f64);
        let mut stds = [0.0f64; ix::COUNT];
        for i in 0..3 {
            stds[ix::enc_w(i)] = (2.0 / (ch[i] * TAPS) as f64).sqrt();
            // Each transposed-conv output sees about an eighth of the taps.
            stds[ix::dec_w(i)] = (16.0 / (ch[i + 1] * TAPS) as f64).sqrt();
        }
        stds[ix::MU_W] = (1.0 / f).sqrt();
        stds[ix::LV_W] = 0.1 * (1.0 / f).sqrt();
        stds[ix::FC_W] = (2.0 / l).sqrt();
        for (k, &std) in stds.iter().enumerate() {
            if std == 0.0 {
                continue;
            }
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in p.tensor_mut(k) {
                *v = T::of(normal.sample(&mut rng));
            }
        }
        p
    }

    pub fn from_values(config: &ModelConfig, values: Vec<T>) -> Result<Self> {
        let mut p = Self::zeros(config);
        if values.len() != p.values.len() {
            return Err(Error::LengthMismatch { expected: p.values.len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadCheckpoint("non-finite parameter".into()));
        }
        p.values = values;
        Ok(p)
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, k: usize) -> &[T] {
        let s = &self.specs[k];
        &self.values[s.offset..s.offset + s.len()]
    }

    pub fn tensor_mut(&mut self, k: usize) -> &mut [T] {
        let s = &self.specs[k];
        let range = s.offset..s.offset + s.len();
        &mut self.values[range]
    }

    pub fn cast<U: Real>(&self) -> Parameters<U> {
        Parameters {
            specs: self.specs.clone(),
            values: self.values.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Disjoint mutable views of every tensor in a flat buffer laid out like `specs`.
pub(crate) fn split_mut<'a, T>(specs: &[ParamSpec], mut flat: &'a mut [T]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(specs.len());
    for s in specs {
        let (head, tail) = flat.split_at_mut(s.len());
        out.push(head);
        flat = tail;
    }
    out
}
