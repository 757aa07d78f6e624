use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::conv::{conv_backward, conv_forward, conv_t_backward, conv_t_forward, ConvGeom, TAPS};
use super::params::{ix, split_mut, Parameters};
use super::real::{rm, tr, Real};
use crate::error::{Error, Result};
use crate::grid::ScalarGrid;
use crate::preprocess::NormalizedMap;

/// Negative-side slope of the rectifier activations.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Parameters of the approximate posterior `q(z|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl LatentCode {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Components of the minimised objective.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossParts {
    pub fn new(recon: f64, kl: f64, beta: f64) -> Self {
        LossParts { recon, kl, total: recon + beta * kl }
    }
}

/// `z = mu + exp(logvar / 2) * eps`.
pub fn reparameterize(code: &LatentCode, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != code.len() {
        return Err(Error::LengthMismatch { expected: code.len(), found: eps.len() });
    }
    Ok(code
        .mu
        .iter()
        .zip(&code.logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// KL divergence from `N(mu, exp(logvar))` to the standard normal prior.
pub fn kl_divergence(code: &LatentCode) -> f64 {
    kl_terms(&code.mu, &code.logvar)
}

fn kl_terms<T: Real>(mu: &[T], logvar: &[T]) -> f64 {
    let s: f64 = mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| {
            let (m, lv) = (m.f64(), lv.f64());
            // exp_m1 keeps small-variance terms accurate and the sum non-negative.
            (lv.exp_m1() - lv) + m * m
        })
        .sum();
    0.5 * s
}

#[inline]
fn lrelu<T: Real>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * T::of(LEAKY_SLOPE)
    }
}

#[inline]
fn lrelu_grad<T: Real>(pre: T) -> T {
    if pre > T::zero() {
        T::one()
    } else {
        T::of(LEAKY_SLOPE)
    }
}

#[inline]
fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Fixed network geometry derived from a [`ModelConfig`].
#[derive(Debug, Clone)]
pub(crate) struct Topology {
    pub ch: [usize; 4],
    pub geoms: [ConvGeom; 3],
    pub tables: [Vec<usize>; 3],
    pub latent: usize,
    pub features: usize,
}

impl Topology {
    pub fn new(config: &ModelConfig) -> Self {
        let dims = config.level_dims();
        let geoms = [ConvGeom::new(dims[0]), ConvGeom::new(dims[1]), ConvGeom::new(dims[2])];
        Topology {
            ch: [1, config.channels[0], config.channels[1], config.channels[2]],
            tables: [geoms[0].gather_table(), geoms[1].gather_table(), geoms[2].gather_table()],
            geoms,
            latent: config.latent_dim,
            features: config.feature_len(),
        }
    }

    fn big(&self, level: usize) -> usize {
        if level == 3 {
            self.geoms[2].small_len()
        } else {
            self.geoms[level].big_len()
        }
    }
}

/// Activation buffers of one forward/backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Workspace<T> {
    x: Vec<T>,
    cols: [Vec<T>; 3],
    scratch: [Vec<T>; 3],
    enc_pre: [Vec<T>; 3],
    enc_act: [Vec<T>; 3],
    mu: Vec<T>,
    logvar: Vec<T>,
    eps: Vec<T>,
    z: Vec<T>,
    fc_pre: Vec<T>,
    fc_act: Vec<T>,
    dec_pre: [Vec<T>; 3],
    dec_act: [Vec<T>; 3],
    // Gradient buffers.
    d_enc: [Vec<T>; 3],
    d_dec: [Vec<T>; 3],
    d_fc: Vec<T>,
    d_z: Vec<T>,
    d_mu: Vec<T>,
    d_logvar: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new(t: &Topology) -> Self {
        let z = |n: usize| vec![T::zero(); n];
        let cols = || std::array::from_fn(|i| z(t.ch[i] * TAPS * t.geoms[i].small_len()));
        let enc = || std::array::from_fn(|i| z(t.ch[i + 1] * t.big(i + 1)));
        let dec = || std::array::from_fn(|l| z(t.ch[l] * t.big(l)));
        Workspace {
            x: z(t.big(0)),
            cols: cols(),
            scratch: cols(),
            enc_pre: enc(),
            enc_act: enc(),
            mu: z(t.latent),
            logvar: z(t.latent),
            eps: z(t.latent),
            z: z(t.latent),
            fc_pre: z(t.features),
            fc_act: z(t.features),
            dec_pre: dec(),
            dec_act: dec(),
            d_enc: enc(),
            d_dec: dec(),
            d_fc: z(t.features),
            d_z: z(t.latent),
            d_mu: z(t.latent),
            d_logvar: z(t.latent),
        }
    }
}

fn linear<T: Real>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let (m, k) = (out.len(), x.len());
    out.copy_from_slice(b);
    T::gemm(m, k, 1, T::one(), w, rm(k), x, (1, 1), T::one(), out, (1, 1));
}

/// `out = w^T x` for a row-major `w` of shape `[x.len()][out.len()]`.
fn linear_t<T: Real>(w: &[T], x: &[T], beta: T, out: &mut [T]) {
    let (n, m) = (out.len(), x.len());
    T::gemm(n, m, 1, T::one(), w, tr(n), x, (1, 1), beta, out, (1, 1));
}

/// `dw += d * x^T` for `dw` of shape `[d.len()][x.len()]`.
fn outer_acc<T: Real>(d: &[T], x: &[T], dw: &mut [T]) {
    let (m, n) = (d.len(), x.len());
    T::gemm(m, 1, n, T::one(), d, (1, 1), x, (1, 1), T::one(), dw, rm(n));
}

/// Weight and bias gradient views of the layer whose weight sits at `k`.
fn pair<'b, T>(g: &'b mut [&mut [T]], k: usize) -> (&'b mut [T], &'b mut [T]) {
    let (w, rest) = g[k..].split_at_mut(1);
    (&mut *w[0], &mut *rest[0])
}

/// A beta-VAE: configuration, topology and parameters.
#[derive(Debug, Clone)]
pub struct Vae<T: Real = f32> {
    config: ModelConfig,
    params: Parameters<T>,
    topo: Topology,
}

impl<T: Real> Vae<T> {
    /// Freshly initialised network seeded by `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config);
        Ok(Self::assemble(config, params))
    }

    pub fn with_parameters(config: ModelConfig, params: Parameters<T>) -> Result<Self> {
        config.validate()?;
        let expect = Parameters::<T>::zeros(&config);
        if expect.specs() != params.specs() {
            return Err(Error::BadCheckpoint("parameter shapes do not match the configuration".into()));
        }
        Ok(Self::assemble(config, params))
    }

    fn assemble(config: ModelConfig, params: Parameters<T>) -> Self {
        let topo = Topology::new(&config);
        Vae { config, params, topo }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters<T> {
        &mut self.params
    }

    pub fn into_params(self) -> Parameters<T> {
        self.params
    }

    pub(crate) fn workspace(&self) -> Workspace<T> {
        Workspace::new(&self.topo)
    }

    fn check_input(&self, x: &NormalizedMap) -> Result<()> {
        if x.dims() != self.config.input_dims {
            return Err(Error::DimsMismatch { what: "model input", expected: self.config.input_dims, actual: x.dims() });
        }
        Ok(())
    }

    pub(crate) fn load_input(&self, x: &NormalizedMap, ws: &mut Workspace<T>) -> Result<()> {
        self.check_input(x)?;
        for (d, &v) in ws.x.iter_mut().zip(x.grid().data()) {
            *d = T::of(v as f64);
        }
        Ok(())
    }

    fn forward_encoder(&self, ws: &mut Workspace<T>) {
        let t = &self.topo;
        let p = &self.params;
        for i in 0..3 {
            let input: &[T] = if i == 0 { &ws.x } else { &ws.enc_act[i - 1] };
            conv_forward(
                input,
                t.ch[i],
                t.ch[i + 1],
                p.tensor(ix::enc_w(i)),
                p.tensor(ix::enc_b(i)),
                &t.geoms[i],
                &t.tables[i],
                &mut ws.cols[i],
                &mut ws.enc_pre[i],
            );
            for (a, &v) in ws.enc_act[i].iter_mut().zip(&ws.enc_pre[i]) {
                *a = lrelu(v);
            }
        }
        linear(p.tensor(ix::MU_W), p.tensor(ix::MU_B), &ws.enc_act[2], &mut ws.mu);
        linear(p.tensor(ix::LV_W), p.tensor(ix::LV_B), &ws.enc_act[2], &mut ws.logvar);
    }

    fn forward_decoder(&self, ws: &mut Workspace<T>) {
        let t = &self.topo;
        let p = &self.params;
        linear(p.tensor(ix::FC_W), p.tensor(ix::FC_B), &ws.z, &mut ws.fc_pre);
        for (a, &v) in ws.fc_act.iter_mut().zip(&ws.fc_pre) {
            *a = lrelu(v);
        }
        for l in (0..3).rev() {
            let (lower, upper) = ws.dec_act.split_at_mut(l + 1);
            let input: &[T] = if l == 2 { &ws.fc_act } else { &upper[0] };
            conv_t_forward(
                input,
                t.ch[l + 1],
                t.ch[l],
                p.tensor(ix::dec_w(l)),
                p.tensor(ix::dec_b(l)),
                &t.geoms[l],
                &t.tables[l],
                &mut ws.scratch[l],
                &mut ws.dec_pre[l],
            );
            let out = &mut lower[l];
            if l == 0 {
                for (a, &v) in out.iter_mut().zip(&ws.dec_pre[l]) {
                    *a = sigmoid(v);
                }
            } else {
                for (a, &v) in out.iter_mut().zip(&ws.dec_pre[l]) {
                    *a = lrelu(v);
                }
            }
        }
    }

    fn sample_z(ws: &mut Workspace<T>) {
        for i in 0..ws.z.len() {
            ws.z[i] = ws.mu[i] + (ws.logvar[i] * T::of(0.5)).exp() * ws.eps[i];
        }
    }

    fn recon_sse(ws: &Workspace<T>) -> f64 {
        ws.x.iter().zip(&ws.dec_act[0]).map(|(&a, &b)| (a - b).f64().powi(2)).sum()
    }

    /// Forward pass on the loaded input with noise `eps`.
    pub(crate) fn forward(&self, ws: &mut Workspace<T>, eps: &[T]) -> LossParts {
        ws.eps.copy_from_slice(eps);
        self.forward_encoder(ws);
        Self::sample_z(ws);
        self.forward_decoder(ws);
        LossParts::new(Self::recon_sse(ws), kl_terms(&ws.mu, &ws.logvar), self.config.beta)
    }

    /// Forward and backward pass; gradients of the total loss are added to `grad`.
    pub(crate) fn forward_backward(&self, ws: &mut Workspace<T>, eps: &[T], beta: f64, grad: &mut [T]) -> LossParts {
        ws.eps.copy_from_slice(eps);
        self.forward_encoder(ws);
        Self::sample_z(ws);
        self.forward_decoder(ws);
        let parts = LossParts::new(Self::recon_sse(ws), kl_terms(&ws.mu, &ws.logvar), beta);
        self.backward(ws, T::of(beta), grad);
        parts
    }

    fn backward(&self, ws: &mut Workspace<T>, beta: T, grad: &mut [T]) {
        let t = &self.topo;
        let p = &self.params;
        let mut g = split_mut(p.specs(), grad);
        let two = T::of(2.0);
        for ((d, &xh), &x) in ws.d_dec[0].iter_mut().zip(&ws.dec_act[0]).zip(&ws.x) {
            *d = two * (xh - x) * xh * (T::one() - xh);
        }
        for l in 0..3 {
            let (dw, db) = pair(&mut g, ix::dec_w(l));
            let (d_lower, d_upper) = ws.d_dec.split_at_mut(l + 1);
            let input: &[T] = if l == 2 { &ws.fc_act } else { &ws.dec_act[l + 1] };
            let d_in: &mut [T] = if l == 2 { &mut ws.d_fc } else { &mut d_upper[0] };
            conv_t_backward(
                &d_lower[l],
                input,
                t.ch[l + 1],
                t.ch[l],
                p.tensor(ix::dec_w(l)),
                &t.geoms[l],
                &t.tables[l],
                &mut ws.scratch[l],
                dw,
                db,
                Some(&mut *d_in),
            );
            let pre: &[T] = if l == 2 { &ws.fc_pre } else { &ws.dec_pre[l + 1] };
            for (d, &v) in d_in.iter_mut().zip(pre) {
                *d *= lrelu_grad(v);
            }
        }
        outer_acc(&ws.d_fc, &ws.z, g[ix::FC_W]);
        for (b, &d) in g[ix::FC_B].iter_mut().zip(&ws.d_fc) {
            *b += d;
        }
        linear_t(p.tensor(ix::FC_W), &ws.d_fc, T::zero(), &mut ws.d_z);

        let half = T::of(0.5);
        for i in 0..ws.mu.len() {
            let sd = (ws.logvar[i] * half).exp();
            ws.d_mu[i] = ws.d_z[i] + beta * ws.mu[i];
            ws.d_logvar[i] = ws.d_z[i] * half * sd * ws.eps[i] + beta * half * (sd * sd - T::one());
        }
        outer_acc(&ws.d_mu, &ws.enc_act[2], g[ix::MU_W]);
        outer_acc(&ws.d_logvar, &ws.enc_act[2], g[ix::LV_W]);
        for i in 0..ws.mu.len() {
            g[ix::MU_B][i] += ws.d_mu[i];
            g[ix::LV_B][i] += ws.d_logvar[i];
        }
        linear_t(p.tensor(ix::MU_W), &ws.d_mu, T::zero(), &mut ws.d_enc[2]);
        linear_t(p.tensor(ix::LV_W), &ws.d_logvar, T::one(), &mut ws.d_enc[2]);

        for i in (0..3).rev() {
            for (d, &v) in ws.d_enc[i].iter_mut().zip(&ws.enc_pre[i]) {
                *d *= lrelu_grad(v);
            }
            let (dw, db) = pair(&mut g, ix::enc_w(i));
            let (d_lower, d_upper) = ws.d_enc.split_at_mut(i);
            let d_input = if i > 0 { Some((&mut d_lower[i - 1][..], &mut ws.scratch[i][..])) } else { None };
            conv_backward(
                &d_upper[0],
                t.ch[i],
                t.ch[i + 1],
                p.tensor(ix::enc_w(i)),
                &ws.cols[i],
                &t.geoms[i],
                &t.tables[i],
                dw,
                db,
                d_input,
            );
        }
    }

    /// Posterior parameters for `x`.
    pub fn encode(&self, x: &NormalizedMap) -> Result<LatentCode> {
        let mut ws = self.workspace();
        self.load_input(x, &mut ws)?;
        self.forward_encoder(&mut ws);
        Ok(LatentCode {
            mu: ws.mu.iter().map(|v| v.f64()).collect(),
            logvar: ws.logvar.iter().map(|v| v.f64()).collect(),
        })
    }

    /// Decoder output for latent vector `z`, values in `[0, 1]`.
    pub fn decode(&self, z: &[f64]) -> Result<NormalizedMap> {
        if z.len() != self.config.latent_dim {
            return Err(Error::LengthMismatch { expected: self.config.latent_dim, found: z.len() });
        }
        let mut ws = self.workspace();
        for (d, &v) in ws.z.iter_mut().zip(z) {
            *d = T::of(v);
        }
        self.forward_decoder(&mut ws);
        let data = ws.dec_act[0].iter().map(|v| v.f64() as f32).collect();
        Ok(NormalizedMap(ScalarGrid::from_vec(self.config.input_dims, [1.0; 3], data)?))
    }

    /// Objective for `x` with noise `eps` and weight `beta`.
    pub fn loss(&self, x: &NormalizedMap, eps: &[f64], beta: f64) -> Result<LossParts> {
        if eps.len() != self.config.latent_dim {
            return Err(Error::LengthMismatch { expected: self.config.latent_dim, found: eps.len() });
        }
        let mut ws = self.workspace();
        self.load_input(x, &mut ws)?;
        let eps: Vec<T> = eps.iter().map(|&e| T::of(e)).collect();
        let parts = self.forward(&mut ws, &eps);
        Ok(LossParts::new(parts.recon, parts.kl, beta))
    }

    /// Loss and its gradient with respect to every parameter (flat, in declaration order).
    pub fn loss_and_grad(&self, x: &NormalizedMap, eps: &[f64], beta: f64) -> Result<(LossParts, Vec<T>)> {
        if eps.len() != self.config.latent_dim {
            return Err(Error::LengthMismatch { expected: self.config.latent_dim, found: eps.len() });
        }
        let mut ws = self.workspace();
        self.load_input(x, &mut ws)?;
        let eps: Vec<T> = eps.iter().map(|&e| T::of(e)).collect();
        let mut grad = vec![T::zero(); self.params.len()];
        let parts = self.forward_backward(&mut ws, &eps, beta, &mut grad);
        Ok((parts, grad))
    }

    /// Squared error between `x` and the decoding of its posterior mean.
    pub fn reconstruction_error(&self, x: &NormalizedMap) -> Result<f64> {
        let mut ws = self.workspace();
        self.load_input(x, &mut ws)?;
        let zero = vec![T::zero(); self.config.latent_dim];
        ws.eps.copy_from_slice(&zero);
        self.forward_encoder(&mut ws);
        ws.z.copy_from_slice(&ws.mu);
        self.forward_decoder(&mut ws);
        Ok(Self::recon_sse(&ws))
    }

    /// Decoding of the posterior mean of `x`.
    pub fn reconstruct(&self, x: &NormalizedMap) -> Result<NormalizedMap> {
        let code = self.encode(x)?;
        self.decode(&code.mu)
    }
}
