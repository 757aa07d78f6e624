use foldscan_core::grid::ScalarGrid;
use foldscan_core::preprocess::NormalizedMap;
use foldscan_core::vae::{grad_check, kl_divergence, reparameterize, GradCheckOptions, LatentCode, ModelConfig, Parameters, Vae};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config() -> ModelConfig {
    ModelConfig { input_dims: [8, 8, 8], channels: [2, 2, 2], latent_dim: 2, beta: 2.0, seed: 5, ..Default::default() }
}

fn random_map(dims: [usize; 3], seed: u64) -> NormalizedMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    NormalizedMap(ScalarGrid::from_vec(dims, [1.0; 3], (0..n).map(|_| rng.gen::<f32>()).collect()).unwrap())
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let vae = Vae::<f64>::new(tiny_config()).unwrap();
    let x = random_map([8, 8, 8], 1);
    let eps = [0.3, -0.7];
    let check = grad_check(&vae, &x, &eps, &GradCheckOptions { samples: 80, ..Default::default() }).unwrap();
    assert!(check.probes.len() >= 50);
    assert!(check.max_rel_error < 1e-4, "max relative error {}", check.max_rel_error);
}

#[test]
fn gradient_check_detects_scaled_gradients() {
    let vae = Vae::<f64>::new(tiny_config()).unwrap();
    let x = random_map([8, 8, 8], 2);
    let opts = GradCheckOptions { samples: 60, grad_scale: 1.01, ..Default::default() };
    let check = grad_check(&vae, &x, &[0.1, 0.2], &opts).unwrap();
    assert!(check.max_rel_error > 1e-3, "max relative error {}", check.max_rel_error);
}

#[test]
fn zero_network_has_zero_gradients_off_bias_paths() {
    let cfg = tiny_config();
    let vae = Vae::<f64>::with_parameters(cfg.clone(), Parameters::zeros(&cfg)).unwrap();
    let x = NormalizedMap(ScalarGrid::filled([8, 8, 8], [1.0; 3], 0.0).unwrap());
    let n = vae.params().len();
    let check = grad_check(&vae, &x, &[0.0, 0.0], &GradCheckOptions { samples: n, ..Default::default() }).unwrap();
    let specs = vae.params().specs();
    let mut weights = 0;
    for &(k, a, n) in &check.probes {
        let spec = specs.iter().rfind(|s| s.offset <= k).unwrap();
        if spec.name.ends_with("weight") {
            weights += 1;
            assert!(a.abs() < 1e-12 && n.abs() < 1e-12, "{}: analytic {a} numeric {n}", spec.name);
        }
    }
    assert!(weights >= 50);
}

#[test]
fn zero_input_and_zero_biases_encode_to_prior() {
    let cfg = ModelConfig { seed: 9, ..tiny_config() };
    let mut vae = Vae::<f32>::new(cfg).unwrap();
    // Zero every bias, keep random weights.
    let specs = vae.params().specs().to_vec();
    for s in specs.iter().filter(|s| s.name.ends_with("bias")) {
        vae.params_mut().values_mut()[s.offset..s.offset + s.len()].fill(0.0);
    }
    let code = vae.encode(&NormalizedMap(ScalarGrid::filled([8, 8, 8], [1.0; 3], 0.0).unwrap())).unwrap();
    assert!(code.mu.iter().chain(&code.logvar).all(|&v| v == 0.0));
}

#[test]
fn encode_is_deterministic_and_checks_dims() {
    let vae = Vae::<f32>::new(tiny_config()).unwrap();
    let x = random_map([8, 8, 8], 3);
    assert_eq!(vae.encode(&x).unwrap(), vae.encode(&x).unwrap());
    assert!(vae.encode(&random_map([8, 8, 16], 3)).is_err());
}

#[test]
fn decoder_output_is_in_unit_interval() {
    let vae = Vae::<f32>::new(tiny_config()).unwrap();
    for z in [[0.0, 0.0], [50.0, -80.0], [-1e4, 1e4]] {
        let out = vae.decode(&z).unwrap();
        assert!(out.grid().data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn loss_decomposes_exactly() {
    let vae = Vae::<f32>::new(tiny_config()).unwrap();
    let x = random_map([8, 8, 8], 4);
    let eps = [0.5, -1.5];
    let b0 = vae.loss(&x, &eps, 0.0).unwrap();
    assert_eq!(b0.total, b0.recon);
    let b2 = vae.loss(&x, &eps, 2.0).unwrap();
    assert!((b2.total - b2.recon - 2.0 * b2.kl).abs() <= 1e-12 * b2.total.abs());
    assert_eq!(b2.recon, b0.recon);
}

#[test]
fn reconstruction_error_uses_posterior_mean() {
    let vae = Vae::<f32>::new(tiny_config()).unwrap();
    let x = random_map([8, 8, 8], 6);
    let err = vae.reconstruction_error(&x).unwrap();
    assert_eq!(err, vae.loss(&x, &[0.0, 0.0], 0.0).unwrap().recon);
    let rec = vae.reconstruct(&x).unwrap();
    let direct: f64 = x.grid().data().iter().zip(rec.grid().data()).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum();
    assert!((direct - err).abs() < 1e-3 * err);
    // A perfect reconstruction has zero error.
    assert_eq!(vae.reconstruction_error(&rec).unwrap() == 0.0, vae.reconstruct(&rec).unwrap() == rec);
}

#[test]
fn kl_closed_form_values() {
    let zero = LatentCode { mu: vec![0.0; 4], logvar: vec![0.0; 4] };
    assert_eq!(kl_divergence(&zero), 0.0);
    let one = LatentCode { mu: vec![1.0], logvar: vec![0.0] };
    assert!((kl_divergence(&one) - 0.5).abs() < 1e-15);
}

/// KL(N(m, s^2) || N(0, 1)) by Gauss-Hermite-free trapezoid quadrature of q log(q/p).
fn kl_quadrature(mu: f64, logvar: f64) -> f64 {
    let s = (0.5 * logvar).exp();
    let (lo, hi) = (mu - 12.0 * s, mu + 12.0 * s);
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let lq = -0.5 * ((x - mu) / s).powi(2) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let lp = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * lq.exp() * (lq - lp);
    }
    acc * h
}

#[test]
fn kl_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let mu: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let logvar: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..1.5)).collect();
        let oracle: f64 = mu.iter().zip(&logvar).map(|(&m, &lv)| kl_quadrature(m, lv)).sum();
        let code = LatentCode { mu, logvar };
        assert!((kl_divergence(&code) - oracle).abs() < 1e-6, "{} vs {oracle}", kl_divergence(&code));
    }
}

#[test]
fn reparameterize_examples() {
    let code = LatentCode { mu: vec![0.5, -1.0, 2.0], logvar: vec![0.0, 0.0, 0.0] };
    assert_eq!(reparameterize(&code, &[0.0; 3]).unwrap(), code.mu);
    assert_eq!(reparameterize(&code, &[0.0, 1.0, 0.0]).unwrap(), vec![0.5, 0.0, 2.0]);
    assert!(reparameterize(&code, &[0.0; 2]).is_err());
}

#[test]
fn reparameterized_samples_have_posterior_moments() {
    use rand_distr::{Distribution, StandardNormal};
    let code = LatentCode { mu: vec![1.5, -0.5], logvar: vec![0.8, -1.2] };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 10_000;
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let eps: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            reparameterize(&code, &eps).unwrap()
        })
        .collect();
    for d in 0..2 {
        let sd = (0.5 * code.logvar[d]).exp();
        let mean = draws.iter().map(|z| z[d]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|z| (z[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = sd / (n as f64).sqrt();
        let se_sd = sd / (2.0 * (n as f64 - 1.0)).sqrt();
        assert!((mean - code.mu[d]).abs() < 3.0 * se_mean);
        assert!((var.sqrt() - sd).abs() < 3.0 * se_sd);
    }
}
