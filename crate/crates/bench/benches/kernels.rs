use criterion::{black_box, criterion_group, criterion_main, Criterion};
use foldscan_core::detect::{auc, ks_test, mwu_test};
use foldscan_core::grid::{chamfer_distance, ChamferWeights};
use foldscan_core::preprocess::{learn_mask, preprocess_subject};
use foldscan_core::synth::{generate_cohort, generate_subject, GeneratorParams, MAIN_LABELS};
use foldscan_core::vae::{ModelConfig, Vae};

fn synth(c: &mut Criterion) {
    let p = GeneratorParams::default();
    c.bench_function("generate_subject 64x64x80", |b| b.iter(|| generate_subject(&p, black_box(7)).unwrap()));
    let s = generate_subject(&p, 7).unwrap();
    c.bench_function("chamfer 64x64x80", |b| {
        b.iter(|| chamfer_distance(black_box(&s.skeleton), ChamferWeights::default(), |v| v != 0).unwrap())
    });
}

fn model(c: &mut Criterion) {
    let p = GeneratorParams::default();
    let cohort = generate_cohort(&p, 1, 20).unwrap();
    let mask = learn_mask(cohort.iter().map(|s| &s.skeleton), &MAIN_LABELS, 5.0, 4).unwrap();
    let geom = mask.crop_geometry(2, [32, 32, 40]).unwrap();
    let x = preprocess_subject(&cohort[0].skeleton, &geom).unwrap();
    c.bench_function("preprocess_subject", |b| b.iter(|| preprocess_subject(black_box(&cohort[1].skeleton), &geom).unwrap()));

    let cfg = ModelConfig { input_dims: [32, 32, 40], channels: [8, 16, 32], latent_dim: 16, ..Default::default() };
    let vae = Vae::<f32>::new(cfg).unwrap();
    let eps = vec![0.1; 16];
    c.bench_function("encode 32x32x40", |b| b.iter(|| vae.encode(black_box(&x)).unwrap()));
    c.bench_function("loss_and_grad 32x32x40", |b| b.iter(|| vae.loss_and_grad(black_box(&x), &eps, 2.0).unwrap()));
}

fn stats(c: &mut Criterion) {
    let a: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
    let b: Vec<f64> = (0..200).map(|i| ((i * 53) % 103) as f64 + 3.0).collect();
    let scores: Vec<f64> = a.iter().chain(&b).copied().collect();
    let labels: Vec<bool> = (0..400).map(|i| i >= 200).collect();
    c.bench_function("ks_test 200v200", |bch| bch.iter(|| ks_test(black_box(&a), &b).unwrap()));
    c.bench_function("mwu_test 200v200", |bch| bch.iter(|| mwu_test(black_box(&a), &b).unwrap()));
    c.bench_function("auc 400", |bch| bch.iter(|| auc(black_box(&scores), &labels).unwrap()));
}

criterion_group!(benches, synth, model, stats);
criterion_main!(benches);
