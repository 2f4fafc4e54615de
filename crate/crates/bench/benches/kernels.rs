use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use oamp_core::estimators::{compute_b_integral, Denoiser, LeKind, LinearEstimator};
use oamp_core::linalg::{sample_haar, sample_haar_dense};
use oamp_core::model::build_system;
use oamp_core::rng::stream;
use oamp_core::se::{run_se, OampSe};
use oamp_core::{BernoulliGaussianPrior, ExperimentConfig, GsModel};

fn haar(c: &mut Criterion) {
    let mut g = c.benchmark_group("haar");
    for n in [256usize, 1024] {
        g.bench_with_input(BenchmarkId::new("householder", n), &n, |b, &n| {
            let mut rng = stream(1);
            b.iter(|| sample_haar(n, &mut rng).unwrap())
        });
    }
    g.sample_size(10);
    g.bench_function("dense_qr/256", |b| {
        let mut rng = stream(1);
        b.iter(|| sample_haar_dense(256, &mut rng).unwrap())
    });
    g.finish();
}

fn linear_step(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let sys = build_system(&cfg, 3).unwrap();
    let le = LinearEstimator::from_system(LeKind::Lmmse, &sys).unwrap();
    let s = vec![0.1; cfg.n];
    let gs = GsModel::new(0.9, 0.05).unwrap();
    c.bench_function("le/svd/1024", |b| b.iter(|| le.apply_svd(&sys, black_box(&s), gs).unwrap()));
    c.bench_function("le/operator/1024", |b| b.iter(|| le.apply_operator(&sys, black_box(&s), gs).unwrap()));
}

fn state_evolution(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let se = OampSe::from_config(&cfg).unwrap();
    let phi = GsModel::new(0.95, 0.01).unwrap();
    c.bench_function("se/step", |b| b.iter(|| se.step(black_box(phi)).unwrap()));
    c.bench_function("se/run30", |b| b.iter(|| run_se(&cfg, 30, 0.0).unwrap()));
    let prior = BernoulliGaussianPrior::new(0.25).unwrap();
    let den = Denoiser::SoftThreshold { theta: 0.2 };
    c.bench_function("b/integral", |b| {
        b.iter(|| compute_b_integral(&den, &prior, 1.0, black_box(0.04)).unwrap())
    });
}

criterion_group!(benches, haar, linear_step, state_evolution);
criterion_main!(benches);
