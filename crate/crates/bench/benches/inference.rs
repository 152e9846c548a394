use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ebgev::{
    build_prior, log_likelihood, ml_fit, predictive_quantile, pwm_fit, run_chain, BlockMaxSample,
    ChainConfig, GevParams, PriorKernels,
};

fn sample(k: usize) -> BlockMaxSample {
    let th = GevParams::new(-0.2, 200.0, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    BlockMaxSample::new((0..k).map(|_| th.sample(&mut rng)).collect(), 1, "bench").unwrap()
}

fn estimators(c: &mut Criterion) {
    let s = sample(100);
    let th = GevParams::new(-0.2, 200.0, 40.0).unwrap();
    c.bench_function("log_likelihood k=100", |b| {
        b.iter(|| log_likelihood(black_box(&th), &s).unwrap())
    });
    c.bench_function("pwm_fit k=100", |b| {
        b.iter(|| pwm_fit(black_box(&s)).unwrap())
    });
    c.bench_function("ml_fit k=100", |b| {
        b.iter(|| ml_fit(black_box(&s), None).unwrap())
    });
}

fn chain(c: &mut Criterion) {
    let s = sample(50);
    let prior = build_prior(&s, PriorKernels::default()).unwrap();
    let cfg = ChainConfig::short().with_seed(3);
    let mut g = c.benchmark_group("sampler");
    g.sample_size(10);
    g.bench_function("short chain k=50", |b| {
        b.iter(|| run_chain(black_box(&s), &prior, &cfg).unwrap())
    });
    g.finish();

    let draws = run_chain(&s, &prior, &cfg).unwrap();
    c.bench_function("predictive_quantile T=100", |b| {
        b.iter(|| predictive_quantile(black_box(&draws), 0.01).unwrap())
    });
}

criterion_group!(benches, estimators, chain);
criterion_main!(benches);
