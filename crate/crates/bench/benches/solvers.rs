use criterion::{black_box, criterion_group, criterion_main, Criterion};

use bitpin_core::{
    aop_solve, epsvm_solve, flip_signs, generate_measurement_system, generate_sparse_signal,
    hard_threshold, passive_closed_form, piht_solve, quantize, AopConfig, EpsvmConfig, FlipSpec,
    NoiseSpec, PihtConfig, PinballParams, ProblemData, Seed,
};

fn instance(n: usize, m: usize, k: usize, rf: f64, seed: u64) -> ProblemData {
    let s = Seed(seed);
    let signal = generate_sparse_signal(n, k, s).unwrap();
    let matrix = generate_measurement_system(n, m, s);
    let clean = quantize(&matrix, signal.dense(), &NoiseSpec::noiseless(), s).unwrap();
    let y = flip_signs(&clean, &FlipSpec::with_ratio(rf).unwrap(), s);
    ProblemData::new(matrix, y).unwrap()
}

pub fn solver_benchmarks(c: &mut Criterion) {
    let data = instance(1000, 500, 20, 0.1, 42);

    let mut group = c.benchmark_group("n=1000 m=500 k=20 rf=10%");
    group.sample_size(10);

    let piht_params = PinballParams::new(-0.2, 1.0).unwrap();
    let piht_config = PihtConfig::new(20);
    group.bench_function("piht 500 iterations", |b| {
        b.iter(|| piht_solve(black_box(&data), &piht_params, &piht_config).unwrap())
    });

    let aop_config = AopConfig::new(50, -0.2, 1.0, PihtConfig::new(20)).unwrap();
    group.bench_function("aop-piht 500 iterations", |b| {
        b.iter(|| aop_solve(black_box(&data), &aop_config).unwrap())
    });

    let epsvm_params = PinballParams::new(-0.5, 1.0).unwrap();
    let epsvm_config = EpsvmConfig::default();
    group.bench_function("epsvm dual ascent", |b| {
        b.iter(|| epsvm_solve(black_box(&data), &epsvm_params, &epsvm_config).unwrap())
    });

    let mu = bitpin_core::default_mu(-1.0, 1000, 500);
    group.bench_function("passive closed form", |b| {
        b.iter(|| passive_closed_form(black_box(&data), mu).unwrap())
    });
    group.finish();

    let dense: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64) - 50.0).collect();
    c.bench_function("hard threshold n=1000 k=20", |b| {
        b.iter(|| hard_threshold(black_box(&dense), 20))
    });
}

criterion_group!(benches, solver_benchmarks);
criterion_main!(benches);
