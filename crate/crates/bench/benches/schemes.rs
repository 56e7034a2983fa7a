use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hodgeqi_bench::{bounded_samples, centred_mesh, wholespace_samples};
use hodgeqi_core::{
    build_leray_qi, fft_project, fit_interpolant, BuiltinField, GridField, KernelEvaluator, KernelSpec, LerayFit, Part,
    QuasiInterpolant, Truncation,
};

fn wholespace_qi(c: &mut Criterion) {
    let data = wholespace_samples(0.25, 12.0);
    let points = centred_mesh(6.0, 20);
    let div = KernelEvaluator::new(KernelSpec::div(2, 2, 2).unwrap()).unwrap();
    let mut g = c.benchmark_group("wholespace");
    g.sample_size(10);
    g.bench_function("prefilter_h0.25", |b| {
        b.iter(|| QuasiInterpolant::new(&div, black_box(&data), Truncation::All).unwrap())
    });
    let qi = QuasiInterpolant::new(&div, &data, Truncation::All).unwrap();
    g.bench_function("evaluate_400pts_h0.25", |b| b.iter(|| qi.evaluate_many(black_box(&points), &[0, 0]).unwrap()));
    g.finish();
}

fn spectral(c: &mut Criterion) {
    let n = 64;
    let grid =
        GridField::sample(vec![0.0, 0.0], 1.0 / n as f64, vec![n, n], |x| BuiltinField::BdFull.value(x)).unwrap();
    c.bench_function("fft_project_64", |b| b.iter(|| fft_project(black_box(&grid), Part::Div).unwrap()));
}

fn bounded(c: &mut Criterion) {
    let (cfg, data) = bounded_samples(1.0 / 25.0, 2);
    let mut g = c.benchmark_group("bounded");
    g.sample_size(10);
    g.bench_function("ring_fit_h1/25", |b| b.iter(|| LerayFit::new(black_box(&data), &cfg).unwrap()));
    let fit = LerayFit::new(&data, &cfg).unwrap();
    let points = centred_mesh(0.5, 10);
    g.bench_function("leray_eval_100pts_h1/25", |b| {
        b.iter(|| build_leray_qi(&fit, Part::Div, &[0, 0]).unwrap().evaluate_many(black_box(&points)).unwrap())
    });
    let centers: Vec<Vec<f64>> = fit.interpolant().centers().to_vec();
    let values: Vec<Vec<f64>> = centers.iter().map(|x| BuiltinField::BdFull.value(x)).collect();
    let shape = fit.interpolant().shape();
    g.bench_function("matern_system_h1/25", |b| {
        b.iter(|| fit_interpolant(black_box(&centers), &values, shape).unwrap())
    });
    g.finish();
}

criterion_group!(benches, wholespace_qi, spectral, bounded);
criterion_main!(benches);
