use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use linmdd_bench::model_sample;
use linmdd_core::kernel::PermutationKernel;
use linmdd_core::{fit_ols, linmdd_test, mdd_squared, residualize, FitMethod, PermutationPlan};

fn statistic(c: &mut Criterion) {
    let mut group = c.benchmark_group("mdd_squared");
    for n in [50, 100, 200, 400] {
        let s = model_sample(n);
        let u = s.x().hconcat(s.z()).unwrap();
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| mdd_squared(black_box(&u), black_box(s.y())).unwrap())
        });
    }
    group.finish();
}

fn permutation_replicate(c: &mut Criterion) {
    let mut group = c.benchmark_group("permutation_replicate");
    for n in [50, 100, 200, 400] {
        let s = model_sample(n);
        let fit = residualize(&s, true, FitMethod::Ols).unwrap();
        let kernel = PermutationKernel::new(s.x(), Some(&fit.design), fit.residuals()).unwrap();
        let order = PermutationPlan::new(1, 7).unwrap().permutation(0, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| kernel.statistic(black_box(&order)).unwrap())
        });
    }
    group.finish();
}

fn regression(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_ols");
    for n in [100, 1000] {
        let s = model_sample(n);
        let design = s.x().hconcat(s.z()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| fit_ols(black_box(s.y()), black_box(&design)).unwrap())
        });
    }
    group.finish();
}

fn full_test(c: &mut Criterion) {
    let s = model_sample(100);
    let plan = PermutationPlan::new(500, 1).unwrap();
    c.bench_function("linmdd_test/n=100,B=500", |b| {
        b.iter(|| linmdd_test(black_box(&s), &plan, 0.05, true).unwrap())
    });
}

criterion_group!(benches, statistic, permutation_replicate, regression, full_test);
criterion_main!(benches);
