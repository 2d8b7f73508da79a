use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ctriv_bench::{open_loop_record, perturbed};
use ctriv_core::lti::filter_sampled;
use ctriv_core::riv::{riv_solve, riv_step, EstimatorOptions, TransientWindow};
use ctriv_core::structured::{modal_init, project, ModalMap, ProjectOptions};
use ctriv_core::ScalarPoly;
use nalgebra::DMatrix;
use std::hint::black_box;

fn opts() -> EstimatorOptions {
    EstimatorOptions {
        transient: TransientWindow::Samples(0),
        ..EstimatorOptions::default()
    }
}

fn bench_filter(c: &mut Criterion) {
    let num = ScalarPoly::new(vec![1.0, 0.1]);
    let den = ScalarPoly::denominator(&[0.0127, 0.101]);
    let mut group = c.benchmark_group("filter_sampled");
    for n in [1_000usize, 10_000, 100_000] {
        let x = DMatrix::from_fn(n, 3, |k, j| ((k * 7 + j * 13) % 101) as f64 / 50.0 - 1.0);
        group.throughput(Throughput::Elements((n * 3) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| filter_sampled(&num, &den, black_box(x), 0.01).unwrap())
        });
    }
    group.finish();
}

fn bench_riv(c: &mut Criterion) {
    let mut group = c.benchmark_group("riv");
    group.sample_size(10);
    for n in [1_000usize, 10_000] {
        let (bench, real) = open_loop_record(n, 1);
        let start = perturbed(&bench.truth, 0.025, 2);
        group.bench_with_input(BenchmarkId::new("step", n), &real.dataset, |b, ds| {
            b.iter(|| riv_step(black_box(&start), ds, &opts()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("solve", n), &real.dataset, |b, ds| {
            b.iter(|| riv_solve(black_box(&start), ds, &opts()).unwrap())
        });
    }
    group.finish();
}

fn bench_project(c: &mut Criterion) {
    let (bench, real) = open_loop_record(10_000, 3);
    let res = riv_solve(&perturbed(&bench.truth, 0.025, 4), &real.dataset, &opts()).unwrap();
    let rho0 = modal_init(&res.model).unwrap().to_vector();
    let map = ModalMap::new(3, 3, 3);
    let beta = res.model.flatten();
    c.bench_function("project_modal", |b| {
        b.iter(|| {
            project(
                black_box(&beta),
                &res.acov,
                &map,
                &rho0,
                &ProjectOptions::default(),
            )
            .unwrap()
        })
    });
}

criterion_group!(filter, bench_filter);
criterion_group!(estimation, bench_riv, bench_project);
criterion_main!(filter, estimation);
