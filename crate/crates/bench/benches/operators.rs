use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use condensate_bench::{bsp, emv, initial, kingman};
use condensate_core::integrator::exponential_step;
use condensate_core::{CondensationModel, SimulationState};

fn eval_operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("eval_operators");
    for n in [256, 512, 1024] {
        let k = kingman(n);
        let p = initial(k.grid(), 2.0, 1.0);
        group.bench_with_input(BenchmarkId::new("kingman", n), &p, |b, p| b.iter(|| k.eval_operators(black_box(p))));
        let e = emv(n);
        let p = initial(e.grid(), 1.0, 3.0);
        group.bench_with_input(BenchmarkId::new("emv", n), &p, |b, p| b.iter(|| e.eval_operators(black_box(p))));
        let m = bsp(n);
        let p = initial(m.grid(), 1.0, 0.5);
        group.bench_with_input(BenchmarkId::new("bsp", n), &p, |b, p| b.iter(|| m.eval_operators(black_box(p))));
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("exponential_step");
    for n in [512, 1024] {
        let k = kingman(n);
        let state = SimulationState::new(&k, initial(k.grid(), 2.0, 1.0)).unwrap();
        group.bench_with_input(BenchmarkId::new("kingman", n), &state, |b, s| {
            b.iter(|| exponential_step(&k, black_box(s), 1e-2, 1e12))
        });
        let e = emv(n);
        let state = SimulationState::new(&e, initial(e.grid(), 1.0, 3.0)).unwrap();
        group.bench_with_input(BenchmarkId::new("emv", n), &state, |b, s| {
            b.iter(|| exponential_step(&e, black_box(s), 1e-2, 1e12))
        });
    }
    group.finish();
}

fn kernel_tables(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_tables");
    group.sample_size(10);
    for n in [256, 1024] {
        group.bench_with_input(BenchmarkId::new("emv", n), &n, |b, &n| b.iter(|| emv(n)));
        group.bench_with_input(BenchmarkId::new("bsp", n), &n, |b, &n| b.iter(|| bsp(n)));
    }
    group.finish();
}

criterion_group!(benches, eval_operators, step, kernel_tables);
criterion_main!(benches);
