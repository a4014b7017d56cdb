use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use glvar::refcell::{solve_cell, BoundaryCondition, CellProblem};
use glvar::vortex::{detect_vortices, DetectConfig};
use glvar::{energy, gradient};
use glvar_bench::fixture;

fn energy_and_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    for cells in [64usize, 256] {
        let f = fixture(cells);
        group.bench_with_input(BenchmarkId::new("energy", cells), &f, |b, f| b.iter(|| energy(black_box(&f.psi), &f.a, f.b0.field(), &f.params, None).unwrap()));
        group.bench_with_input(BenchmarkId::new("gradient", cells), &f, |b, f| b.iter(|| gradient(black_box(&f.psi), &f.a, f.b0.field(), &f.params).unwrap()));
    }
    group.finish();
}

fn vortex_detection(c: &mut Criterion) {
    let f = fixture(128);
    c.bench_function("detect_vortices/128", |b| b.iter(|| detect_vortices(black_box(&f.psi), Some(&f.a), &DetectConfig::default()).unwrap()));
}

fn small_cell(c: &mut Criterion) {
    let mut p = CellProblem::new(0.5, CellProblem::side_from_flux(1.0), BoundaryCondition::Periodic);
    p.random_starts = 1;
    let mut group = c.benchmark_group("refcell");
    group.sample_size(10);
    group.bench_function("periodic_k1", |b| b.iter(|| solve_cell(black_box(&p)).unwrap()));
    group.finish();
}

criterion_group!(benches, energy_and_gradient, vortex_detection, small_cell);
criterion_main!(benches);
