use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shapeopt_core::mesh::{generate_channel, generate_tjunction};
use shapeopt_core::solver::{BoundarySpec, FlowSolver, FluidProperties, SolverSettings};

fn carreau_solves(c: &mut Criterion) {
    let props = FluidProperties::default();
    let settings = SolverSettings::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for h in [0.125, 0.0625] {
        let m = generate_tjunction(h).unwrap();
        let mut solver = FlowSolver::new(&m);
        let bcs = BoundarySpec::tjunction();
        group.bench_with_input(BenchmarkId::new("tjunction", h), &m, |b, m| {
            b.iter(|| solver.solve(black_box(m), &props, &bcs, &settings).unwrap())
        });
        let m = generate_channel(h).unwrap();
        let mut solver = FlowSolver::new(&m);
        let bcs = BoundarySpec::channel();
        group.bench_with_input(BenchmarkId::new("channel", h), &m, |b, m| {
            b.iter(|| solver.solve(black_box(m), &props, &bcs, &settings).unwrap())
        });
    }
    group.finish();
}

fn newtonian_solve(c: &mut Criterion) {
    let m = generate_tjunction(0.0625).unwrap();
    let mut solver = FlowSolver::new(&m);
    let props = FluidProperties::newtonian(1.0);
    let bcs = BoundarySpec::tjunction();
    let settings = SolverSettings::default();
    c.bench_function("solve/tjunction_newtonian_0.0625", |b| {
        b.iter(|| solver.solve(black_box(&m), &props, &bcs, &settings).unwrap())
    });
}

criterion_group!(benches, carreau_solves, newtonian_solve);
criterion_main!(benches);
