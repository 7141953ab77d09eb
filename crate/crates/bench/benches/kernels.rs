use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hjlab_core::effective::{effective_hamiltonian_cell, mbar_star, CellSettings, Resolution};
use hjlab_core::geometry::{Extent, HoleShape, PerforatedDomain, Rect, SpaceTimeLattice};
use hjlab_core::hamiltonians::HamiltonianModel;
use hjlab_core::metric::MetricSolver;
use hjlab_core::solvers::{solve_ueps, InitialData, SolveSpec};

fn disc() -> PerforatedDomain {
    PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap()
}

fn free() -> HamiltonianModel {
    HamiltonianModel::free().with_m0(3.0).unwrap()
}

fn metric_field(c: &mut Criterion) {
    let mut group = c.benchmark_group("cost_mstar");
    for h in [0.1, 0.05] {
        let lat = SpaceTimeLattice::build(&disc(), h, Extent::Box(Rect::cells([-1, -2], [5, 2])), h, 3.0).unwrap();
        let model = free();
        let solver = MetricSolver::new(&model, &lat).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(h), &h, |b, _| {
            b.iter(|| solver.cost_mstar(4.0, [0.0, 0.0], [4.0, 0.0]).unwrap())
        });
    }
    group.finish();
}

fn oscillating_solve(c: &mut Criterion) {
    let model = free();
    let lat = SpaceTimeLattice::build(&disc(), 0.02, Extent::Torus, 0.02, 3.0).unwrap();
    let g = InitialData::linear([-1.0, 0.0]);
    let mut group = c.benchmark_group("solve_ueps");
    group.sample_size(10);
    for eps in [0.25, 0.125] {
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, &eps| {
            b.iter(|| solve_ueps(&lat, &model, &g, &SolveSpec::new(eps, 1.0)).unwrap())
        });
    }
    group.finish();
}

fn effective_routes(c: &mut Criterion) {
    let (dom, model) = (disc(), free());
    let mut group = c.benchmark_group("effective");
    group.sample_size(10);
    group.bench_function("mbar_star", |b| {
        b.iter(|| mbar_star(&dom, &model, Resolution::new(0.1), 1.0, [0.0, 0.0], [1.0, 0.0], &[2, 4, 8]).unwrap())
    });
    let settings = CellSettings::new(0.05, vec![0.2, 0.1, 0.05]);
    group.bench_function("cell", |b| {
        b.iter(|| effective_hamiltonian_cell(&dom, &model, [-1.0, 0.0], &settings).unwrap())
    });
    group.finish();
}

criterion_group!(benches, metric_field, oscillating_solve, effective_routes);
criterion_main!(benches);
