use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rfcw::hamjac::{finite_n_hamiltonian, BumpedPoly, Grid, HamiltonianSetup, Product2D};
use rfcw::mdp::estimate_drift;
use rfcw::model::ModelParams;
use rfcw::par::Execution;
use rfcw::verify::critical_drift_config;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn drift_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_drift");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = critical_drift_config(7, 32, exec).unwrap();
        cfg.n = 10_000;
        cfg.t_end = 0.5;
        group.bench_function(BenchmarkId::new(name, cfg.replicas), |b| {
            b.iter(|| estimate_drift(&cfg).unwrap())
        });
    }
    group.finish();
}

fn hamiltonian_grid(c: &mut Criterion) {
    let p = ModelParams::new(0.8, 0.5).unwrap();
    let f = Product2D {
        fx: BumpedPoly::new(vec![0.5, 1.0, -0.3], 0.5),
        fy: BumpedPoly::new(vec![1.0, 0.2], 0.8),
    };
    let setup = HamiltonianSetup {
        params: p,
        center: p.paramagnetic_point(),
        n: 1e6,
        b_n: 1e6f64.powf(0.1),
        nu: 0,
        eta_bar: 0.1,
    };
    let grid = Grid::square(-1.0, 1.0, 101);
    let mut group = c.benchmark_group("finite_n_hamiltonian");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, grid.nx * grid.ny), |b| {
            b.iter(|| finite_n_hamiltonian(&setup, &f, &grid, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, drift_ensemble, hamiltonian_grid);
criterion_main!(benches);
