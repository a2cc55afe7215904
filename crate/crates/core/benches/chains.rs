use std::sync::Arc;

use betagas::equilibrium::{solve_equilibrium, GridConfig, LogKernel};
use betagas::exec::Execution;
use betagas::measure::uniform_cells;
use betagas::potential::{Domain, Potential};
use betagas::sampler::{run_chains, ChainConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const POLICIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel { workers: 0 }),
];

fn quadratic() -> (Arc<Potential>, Domain) {
    let d = Domain::interval(-3.0, 3.0).unwrap();
    (Arc::new(Potential::polynomial(d.clone(), vec![0.0, 0.0, 1.0]).unwrap()), d)
}

fn chains(c: &mut Criterion) {
    let (v, d) = quadratic();
    let mut group = c.benchmark_group("run_chains");
    group.sample_size(10);
    for n in [32, 128] {
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| {
                    let configs = (0..4)
                        .map(|k| {
                            let mut cfg = ChainConfig::new(n, 2.0, v.clone(), d.clone());
                            cfg.burn_in = 50;
                            cfg.sweeps = 200;
                            cfg.seed = k;
                            cfg
                        })
                        .collect();
                    run_chains(configs, exec).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_kernel_apply");
    for nodes in [512, 2048] {
        let cells = uniform_cells(&[(-3.0, 3.0)], nodes).unwrap();
        let k = LogKernel::new(&cells, Execution::Sequential).unwrap();
        let w = vec![1.0 / nodes as f64; nodes];
        let mut out = vec![0.0; nodes];
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, nodes), &nodes, |b, _| {
                b.iter(|| k.apply(&w, &mut out, exec))
            });
        }
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let (v, _) = quadratic();
    let mut group = c.benchmark_group("solve_equilibrium");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let grid = GridConfig {
            execution: exec,
            ..GridConfig::with_nodes(512)
        };
        group.bench_function(name, |b| b.iter(|| solve_equilibrium(&v, &grid).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, chains, kernel, solver);
criterion_main!(benches);
