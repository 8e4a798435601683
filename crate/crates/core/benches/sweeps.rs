use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmstree::ising::{self, ModelSpec};
use qmstree::par::Execution;
use qmstree::pauli::{basis_string, RegionOperator, C64};
use qmstree::tree::{self, VertexWord};
use qmstree::verify::{self, CheckOptions};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn level_basis_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("level_markov_basis");
    group.sample_size(10);
    let base = ising::build_qms(&ModelSpec::new(1.0, 1.0).with_depth(3)).unwrap();
    for (name, exec) in MODES {
        let h = base.clone().with_execution(exec);
        let opts = CheckOptions::default().with_exec(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(verify::check_level_markov(&h, 1, &opts).unwrap().residual))
        });
    }
    group.finish();
}

fn many_term_observable(c: &mut Criterion) {
    let mut group = c.benchmark_group("nested_many_terms");
    let region = tree::ball(2, 2);
    let terms = (0..4096usize)
        .step_by(7)
        .map(|code| (basis_string(&region, code), C64::new(1.0, 0.0)));
    let a = RegionOperator::from_terms(region.clone(), terms);
    let base = ising::build_qms(&ModelSpec::new(0.7, 1.4).with_depth(4)).unwrap();
    for (name, exec) in MODES {
        let h = base.clone().with_execution(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(h.evaluate_at_volume(&a, 3).unwrap()))
        });
    }
    group.finish();
}

fn parameter_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("beta_j_grid");
    group.sample_size(10);
    let grid: Vec<(f64, f64)> = [0.0, 0.5, 1.0, 1.5, 2.0]
        .iter()
        .flat_map(|&b| [0.0, 0.5, 1.0, 1.5, 2.0].map(|j| (b, j)))
        .collect();
    let opts = CheckOptions::default().with_exec(Execution::Sequential);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&grid, |&(beta, j)| {
                    let h = ising::build_qms(&ModelSpec::new(beta, j).with_depth(2)).unwrap();
                    verify::check_localized_markov(&h, &VertexWord::new(&[1]), None, &opts)
                        .unwrap()
                        .residual
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, level_basis_sweep, many_term_observable, parameter_grid);
criterion_main!(benches);
