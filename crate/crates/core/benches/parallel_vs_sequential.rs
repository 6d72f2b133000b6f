use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mldecouple::harness::{builtin_system, run_experiment, ExperimentConfig, TargetSpec};
use mldecouple::model::{build_f_matrix, build_jacobian_tensor_with};
use mldecouple::solver::{init_state, sweep};
use mldecouple::{Execution, SolverConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn points(s: usize, m: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..s)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn jacobian_tensor(c: &mut Criterion) {
    let model = builtin_system("f3").unwrap();
    let pts = points(2000, 4);
    let mut g = c.benchmark_group("jacobian_tensor");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, pts.len()), |b| {
            b.iter(|| build_jacobian_tensor_with(&model, &pts, exec).unwrap())
        });
    }
    g.finish();
}

fn solver_sweep(c: &mut Criterion) {
    let model = builtin_system("f3").unwrap();
    let mut g = c.benchmark_group("sweep");
    g.sample_size(20);
    for s in [30, 300] {
        let pts = points(s, 4);
        let j = build_jacobian_tensor_with(&model, &pts, Execution::Sequential).unwrap();
        let f = build_f_matrix(&model, &pts).unwrap();
        for (name, exec) in MODES {
            let cfg = SolverConfig {
                lambda: 1e-2,
                execution: exec,
                ..SolverConfig::new(vec![3, 2], vec![3, 4])
            };
            let state = init_state(&cfg, j.dims()).unwrap();
            g.bench_function(BenchmarkId::new(name, s), |b| {
                b.iter(|| {
                    let mut st = state.clone();
                    sweep(&cfg, &mut st, &j, &f, &pts).unwrap()
                })
            });
        }
    }
    g.finish();
}

fn experiment_runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("experiment");
    g.sample_size(10);
    for (name, jobs) in [("sequential", 1), ("parallel", 0)] {
        let mut cfg = ExperimentConfig::new(TargetSpec::Builtin("f1".into()));
        cfg.runs = 16;
        cfg.jobs = jobs;
        cfg.solver.max_iters = 50;
        cfg.tuner.max_stages = 2;
        g.bench_function(BenchmarkId::new(name, cfg.runs), |b| {
            b.iter(|| run_experiment(&cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, jacobian_tensor, solver_sweep, experiment_runs);
criterion_main!(benches);
