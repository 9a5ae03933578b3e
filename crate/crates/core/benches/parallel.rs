use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use std::hint::black_box;

use fitzloss::check::{run_suite, CheckConfig, Suite};
use fitzloss::data::{synth_generate, Split};
use fitzloss::oracle::{omega_y_conjugate_grid, BregmanGenerator, GridConfig};
use fitzloss::train::{objective, TrainConfig, WeightMatrix};
use fitzloss::{Execution, Generator, LossSpec, ProbVector};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn objective_eval(c: &mut Criterion) {
    let data = synth_generate(1, 2000, 20, 5, 0.1).unwrap();
    let view = data.view(Split::Train);
    let w = WeightMatrix::from_array(Array2::from_shape_fn((5, 20), |(i, j)| ((i * 20 + j) as f64).sin() * 0.1))
        .unwrap();
    let mut group = c.benchmark_group("objective");
    for loss in [LossSpec::fenchel_young(Generator::Logistic), LossSpec::fitzpatrick(Generator::Logistic)] {
        for (mode, execution) in MODES {
            let cfg = TrainConfig { execution, ..TrainConfig::new(loss, 1.0) };
            group.bench_function(BenchmarkId::new(loss.to_string(), mode), |b| {
                b.iter(|| objective(black_box(&w), &view, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn sandwich_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("check-sandwich");
    group.sample_size(10);
    for (mode, execution) in MODES {
        let cfg = CheckConfig { seed: 3, trials: Some(2000), execution, ..CheckConfig::default() };
        group.bench_function(mode, |b| b.iter(|| run_suite(Suite::Sandwich, &cfg).unwrap()));
    }
    group.finish();
}

fn grid_oracle(c: &mut Criterion) {
    let y = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
    let theta = [0.4, -0.1, 0.9];
    let mut group = c.benchmark_group("grid-oracle-k3");
    group.sample_size(10);
    for (mode, execution) in MODES {
        let cfg = GridConfig { resolution: 400, k_max: 3, execution };
        group.bench_function(mode, |b| {
            b.iter(|| omega_y_conjugate_grid(BregmanGenerator::NEGENTROPY, &y, black_box(&theta), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, objective_eval, sandwich_sweep, grid_oracle);
criterion_main!(benches);
