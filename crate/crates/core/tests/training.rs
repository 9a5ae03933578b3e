#![allow(clippy::needless_range_loop)]

use fitzloss::data::{synth_generate, synth_generate_with_truth, Dataset, Split};
use fitzloss::numeric::finite_diff_grad;
use fitzloss::simplex::softargmax;
use fitzloss::train::{
    lbfgs_minimize, objective, read_model, split_mse, write_model, ModelHeader, TrainConfig, WeightMatrix,
};
use fitzloss::{Execution, Generator, LossSpec, ProbVector};
use ndarray::{array, Array2};

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    // Gaussian elimination with partial pivoting
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

#[test]
fn squared_loss_recovers_ridge_solution() {
    let data = synth_generate(4, 30, 4, 3, 0.5).unwrap();
    let view = data.view(Split::Train);
    let lambda = 0.3;
    let cfg = TrainConfig { grad_tol: 1e-10, ..TrainConfig::new(LossSpec::fenchel_young(Generator::Squared), lambda) };
    let out = lbfgs_minimize(&view, &cfg).unwrap();

    // normal equations: W (XᵀX + λI) = YᵀX, one row of W per class
    let d = data.d();
    let mut gram = vec![vec![0.0; d]; d];
    for p in 0..view.len() {
        let x = view.x(p);
        for i in 0..d {
            for j in 0..d {
                gram[i][j] += x[i] * x[j];
            }
        }
    }
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += lambda;
    }
    for c in 0..data.k() {
        let rhs: Vec<f64> = (0..d).map(|j| (0..view.len()).map(|p| view.y(p)[c] * view.x(p)[j]).sum()).collect();
        let expected = solve(gram.clone(), rhs);
        for j in 0..d {
            assert!((out.w.array()[[c, j]] - expected[j]).abs() < 1e-6, "W[{c},{j}]");
        }
    }
}

#[test]
fn logistic_on_separable_data_converges() {
    let features = array![[2.0, 1.0], [1.5, 2.0], [3.0, 0.5], [-2.0, -1.0], [-1.0, -2.5], [-3.0, 0.2]];
    let labels = (0..6).map(|i| ProbVector::vertex(2, usize::from(i >= 3))).collect();
    let data = Dataset::single_split("separable", features, labels).unwrap();
    let cfg = TrainConfig::new(LossSpec::fenchel_young(Generator::Logistic), 1.0);
    let out = lbfgs_minimize(&data.all(), &cfg).unwrap();
    assert!(out.converged);
    assert!(out.grad_norm_rel <= 1e-6);
    assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let data = synth_generate(9, 20, 3, 4, 0.3).unwrap();
    let five = Dataset::single_split(
        "five",
        data.features().slice(ndarray::s![..5, ..]).to_owned(),
        data.labels()[..5].to_vec(),
    )
    .unwrap();
    let w = WeightMatrix::from_array(Array2::from_shape_fn((4, 3), |(i, j)| 0.4 * i as f64 - 0.3 * j as f64 + 0.1))
        .unwrap();
    for loss in LossSpec::all() {
        let cfg = TrainConfig::new(loss, 0.5);
        let (_, g) = objective(&w, &five.all(), &cfg).unwrap();
        let fd = finite_diff_grad(
            |flat| {
                let w = WeightMatrix::from_array(Array2::from_shape_vec((4, 3), flat.to_vec()).unwrap()).unwrap();
                objective(&w, &five.all(), &cfg).unwrap().0
            },
            w.as_flat(),
            1e-6,
        )
        .unwrap();
        let scale = g.as_flat().iter().chain(&fd).map(|v| v.abs()).fold(1e-8, f64::max);
        let err = g.as_flat().iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        assert!(err <= 1e-4, "{loss}: relative error {err}");
    }
}

#[test]
fn objective_is_convex_along_segments() {
    let data = synth_generate(2, 40, 3, 3, 0.2).unwrap();
    for loss in LossSpec::all() {
        let cfg = TrainConfig::new(loss, 0.1);
        for t in 0..10 {
            let a = WeightMatrix::from_array(Array2::from_shape_fn((3, 3), |(i, j)| ((i * 3 + j + t) as f64).sin()))
                .unwrap();
            let b = WeightMatrix::from_array(Array2::from_shape_fn((3, 3), |(i, j)| ((i + 5 * j * t) as f64).cos()))
                .unwrap();
            let mid = WeightMatrix::from_array((a.array() + b.array()) * 0.5).unwrap();
            let f = |w: &WeightMatrix| objective(w, &data.all(), &cfg).unwrap().0;
            assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) + 1e-9, "{loss}");
        }
    }
}

#[test]
fn training_is_bit_deterministic() {
    let data = synth_generate(7, 120, 6, 4, 0.1).unwrap();
    for loss in [LossSpec::fitzpatrick(Generator::Logistic), LossSpec::fenchel_young(Generator::Sparsemax)] {
        let seq = TrainConfig { execution: Execution::Sequential, ..TrainConfig::new(loss, 0.1) };
        let par = TrainConfig { execution: Execution::Parallel, ..seq };
        let a = lbfgs_minimize(&data.view(Split::Train), &seq).unwrap();
        let b = lbfgs_minimize(&data.view(Split::Train), &seq).unwrap();
        let c = lbfgs_minimize(&data.view(Split::Train), &par).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let header = ModelHeader { loss, lambda: 0.1, seed: 0 };
        assert_eq!(write_model(&a.w, &header), write_model(&c.w, &header));
        assert_eq!(read_model(&write_model(&a.w, &header)).unwrap().1, a.w);
    }
}

#[test]
fn every_loss_trains_with_a_monotone_trace() {
    let data = synth_generate(3, 100, 5, 3, 0.1).unwrap();
    for loss in LossSpec::all() {
        let cfg = TrainConfig { grad_tol: 1e-7, ..TrainConfig::new(loss, 0.5) };
        let out = lbfgs_minimize(&data.view(Split::Train), &cfg).unwrap();
        assert!(out.converged, "{loss}: {}", out.grad_norm_rel);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]), "{loss}");
    }
}

#[test]
fn heavy_ridge_pins_weights_to_zero() {
    let data = synth_generate(1, 60, 4, 3, 0.1).unwrap();
    for loss in LossSpec::all() {
        let out = lbfgs_minimize(&data.view(Split::Train), &TrainConfig::new(loss, 1e9)).unwrap();
        assert!(out.w.norm() < 1e-3, "{loss}: {}", out.w.norm());
    }
}

#[test]
fn realizable_logistic_model_is_learned() {
    let (data, truth) = synth_generate_with_truth(5, 400, 5, 3, 0.0).unwrap();
    let x = data.features().row(0);
    assert_eq!(data.labels()[0], softargmax(&truth.dot(&x).to_vec()).unwrap());
    let cfg = TrainConfig::new(LossSpec::fenchel_young(Generator::Logistic), 1e-4);
    let out = lbfgs_minimize(&data.view(Split::Train), &cfg).unwrap();
    let mse = split_mse(&out.w, &data.view(Split::Test), cfg.loss).unwrap();
    assert!(mse < 1e-3, "test mse {mse}");
}
