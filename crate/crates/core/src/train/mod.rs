//! Linear models `x ↦ ŷ(Wx)` fitted by minimizing
//! `Σ_i L(y_i, W x_i) + (λ/2)‖W‖²` with L-BFGS from `W = 0`.

mod lbfgs;
mod model;

use ndarray::{Array2, ArrayView1};

use crate::data::SplitView;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::par::Execution;

pub use lbfgs::{lbfgs_minimize, lbfgs_minimize_fn, LbfgsOutcome};
pub use model::{read_model, write_model, ModelHeader};

/// A `k × d` model matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    pub fn zeros(k: usize, d: usize) -> Self {
        WeightMatrix(Array2::zeros((k, d)))
    }

    pub fn from_array(w: Array2<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("weight matrix has non-finite entries"));
        }
        Ok(WeightMatrix(w.as_standard_layout().into_owned()))
    }

    pub(crate) fn from_flat(k: usize, d: usize, flat: Vec<f64>) -> Self {
        WeightMatrix(Array2::from_shape_vec((k, d), flat).expect("flat length is k * d"))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn d(&self) -> usize {
        self.0.ncols()
    }

    pub fn array(&self) -> &Array2<f64> {
        &self.0
    }

    /// Row-major entries.
    pub fn as_flat(&self) -> &[f64] {
        self.0.as_slice().expect("standard layout")
    }

    pub fn norm(&self) -> f64 {
        self.as_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scores `θ = W x`.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), found: x.len() });
        }
        Ok(self.0.dot(&x).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossSpec,
    /// Ridge strength; the penalty is `(λ/2)‖W‖²`, not scaled by `n`.
    pub lambda: f64,
    pub lbfgs_memory: usize,
    /// Stop once `‖∇‖ ≤ grad_tol · ‖∇ at W = 0‖`.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Recorded with the model; the optimizer itself is deterministic.
    pub seed: u64,
    pub execution: Execution,
}

impl TrainConfig {
    pub fn new(loss: LossSpec, lambda: f64) -> Self {
        TrainConfig {
            loss,
            lambda,
            lbfgs_memory: 10,
            grad_tol: 1e-6,
            max_iter: 500,
            seed: 0,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.lbfgs_memory == 0 || !(self.grad_tol > 0.0) {
            return Err(Error::domain("lbfgs_memory must be >= 1 and grad_tol > 0"));
        }
        Ok(())
    }
}

/// Regularized empirical risk and its gradient.
///
/// Per-sample terms may be evaluated concurrently; they are always summed
/// in sample order so the result does not depend on the execution mode.
pub fn objective(w: &WeightMatrix, data: &SplitView<'_>, cfg: &TrainConfig) -> Result<(f64, WeightMatrix)> {
    let k = w.k();
    if data.dataset().n() > 0 && (data.dataset().d() != w.d() || data.dataset().k() != k) {
        return Err(Error::DimensionMismatch { expected: w.k() * w.d(), found: data.dataset().k() * data.dataset().d() });
    }
    let per_sample = cfg.execution.map_range(data.len(), |pos| {
        let theta = w.scores(data.x(pos))?;
        cfg.loss.value_and_grad(data.y(pos), &theta).map_err(|e| Error::Sample {
            index: data.indices()[pos],
            source: Box::new(e),
        })
    });

    let mut value = 0.0;
    let mut grad = Array2::<f64>::zeros((k, w.d()));
    for (pos, term) in per_sample.into_iter().enumerate() {
        let (v, g) = term?;
        value += v;
        let x = data.x(pos);
        for (mut row, gi) in grad.rows_mut().into_iter().zip(&g) {
            if *gi != 0.0 {
                row.scaled_add(*gi, &x);
            }
        }
    }
    let sq: f64 = w.as_flat().iter().map(|v| v * v).sum();
    value += 0.5 * cfg.lambda * sq;
    grad.scaled_add(cfg.lambda, w.array());
    Ok((value, WeightMatrix(grad)))
}

/// `ŷ(Wx)`; the Fitzpatrick family shares the link of its generator.
pub fn predict(w: &WeightMatrix, x: ArrayView1<'_, f64>, loss: LossSpec) -> Result<Vec<f64>> {
    loss.link(&w.scores(x)?)
}

/// Mean over samples of `‖ŷ_i - y_i‖²`.
pub fn mse<P: AsRef<[f64]>, T: AsRef<[f64]>>(predictions: &[P], targets: &[T]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: targets.len(), found: predictions.len() });
    }
    if predictions.is_empty() {
        return Err(Error::domain("mse of an empty sample"));
    }
    let mut total = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), found: p.len() });
        }
        total += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / predictions.len() as f64)
}

/// MSE of the model's predictions over a split.
pub fn split_mse(w: &WeightMatrix, data: &SplitView<'_>, loss: LossSpec) -> Result<f64> {
    let preds = (0..data.len()).map(|p| predict(w, data.x(p), loss)).collect::<Result<Vec<_>>>()?;
    let targets: Vec<&[f64]> = (0..data.len()).map(|p| data.y(p).as_slice()).collect();
    mse(&preds, &targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, Dataset};
    use crate::losses::Generator;
    use crate::simplex::ProbVector;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn tiny() -> Dataset {
        Dataset::single_split(
            "tiny",
            array![[1.0, -0.5], [0.2, 2.0], [-1.0, 0.3]],
            vec![
                ProbVector::new(vec![0.2, 0.8]).unwrap(),
                ProbVector::vertex(2, 0),
                ProbVector::new(vec![0.6, 0.4]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_split_is_pure_ridge() {
        let data = tiny();
        let view = data.view(crate::data::Split::Dev);
        let w = WeightMatrix::from_array(array![[1.0, 2.0], [-1.0, 0.5]]).unwrap();
        let cfg = TrainConfig::new(LossSpec::fenchel_young(Generator::Logistic), 0.3);
        let (v, g) = objective(&w, &view, &cfg).unwrap();
        assert_relative_eq!(v, 0.15 * (1.0 + 4.0 + 1.0 + 0.25), epsilon = 1e-15);
        assert_eq!(g.array(), &(w.array() * 0.3));
    }

    #[test]
    fn zero_weights_squared_loss() {
        let data = tiny();
        let view = data.all();
        let cfg = TrainConfig::new(LossSpec::fenchel_young(Generator::Squared), 1.0);
        let (v, g) = objective(&WeightMatrix::zeros(2, 2), &view, &cfg).unwrap();
        let expected: f64 = data.labels().iter().map(|y| 0.5 * y.iter().map(|a| a * a).sum::<f64>()).sum();
        assert_relative_eq!(v, expected, epsilon = 1e-15);
        let mut expected_grad = Array2::<f64>::zeros((2, 2));
        for (x, y) in data.features().rows().into_iter().zip(data.labels()) {
            for r in 0..2 {
                for c in 0..2 {
                    expected_grad[[r, c]] -= y[r] * x[c];
                }
            }
        }
        for (a, b) in g.array().iter().zip(&expected_grad) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn objective_reports_failing_sample() {
        let data = tiny();
        let w = WeightMatrix::zeros(3, 2);
        let cfg = TrainConfig::new(LossSpec::fenchel_young(Generator::Logistic), 1.0);
        assert!(objective(&w, &data.all(), &cfg).is_err());
    }

    #[test]
    fn execution_modes_are_bit_identical() {
        let data = synth_generate(5, 60, 4, 3, 0.2).unwrap();
        let w = WeightMatrix::from_array(Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.3)).unwrap();
        for loss in LossSpec::all() {
            let mut cfg = TrainConfig::new(loss, 0.5);
            cfg.execution = Execution::Sequential;
            let seq = objective(&w, &data.all(), &cfg).unwrap();
            cfg.execution = Execution::Parallel;
            let par = objective(&w, &data.all(), &cfg).unwrap();
            assert_eq!(seq.0.to_bits(), par.0.to_bits());
            assert_eq!(seq.1, par.1);
        }
    }

    #[test]
    fn predict_examples() {
        let x = array![0.7, -1.2];
        let zero = WeightMatrix::zeros(3, 2);
        for g in [Generator::Logistic, Generator::Sparsemax] {
            let p = predict(&zero, x.view(), LossSpec::fenchel_young(g)).unwrap();
            for v in p {
                assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
        let w = WeightMatrix::from_array(array![[0.3, 1.0], [-2.0, 0.1], [0.0, 0.4]]).unwrap();
        for g in Generator::ALL {
            assert_eq!(
                predict(&w, x.view(), LossSpec::fenchel_young(g)).unwrap(),
                predict(&w, x.view(), LossSpec::fitzpatrick(g)).unwrap()
            );
        }
        let w = WeightMatrix::from_array(array![[1.0], [-1.0]]).unwrap();
        let p = predict(&w, array![0.0].view(), LossSpec::fenchel_young(Generator::Logistic)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!(predict(&w, x.view(), LossSpec::fenchel_young(Generator::Logistic)).is_err());
    }

    #[test]
    fn mse_examples() {
        let a = vec![vec![0.2, 0.8], vec![1.0, 0.0]];
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]]).unwrap(), 2.0);
        assert_eq!(mse(&[vec![1.0, 0.0], vec![0.5, 0.5]], &[vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap(), 1.0);
        assert!(mse(&a, &a[..1]).is_err());
        assert!(mse::<Vec<f64>, Vec<f64>>(&[], &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let spec = LossSpec::fenchel_young(Generator::Logistic);
        assert!(TrainConfig::new(spec, 0.0).validate().is_err());
        assert!(TrainConfig { lbfgs_memory: 0, ..TrainConfig::new(spec, 1.0) }.validate().is_err());
        assert!(TrainConfig::new(spec, 1e-4).validate().is_ok());
    }
}
