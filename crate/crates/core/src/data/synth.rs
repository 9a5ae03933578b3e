//! Seeded synthetic data from a ground-truth softargmax GLM.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::simplex::softargmax;

/// Synthetic dataset with `x ~ N(0, I_d)`, `W₀` entries `~ N(0, 1)` and
/// labels `softargmax(W₀ x + noise · ε)`, `ε ~ N(0, I_k)`. Samples are
/// shuffled into a 60/20/20 train/dev/test split.
pub fn synth_generate(seed: u64, n: usize, d: usize, k: usize, noise: f64) -> Result<Dataset> {
    synth_generate_with_truth(seed, n, d, k, noise).map(|(data, _)| data)
}

/// [`synth_generate`] that also returns the ground-truth `k × d` matrix.
pub fn synth_generate_with_truth(
    seed: u64,
    n: usize,
    d: usize,
    k: usize,
    noise: f64,
) -> Result<(Dataset, Array2<f64>)> {
    if n < 10 || d < 1 || k < 2 || !noise.is_finite() || noise < 0.0 {
        return Err(Error::domain(format!(
            "synthetic data needs n >= 10, d >= 1, k >= 2, noise >= 0 (got n={n}, d={d}, k={k}, noise={noise})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = Array2::from_shape_simple_fn((k, d), || rng.sample::<f64, _>(StandardNormal));
    let features = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    let mut labels = Vec::with_capacity(n);
    for x in features.rows() {
        let mut theta = truth.dot(&x).to_vec();
        for t in theta.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *t += noise * eps;
        }
        labels.push(softargmax(&theta)?);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = n * 3 / 5;
    let n_dev = n / 5;
    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        dev: order[n_train..n_train + n_dev].to_vec(),
        test: order[n_train + n_dev..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.dev.sort_unstable();
    splits.test.sort_unstable();
    let name = format!("synthetic-s{seed}-n{n}-d{d}-k{k}");
    Ok((Dataset::new(name, features, labels, splits)?, truth))
}
