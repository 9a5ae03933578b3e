//! Slow reference computations that check the closed forms in
//! [`crate::losses`] by independent routes: generalized Bregman divergences,
//! a barycentric grid search for the conjugate of the target-shifted
//! generator `Ω_y = Ω + D_Ω(y, ·)`, and the quadratic lower bound on
//! Fitzpatrick losses.
//!
//! Nothing here is meant to be fast. Grid scans cost `O(resolution^(k-1))`
//! and are capped at `k = 3`.

use crate::error::{Error, Result};
use crate::losses::Generator;
use crate::numeric::{bisect, BisectionConfig};
use crate::par::Execution;
use crate::simplex::{check_scores, ProbVector};

/// `Ψ(y') = Σ y'_i log y'_i - α Σ y'_i` on the nonnegative orthant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NegentropySpec {
    pub alpha: f64,
}

/// Smooth part `Ψ` of a generator `Ω = Ψ (+ ι_Δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BregmanGenerator {
    Squared,
    Negentropy(NegentropySpec),
}

impl BregmanGenerator {
    pub const NEGENTROPY: BregmanGenerator = BregmanGenerator::Negentropy(NegentropySpec { alpha: 0.0 });

    /// Smooth part of a simplex generator; `None` for generators without
    /// one (squared lives on R^k, perceptron is a bare indicator).
    pub fn for_simplex_generator(generator: Generator) -> Option<Self> {
        match generator {
            Generator::Sparsemax => Some(BregmanGenerator::Squared),
            Generator::Logistic => Some(Self::NEGENTROPY),
            Generator::Squared | Generator::Perceptron => None,
        }
    }

    /// `Ψ(y)`, with `0 log 0 = 0`.
    pub fn psi(&self, y: &[f64]) -> f64 {
        match self {
            BregmanGenerator::Squared => 0.5 * y.iter().map(|v| v * v).sum::<f64>(),
            BregmanGenerator::Negentropy(spec) => y
                .iter()
                .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 } - spec.alpha * v)
                .sum(),
        }
    }

    fn check_domain(&self, v: &[f64]) -> Result<()> {
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain(format!("non-finite entry {bad}")));
        }
        if let BregmanGenerator::Negentropy(_) = self {
            if let Some(bad) = v.iter().find(|x| **x < 0.0) {
                return Err(Error::domain(format!("negative entry {bad} outside negentropy domain")));
            }
        }
        Ok(())
    }
}

/// A divergence value that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn finite(self) -> Option<f64> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }
}

/// `D_Ψ(y, y')`.
///
/// For negentropy this is `Σ y_i log(y_i / y'_i) - Σ (y_i - y'_i)` when `y'`
/// is strictly positive, and [`Divergence::Infinite`] otherwise.
pub fn bregman(gen: BregmanGenerator, y: &[f64], y_prime: &[f64]) -> Result<Divergence> {
    if y.len() != y_prime.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: y_prime.len() });
    }
    gen.check_domain(y)?;
    gen.check_domain(y_prime)?;
    match gen {
        BregmanGenerator::Squared => Ok(Divergence::Finite(
            0.5 * y.iter().zip(y_prime).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        )),
        BregmanGenerator::Negentropy(_) => {
            if y_prime.contains(&0.0) {
                return Ok(Divergence::Infinite);
            }
            Ok(Divergence::Finite(negentropy_divergence(y, y_prime)))
        }
    }
}

fn negentropy_divergence(y: &[f64], y_prime: &[f64]) -> f64 {
    y.iter()
        .zip(y_prime)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 } - (a - b))
        .sum()
}

/// Grid search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Grid points per simplex edge.
    pub resolution: usize,
    pub k_max: usize,
    pub execution: Execution,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { resolution: 400, k_max: 3, execution: Execution::default() }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 10 || !(2..=3).contains(&self.k_max) {
            return Err(Error::domain(format!("invalid grid config {self:?}")));
        }
        Ok(())
    }
}

/// Grid maximum of `⟨y', θ⟩ - Ψ(y') - D_Ψ(y, y')` over strictly interior
/// simplex points `y'_i = (a_i + 1) / (resolution + k)` with `Σ a_i =
/// resolution`. Ties go to the lexicographically smallest `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMax {
    pub value: f64,
    pub argmax: ProbVector,
}

pub fn omega_y_conjugate_grid(
    gen: BregmanGenerator,
    y: &ProbVector,
    theta: &[f64],
    cfg: &GridConfig,
) -> Result<GridMax> {
    cfg.validate()?;
    check_scores(theta)?;
    let k = theta.len();
    if y.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: y.len() });
    }
    if k > cfg.k_max {
        return Err(Error::UnsupportedDimension { k, max: cfg.k_max });
    }
    if k < 2 {
        return Err(Error::domain("grid oracle needs k >= 2"));
    }
    let r = cfg.resolution;
    let scale = 1.0 / (r + k) as f64;
    let objective = |point: &[f64]| -> f64 {
        let inner: f64 = point.iter().zip(theta).map(|(a, b)| a * b).sum();
        let div = match gen {
            BregmanGenerator::Squared => {
                0.5 * y.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            BregmanGenerator::Negentropy(_) => negentropy_divergence(y, point),
        };
        inner - gen.psi(point) - div
    };

    // one slice per leading count a_0; each slice scanned in lexicographic order
    let slices = cfg.execution.map_range(r + 1, |a0| {
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut consider = |point: Vec<f64>| {
            let v = objective(&point);
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, point));
            }
        };
        let first = (a0 + 1) as f64 * scale;
        match k {
            2 => consider(vec![first, (r - a0 + 1) as f64 * scale]),
            _ => {
                for a1 in 0..=(r - a0) {
                    let a2 = r - a0 - a1;
                    consider(vec![first, (a1 + 1) as f64 * scale, (a2 + 1) as f64 * scale]);
                }
            }
        }
        best.expect("every slice holds at least one point")
    });
    let (value, point) = slices
        .into_iter()
        .reduce(|acc, next| if next.0 > acc.0 { next } else { acc })
        .expect("grid is nonempty");
    Ok(GridMax { value, argmax: ProbVector::new(point)? })
}

/// Fitzpatrick loss assembled as `Ω(y) + Ω_y*(θ) - ⟨y, θ⟩` with the
/// conjugate taken from [`omega_y_conjugate_grid`].
pub fn fitz_value_via_grid(
    gen: BregmanGenerator,
    y: &ProbVector,
    theta: &[f64],
    cfg: &GridConfig,
) -> Result<f64> {
    let conj = omega_y_conjugate_grid(gen, y, theta, cfg)?;
    let inner: f64 = y.iter().zip(theta).map(|(a, b)| a * b).sum();
    Ok(gen.psi(y) + conj.value - inner)
}

/// `⟨y - y*, ∇²Ψ(y*)(y - y*)⟩`, a lower bound on the Fitzpatrick loss.
pub fn lower_bound_quadratic(gen: BregmanGenerator, y: &[f64], y_star: &[f64]) -> Result<f64> {
    if y.len() != y_star.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: y_star.len() });
    }
    gen.check_domain(y)?;
    gen.check_domain(y_star)?;
    match gen {
        BregmanGenerator::Squared => {
            Ok(y.iter().zip(y_star).map(|(a, b)| (a - b) * (a - b)).sum())
        }
        BregmanGenerator::Negentropy(_) => {
            let mut total = 0.0;
            for (i, (&a, &b)) in y.iter().zip(y_star).enumerate() {
                if b == 0.0 {
                    if a != 0.0 {
                        return Err(Error::domain(format!(
                            "y*_{i} = 0 while y_{i} = {a}: quadratic form is unbounded"
                        )));
                    }
                    continue;
                }
                total += (a - b) * (a - b) / b;
            }
            Ok(total)
        }
    }
}

/// Fitzpatrick loss of a separable, twice-differentiable, unconstrained
/// generator through its stationarity condition
/// `Ψ''(y'_i)(y'_i - y_i) = θ_i - Ψ'(y'_i)`, solved per coordinate by
/// bisection; returns `(loss, y*)` with loss `⟨y* - y, ∇²Ψ(y*)(y* - y)⟩`.
///
/// `stationarity` must be increasing in `y'_i`.
pub fn fitz_value_via_stationarity<D, H>(
    grad: D,
    hess: H,
    y: &[f64],
    theta: &[f64],
) -> Result<(f64, Vec<f64>)>
where
    D: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    check_scores(theta)?;
    if y.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), found: y.len() });
    }
    let cfg = BisectionConfig { abs_tol: 1e-15, residual_tol: 1e-15, max_iter: 400 };
    let mut y_star = Vec::with_capacity(y.len());
    let mut loss = 0.0;
    for (&yi, &ti) in y.iter().zip(theta) {
        // decreasing form for `bisect`
        let f = |t: f64| -(hess(t) * (t - yi) - ti + grad(t));
        let lo = yi.min(ti) - 1.0;
        let hi = yi.max(ti) + 1.0;
        let root = bisect(f, lo, hi, &cfg)?;
        let d = root.x - yi;
        loss += d * hess(root.x) * d;
        y_star.push(root.x);
    }
    Ok((loss, y_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{fitz_logistic, fitz_sparsemax, fitz_squared, sparsemax_conjugate};
    use crate::simplex::softargmax;
    use approx::assert_relative_eq;

    fn e1() -> ProbVector {
        ProbVector::vertex(2, 0)
    }

    #[test]
    fn bregman_examples() {
        let y = [0.2, 0.5, 0.3];
        for gen in [BregmanGenerator::Squared, BregmanGenerator::NEGENTROPY] {
            assert!(bregman(gen, &y, &y).unwrap().finite().unwrap().abs() < 1e-16);
        }
        assert_eq!(
            bregman(BregmanGenerator::Squared, &[1.0, 0.0], &[0.0, 0.0]).unwrap(),
            Divergence::Finite(0.5)
        );
        let d = bregman(BregmanGenerator::NEGENTROPY, &[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(d.finite().unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(
            bregman(BregmanGenerator::NEGENTROPY, &[0.5, 0.5], &[1.0, 0.0]).unwrap(),
            Divergence::Infinite
        );
        assert!(bregman(BregmanGenerator::NEGENTROPY, &[-0.1, 1.1], &[0.5, 0.5]).is_err());
        // the linear term does not change the divergence
        let shifted = BregmanGenerator::Negentropy(NegentropySpec { alpha: 3.0 });
        let a = bregman(shifted, &[0.7, 0.3], &[0.4, 0.6]).unwrap();
        let b = bregman(BregmanGenerator::NEGENTROPY, &[0.7, 0.3], &[0.4, 0.6]).unwrap();
        assert_relative_eq!(a.finite().unwrap(), b.finite().unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn grid_rejects_large_k() {
        let y = ProbVector::uniform(4);
        let err = omega_y_conjugate_grid(BregmanGenerator::Squared, &y, &[0.0; 4], &GridConfig::default());
        assert!(matches!(err, Err(Error::UnsupportedDimension { k: 4, max: 3 })));
        let bad = GridConfig { resolution: 5, ..GridConfig::default() };
        assert!(omega_y_conjugate_grid(BregmanGenerator::Squared, &e1(), &[0.0; 2], &bad).is_err());
    }

    #[test]
    fn grid_matches_squared_closed_form() {
        // Ω_y*(θ) = 2Ω*((y + θ)/2) - Ω(y) for the simplex-restricted squared generator
        let cfg = GridConfig::default();
        for (y, theta) in [
            (vec![0.2, 0.8], vec![0.3, -0.4]),
            (vec![0.1, 0.3, 0.6], vec![1.0, 0.2, -0.5]),
            (vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]),
        ] {
            let y = ProbVector::new(y).unwrap();
            let grid = omega_y_conjugate_grid(BregmanGenerator::Squared, &y, &theta, &cfg).unwrap();
            let mid: Vec<f64> = y.iter().zip(&theta).map(|(a, b)| 0.5 * (a + b)).collect();
            let closed = 2.0 * sparsemax_conjugate(&mid).unwrap() - BregmanGenerator::Squared.psi(&y);
            assert!((grid.value - closed).abs() <= 5.0 / cfg.resolution as f64);
            assert!(grid.value <= closed + 1e-12);
        }
    }

    #[test]
    fn grid_argmax_at_link() {
        let theta = [0.4, -0.3, 0.1];
        let y = softargmax(&theta).unwrap();
        let grid = omega_y_conjugate_grid(BregmanGenerator::NEGENTROPY, &y, &theta, &GridConfig::default())
            .unwrap();
        for (a, b) in grid.argmax.iter().zip(y.iter()) {
            assert!((a - b).abs() < 5e-3);
        }
    }

    #[test]
    fn grid_examples() {
        let cfg = GridConfig::default();
        let tol = 5.0 / cfg.resolution as f64;
        let v = fitz_value_via_grid(BregmanGenerator::Squared, &e1(), &[0.0, 0.0], &cfg).unwrap();
        assert!((v - 0.125).abs() <= tol);
        let v = fitz_value_via_grid(BregmanGenerator::NEGENTROPY, &e1(), &[0.0, 0.0], &cfg).unwrap();
        assert!((v - fitz_logistic(&e1(), &[0.0, 0.0]).unwrap().value).abs() <= tol);
        assert!((v - 0.278_464_542_761).abs() <= tol);
        let theta = [0.5, -1.0];
        let y = softargmax(&theta).unwrap();
        let v = fitz_value_via_grid(BregmanGenerator::NEGENTROPY, &y, &theta, &cfg).unwrap();
        assert!(v.abs() <= tol);
        let alpha = BregmanGenerator::Negentropy(NegentropySpec { alpha: -2.5 });
        let w = fitz_value_via_grid(alpha, &y, &theta, &cfg).unwrap();
        assert!((v - w).abs() < 1e-12);
    }

    #[test]
    fn sequential_and_parallel_grid_agree() {
        let y = ProbVector::new(vec![0.3, 0.0, 0.7]).unwrap();
        let theta = [0.2, 1.5, -0.4];
        let seq = GridConfig { execution: Execution::Sequential, ..GridConfig::default() };
        let par = GridConfig { execution: Execution::Parallel, ..GridConfig::default() };
        assert_eq!(
            omega_y_conjugate_grid(BregmanGenerator::NEGENTROPY, &y, &theta, &seq).unwrap(),
            omega_y_conjugate_grid(BregmanGenerator::NEGENTROPY, &y, &theta, &par).unwrap()
        );
    }

    #[test]
    fn lower_bound_examples() {
        let y = [0.3, 0.7];
        assert_eq!(lower_bound_quadratic(BregmanGenerator::NEGENTROPY, &y, &y).unwrap(), 0.0);
        let lb = lower_bound_quadratic(BregmanGenerator::Squared, &[1.0, 0.0], &[0.5, 0.0]).unwrap();
        assert_eq!(lb, 0.25);
        assert_eq!(lb, fitz_squared(&[1.0, 0.0], &[0.0, 0.0]).unwrap().value);
        let lb = lower_bound_quadratic(BregmanGenerator::NEGENTROPY, &[0.6, 0.4], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(lb, 0.04, epsilon = 1e-15);
        assert!(lower_bound_quadratic(BregmanGenerator::NEGENTROPY, &[0.5, 0.5], &[1.0, 0.0]).is_err());
        assert_eq!(
            lower_bound_quadratic(BregmanGenerator::NEGENTROPY, &[1.0, 0.0], &[1.0, 0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn lower_bound_below_sparsemax_loss() {
        let y = e1();
        let out = fitz_sparsemax(&y, &[0.0, 0.0]).unwrap();
        let lb = lower_bound_quadratic(BregmanGenerator::Squared, &y, &out.y_star).unwrap();
        assert!(lb <= out.value + 1e-12);
    }

    #[test]
    fn stationarity_route_squared() {
        let (loss, y_star) =
            fitz_value_via_stationarity(|t| t, |_| 1.0, &[1.0, -2.0, 0.5], &[0.0, 3.0, 0.5]).unwrap();
        let closed = fitz_squared(&[1.0, -2.0, 0.5], &[0.0, 3.0, 0.5]).unwrap();
        assert!((loss - closed.value).abs() < 1e-12);
        for (a, b) in y_star.iter().zip(&closed.y_star) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
