//! Fenchel-Young and Fitzpatrick losses for four generators.
//!
//! | generator    | domain of `y` | link `ŷ(θ)`          |
//! |--------------|---------------|----------------------|
//! | `squared`    | all of R^k    | identity             |
//! | `perceptron` | simplex       | vertex argmax        |
//! | `sparsemax`  | simplex       | simplex projection   |
//! | `logistic`   | simplex       | softargmax           |
//!
//! Both families share the link of their generator. Every loss exposes its
//! value, its gradient in `θ` and the maximizer `y*(y, θ)`; for the
//! Fitzpatrick family the gradient is `y* - y`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{bisect, lambert_w_exp, lse_unchecked, BisectionConfig};
use crate::simplex::{argmax_vertex, check_scores, project_simplex, softargmax, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    /// `½‖y‖²` on all of R^k.
    Squared,
    /// Indicator of the simplex.
    Perceptron,
    /// `½‖y‖²` restricted to the simplex.
    Sparsemax,
    /// Shannon negentropy `⟨y, log y⟩` on the simplex.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    FenchelYoung,
    Fitzpatrick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LossSpec {
    pub generator: Generator,
    pub family: Family,
}

impl Generator {
    pub const ALL: [Generator; 4] = [
        Generator::Squared,
        Generator::Perceptron,
        Generator::Sparsemax,
        Generator::Logistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Squared => "squared",
            Generator::Perceptron => "perceptron",
            Generator::Sparsemax => "sparsemax",
            Generator::Logistic => "logistic",
        }
    }

    /// Whether targets must lie on the simplex.
    pub fn on_simplex(self) -> bool {
        !matches!(self, Generator::Squared)
    }

    /// The link `θ ↦ ŷ(θ)`.
    pub fn link(self, theta: &[f64]) -> Result<Vec<f64>> {
        match self {
            Generator::Squared => {
                check_scores(theta)?;
                Ok(theta.to_vec())
            }
            Generator::Perceptron => argmax_vertex(theta).map(ProbVector::into_vec),
            Generator::Sparsemax => project_simplex(theta).map(ProbVector::into_vec),
            Generator::Logistic => softargmax(theta).map(ProbVector::into_vec),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown generator '{s}'")))
    }
}

const FITZ_PREFIX: &str = "fitzpatrick-";

impl LossSpec {
    pub const fn fenchel_young(generator: Generator) -> Self {
        LossSpec { generator, family: Family::FenchelYoung }
    }

    pub const fn fitzpatrick(generator: Generator) -> Self {
        LossSpec { generator, family: Family::Fitzpatrick }
    }

    /// All eight (generator, family) pairs, Fenchel-Young first.
    pub fn all() -> Vec<LossSpec> {
        let mut specs: Vec<_> = Generator::ALL.into_iter().map(Self::fenchel_young).collect();
        specs.extend(Generator::ALL.into_iter().map(Self::fitzpatrick));
        specs
    }

    /// The same generator in the other family.
    pub fn sibling(self) -> Self {
        let family = match self.family {
            Family::FenchelYoung => Family::Fitzpatrick,
            Family::Fitzpatrick => Family::FenchelYoung,
        };
        LossSpec { family, ..self }
    }

    pub fn value(&self, y: &[f64], theta: &[f64]) -> Result<f64> {
        match self.family {
            Family::FenchelYoung => fy_value(self.generator, y, theta),
            Family::Fitzpatrick => fitz_value(self.generator, y, theta),
        }
    }

    pub fn grad(&self, y: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        self.value_and_grad(y, theta).map(|(_, g)| g)
    }

    /// Value and gradient from a single evaluation (one root solve for the
    /// Fitzpatrick logistic loss).
    pub fn value_and_grad(&self, y: &[f64], theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let eval = self.evaluate(y, theta)?;
        Ok((eval.value, eval.grad))
    }

    pub fn evaluate(&self, y: &[f64], theta: &[f64]) -> Result<Evaluation> {
        check_pair(self.generator, y, theta)?;
        let (value, y_star, solve) = match self.family {
            Family::FenchelYoung => {
                let value = fy_value(self.generator, y, theta)?;
                let y_star = match self.generator {
                    Generator::Perceptron => perceptron_maximizer(y, theta),
                    g => g.link(theta)?,
                };
                (value, y_star, None)
            }
            Family::Fitzpatrick => match self.generator {
                Generator::Squared => {
                    let out = fitz_squared(y, theta)?;
                    (out.value, out.y_star, None)
                }
                Generator::Perceptron => {
                    let out = fitz_perceptron(&simplex_target(y)?, theta)?;
                    (out.value, out.y_star.into_vec(), None)
                }
                Generator::Sparsemax => {
                    let out = fitz_sparsemax(&simplex_target(y)?, theta)?;
                    (out.value, out.y_star.into_vec(), None)
                }
                Generator::Logistic => {
                    let solve = fitz_logistic_solve(
                        &simplex_target(y)?,
                        theta,
                        &BisectionConfig::default(),
                    )?;
                    let value = fitz_logistic_value(y, &solve);
                    (value, solve.y_star.to_vec(), Some(solve))
                }
            },
        };
        let grad = y_star.iter().zip(y).map(|(s, t)| s - t).collect();
        Ok(Evaluation {
            value,
            grad,
            link: self.generator.link(theta)?,
            y_star,
            solve,
        })
    }

    /// Prediction `ŷ(θ)`; the family plays no role.
    pub fn link(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.generator.link(theta)
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::FenchelYoung => write!(f, "{}", self.generator),
            Family::Fitzpatrick => write!(f, "{FITZ_PREFIX}{}", self.generator),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    /// `logistic` or `fitzpatrick-logistic` (likewise for the other
    /// generators).
    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix(FITZ_PREFIX) {
            Some(rest) => rest.parse().map(LossSpec::fitzpatrick),
            None => s.parse().map(LossSpec::fenchel_young),
        }
    }
}

/// Everything known about one loss evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: Vec<f64>,
    pub link: Vec<f64>,
    pub y_star: Vec<f64>,
    /// Root-solve details, Fitzpatrick logistic only.
    pub solve: Option<FitzSolveResult>,
}

/// Value and maximizer of a Fitzpatrick loss.
#[derive(Debug, Clone, PartialEq)]
pub struct FitzOutput<Y = ProbVector> {
    pub value: f64,
    pub y_star: Y,
}

/// Outcome of the one-dimensional solve behind the Fitzpatrick logistic
/// loss.
#[derive(Debug, Clone, PartialEq)]
pub struct FitzSolveResult {
    pub lambda_star: f64,
    pub y_star: ProbVector,
    /// `ln y*_i`, obtained as `θ_i - λ* + W_i` without exponentiating.
    pub log_y_star: Vec<f64>,
    /// Lambert W term per coordinate (zero where `y_i = 0`).
    pub w: Vec<f64>,
    /// Root-equation residual `Σ y*_i - 1` at `lambda_star`.
    pub residual: f64,
    pub iterations: usize,
    /// Proved bracket `(lo, hi)` for `lambda_star`.
    pub bracket: (f64, f64),
}

fn check_pair(generator: Generator, y: &[f64], theta: &[f64]) -> Result<()> {
    check_scores(theta)?;
    if y.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), found: y.len() });
    }
    if generator.on_simplex() {
        simplex_target(y)?;
    } else if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InfeasibleTarget(format!("non-finite target entry {bad}")));
    }
    Ok(())
}

fn simplex_target(y: &[f64]) -> Result<ProbVector> {
    ProbVector::new(y.to_vec()).map_err(|e| Error::InfeasibleTarget(e.to_string()))
}

fn check_dims(y: &[f64], theta: &[f64]) -> Result<()> {
    check_scores(theta)?;
    if y.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), found: y.len() });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// `½‖y‖² + ι_Δ` conjugate: `⟨ŷ, θ⟩ - ½‖ŷ‖²` with `ŷ = P_Δ(θ)`.
pub fn sparsemax_conjugate(theta: &[f64]) -> Result<f64> {
    let p = project_simplex(theta)?;
    Ok(dot(&p, theta) - 0.5 * dot(&p, &p))
}

/// Fenchel-Young loss `Ω(y) + Ω*(θ) - ⟨y, θ⟩`.
pub fn fy_value(generator: Generator, y: &[f64], theta: &[f64]) -> Result<f64> {
    check_pair(generator, y, theta)?;
    let value = match generator {
        Generator::Squared => half_sq_dist(y, theta),
        Generator::Perceptron => {
            let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            y.iter().zip(theta).map(|(yi, t)| yi * (max - t)).sum()
        }
        Generator::Sparsemax => {
            // ½‖y‖² + ⟨ŷ, θ⟩ - ½‖ŷ‖² - ⟨y, θ⟩, grouped to stay exact at ŷ = y
            let p = project_simplex(theta)?;
            p.iter()
                .zip(y)
                .zip(theta)
                .map(|((pi, yi), t)| (pi - yi) * (t - 0.5 * (pi + yi)))
                .sum()
        }
        Generator::Logistic => {
            // log Σ e^θ + ⟨y, log y⟩ - ⟨y, θ⟩ as Σ y_i (ln y_i - (θ_i - lse)), 0·ln 0 = 0
            let lse = lse_unchecked(theta);
            y.iter()
                .zip(theta)
                .filter(|(yi, _)| **yi > 0.0)
                .map(|(yi, t)| yi * (yi.ln() - (t - lse)))
                .sum()
        }
    };
    Ok(value.max(0.0))
}

/// Fenchel-Young gradient `ŷ(θ) - y`.
pub fn fy_grad(generator: Generator, y: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    LossSpec::fenchel_young(generator).grad(y, theta)
}

/// Fitzpatrick loss value for any generator.
pub fn fitz_value(generator: Generator, y: &[f64], theta: &[f64]) -> Result<f64> {
    check_pair(generator, y, theta)?;
    match generator {
        Generator::Squared => fitz_squared(y, theta).map(|o| o.value),
        Generator::Perceptron => fitz_perceptron(&simplex_target(y)?, theta).map(|o| o.value),
        Generator::Sparsemax => fitz_sparsemax(&simplex_target(y)?, theta).map(|o| o.value),
        Generator::Logistic => fitz_logistic(&simplex_target(y)?, theta).map(|o| o.value),
    }
}

/// Fitzpatrick (sub)gradient `y*(y, θ) - y`.
pub fn fitz_grad(generator: Generator, y: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    LossSpec::fitzpatrick(generator).grad(y, theta)
}

/// Unconstrained squared generator: `¼‖y - θ‖²`, `y* = (y + θ) / 2`.
pub fn fitz_squared(y: &[f64], theta: &[f64]) -> Result<FitzOutput<Vec<f64>>> {
    check_dims(y, theta)?;
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InfeasibleTarget(format!("non-finite target entry {bad}")));
    }
    Ok(FitzOutput {
        value: 0.5 * half_sq_dist(y, theta),
        y_star: y.iter().zip(theta).map(|(a, b)| 0.5 * (a + b)).collect(),
    })
}

/// Maximizer of `⟨y', θ⟩` over the simplex used by the perceptron losses.
///
/// With a unique maximum this is the vertex `argmax_vertex(θ)`. When several
/// coordinates tie, the maximizers form a face of the simplex and we return
/// the point of that face closest to `y`, i.e. the minimum-norm element of
/// the subdifferential `{y' - y}`.
fn perceptron_maximizer(y: &[f64], theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let face: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] == max).collect();
    let mut out = vec![0.0; theta.len()];
    if face.len() == 1 {
        out[face[0]] = 1.0;
        return out;
    }
    if face.len() == theta.len() {
        return y.to_vec();
    }
    let restricted: Vec<f64> = face.iter().map(|&i| y[i]).collect();
    let projected = project_simplex(&restricted).expect("finite restricted target");
    for (&i, v) in face.iter().zip(projected.iter()) {
        out[i] = *v;
    }
    out
}

/// Perceptron generator: coincides with the Fenchel-Young perceptron loss
/// `max_i θ_i - ⟨y, θ⟩`.
pub fn fitz_perceptron(y: &ProbVector, theta: &[f64]) -> Result<FitzOutput> {
    check_dims(y, theta)?;
    let value = fy_value(Generator::Perceptron, y, theta)?;
    Ok(FitzOutput {
        value,
        y_star: ProbVector::from_trusted(perceptron_maximizer(y, theta)),
    })
}

/// Sparsemax generator: `y* = P_Δ((y + θ)/2)`, value `⟨y* - y, θ - y*⟩`.
pub fn fitz_sparsemax(y: &ProbVector, theta: &[f64]) -> Result<FitzOutput> {
    check_dims(y, theta)?;
    let mid: Vec<f64> = y.iter().zip(theta).map(|(a, b)| 0.5 * (a + b)).collect();
    let y_star = project_simplex(&mid)?;
    let value: f64 = y_star
        .iter()
        .zip(y.iter())
        .zip(theta)
        .map(|((s, yi), t)| (s - yi) * (t - s))
        .sum();
    Ok(FitzOutput { value: value.max(0.0), y_star })
}

/// The same loss through the conjugate: `2Ω*((y + θ)/2) - ⟨y, θ⟩`.
pub fn fitz_sparsemax_conjugate_form(y: &ProbVector, theta: &[f64]) -> Result<f64> {
    check_dims(y, theta)?;
    let mid: Vec<f64> = y.iter().zip(theta).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(2.0 * sparsemax_conjugate(&mid)? - dot(y, theta))
}

/// Solves for the simplex multiplier `λ*` of the Fitzpatrick logistic loss.
///
/// `λ*` is the root of
/// `e^{-λ} Σ_{y_i = 0} e^{θ_i} + Σ_{y_i > 0} y_i / W(y_i e^{λ - θ_i}) = 1`,
/// which is decreasing in `λ` and bracketed by `lo = log Σ e^{θ_i}` and
/// `hi = log 2 + max{log Σ_{y_i=0} e^{θ_i}, log ℓ0 + max_{y_i>0}(θ_i + 2 ℓ0 y_i)}`
/// with `ℓ0` the support size of `y`. Bisection is followed by a few
/// safeguarded Newton steps that bring the residual to rounding level.
pub fn fitz_logistic_solve(
    y: &ProbVector,
    theta: &[f64],
    cfg: &BisectionConfig,
) -> Result<FitzSolveResult> {
    check_dims(y, theta)?;
    cfg.validate()?;
    let zero_theta: Vec<f64> = y
        .iter()
        .zip(theta)
        .filter(|(yi, _)| **yi == 0.0)
        .map(|(_, t)| *t)
        .collect();
    let support: Vec<(f64, f64, f64)> = y
        .iter()
        .zip(theta)
        .filter(|(yi, _)| **yi > 0.0)
        .map(|(yi, t)| (*yi, yi.ln(), *t))
        .collect();
    let zero_lse = (!zero_theta.is_empty()).then(|| lse_unchecked(&zero_theta));
    let l0 = support.len() as f64;

    let lo = lse_unchecked(theta);
    let support_bound = support
        .iter()
        .map(|(yi, _, t)| t + 2.0 * l0 * yi)
        .fold(f64::NEG_INFINITY, f64::max)
        + l0.ln();
    let hi = std::f64::consts::LN_2 + zero_lse.map_or(support_bound, |z| z.max(support_bound));

    // Σ y*_i - 1 and its derivative in λ
    let eval = |lambda: f64| -> Result<(f64, f64)> {
        let mut total = zero_lse.map_or(0.0, |z| (z - lambda).exp());
        let mut slope = -total;
        for &(yi, ln_yi, t) in &support {
            let w = lambert_w_exp(ln_yi + lambda - t)?;
            total += yi / w;
            slope -= yi / (w * (1.0 + w));
        }
        Ok((total - 1.0, slope))
    };

    let mut failure = None;
    let root = bisect(
        |lambda| match eval(lambda) {
            Ok((r, _)) => r,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi.max(lo + f64::EPSILON * lo.abs().max(1.0)),
        cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let root = root?;

    let (blo, bhi) = (root.bracket.0.min(lo), root.bracket.1.max(hi));
    let mut lambda = root.x;
    let (mut residual, mut slope) = eval(lambda)?;
    for _ in 0..4 {
        if residual == 0.0 || slope >= 0.0 {
            break;
        }
        let candidate = lambda - residual / slope;
        if !(blo..=bhi).contains(&candidate) {
            break;
        }
        let (r, s) = eval(candidate)?;
        if r.abs() >= residual.abs() {
            break;
        }
        lambda = candidate;
        residual = r;
        slope = s;
    }
    if residual.abs() > cfg.residual_tol {
        return Err(Error::NotConverged {
            best: lambda,
            residual,
            iterations: root.iterations,
        });
    }

    let mut w = vec![0.0; theta.len()];
    let mut y_star = vec![0.0; theta.len()];
    let mut log_y_star = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        if y[i] > 0.0 {
            w[i] = lambert_w_exp(y[i].ln() + lambda - theta[i])?;
            y_star[i] = y[i] / w[i];
        } else {
            y_star[i] = (theta[i] - lambda).exp();
        }
        log_y_star[i] = theta[i] - lambda + w[i];
    }
    Ok(FitzSolveResult {
        lambda_star: lambda,
        y_star: ProbVector::from_trusted(y_star),
        log_y_star,
        w,
        residual,
        iterations: root.iterations,
        bracket: (lo, hi),
    })
}

/// `⟨y* - y, θ - log y* - 1⟩` where `θ_i - log y*_i = λ* - W_i`.
fn fitz_logistic_value(y: &[f64], solve: &FitzSolveResult) -> f64 {
    let value: f64 = solve
        .y_star
        .iter()
        .zip(y)
        .zip(&solve.w)
        .map(|((s, yi), w)| (s - yi) * (solve.lambda_star - w - 1.0))
        .sum();
    value.max(0.0)
}

/// Negentropy generator with default solver settings.
pub fn fitz_logistic(y: &ProbVector, theta: &[f64]) -> Result<FitzOutput> {
    fitz_logistic_with(y, theta, &BisectionConfig::default())
}

pub fn fitz_logistic_with(
    y: &ProbVector,
    theta: &[f64],
    cfg: &BisectionConfig,
) -> Result<FitzOutput> {
    let solve = fitz_logistic_solve(y, theta, cfg)?;
    Ok(FitzOutput {
        value: fitz_logistic_value(y, &solve),
        y_star: solve.y_star,
    })
}
