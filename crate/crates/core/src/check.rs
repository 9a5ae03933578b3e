//! Randomized property suites over the whole library.
//!
//! Every trial draws from its own ChaCha stream, derived from the seed, the
//! property name and the trial index, so a report depends only on the seed
//! and trial counts, never on the execution mode or thread count.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::data::synth_generate;
use crate::error::{Error, Result};
use crate::losses::{
    fitz_logistic_solve, fitz_perceptron, fitz_sparsemax, fitz_sparsemax_conjugate_form, fitz_squared,
    fy_value, Generator, LossSpec,
};
use crate::numeric::{bisect, finite_diff_grad, lambert_w, lambert_w_exp, log_sum_exp, BisectionConfig};
use crate::oracle::{
    bregman, fitz_value_via_grid, fitz_value_via_stationarity, lower_bound_quadratic, BregmanGenerator, GridConfig,
};
use crate::par::Execution;
use crate::simplex::{project_simplex, softargmax, ProbVector};
use crate::train::{objective, TrainConfig, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Sandwich,
    Coincidences,
    Goldens,
    Solver,
    Gradients,
    Convexity,
    Shift,
    LinkZero,
    Grid,
    LowerBound,
    Stationarity,
    Numeric,
    Simplex,
    Objective,
    All,
}

impl Suite {
    pub const EACH: [Suite; 14] = [
        Suite::Sandwich,
        Suite::Coincidences,
        Suite::Goldens,
        Suite::Solver,
        Suite::Gradients,
        Suite::Convexity,
        Suite::Shift,
        Suite::LinkZero,
        Suite::Grid,
        Suite::LowerBound,
        Suite::Stationarity,
        Suite::Numeric,
        Suite::Simplex,
        Suite::Objective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Sandwich => "sandwich",
            Suite::Coincidences => "coincidences",
            Suite::Goldens => "goldens",
            Suite::Solver => "solver",
            Suite::Gradients => "gradients",
            Suite::Convexity => "convexity",
            Suite::Shift => "shift",
            Suite::LinkZero => "link-zero",
            Suite::Grid => "grid",
            Suite::LowerBound => "lower-bound",
            Suite::Stationarity => "stationarity",
            Suite::Numeric => "numeric",
            Suite::Simplex => "simplex",
            Suite::Objective => "objective",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub seed: u64,
    /// Overrides every property's default trial count.
    pub trials: Option<usize>,
    /// Pins the dimension of sampled instances.
    pub k: Option<usize>,
    pub grid_resolution: usize,
    pub execution: Execution,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { seed: 0, trials: None, k: None, grid_resolution: 400, execution: Execution::default() }
    }
}

/// The instance a measurement was taken on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Counterexample {
    pub label: String,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    pub detail: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} y={:?} theta={:?}", self.label, self.y, self.theta)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Largest measured error; infinite when an evaluation failed.
    pub worst: f64,
    pub tolerance: f64,
    /// The instance behind `worst`.
    pub worst_case: Option<Counterexample>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<40} trials={:<6} failures={:<5} worst={:.3e} tol={:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.failures,
            self.worst,
            self.tolerance
        )?;
        if let (false, Some(case)) = (self.passed(), &self.worst_case) {
            write!(f, "\n     counterexample: {case}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub properties: Vec<PropertyReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyReport::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyReport> {
        self.properties.iter().filter(|p| !p.passed())
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.properties {
            writeln!(f, "{p}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} of {} properties passed", self.properties.len() - failed, self.properties.len())
    }
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn run_suite(suite: Suite, cfg: &CheckConfig) -> Result<SuiteReport> {
    if let Some(k) = cfg.k {
        if k < 2 {
            return Err(Error::domain(format!("--k must be at least 2, got {k}")));
        }
    }
    let properties = match suite {
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                // the grid oracle only exists for small k
                if s == Suite::Grid && cfg.k.is_some_and(|k| k > 3) {
                    continue;
                }
                all.extend(run_suite(s, cfg)?.properties);
            }
            all
        }
        Suite::Sandwich => sandwich(cfg),
        Suite::Coincidences => coincidences(cfg),
        Suite::Goldens => goldens(cfg),
        Suite::Solver => solver(cfg),
        Suite::Gradients => gradients(cfg),
        Suite::Convexity => convexity(cfg),
        Suite::Shift => shift(cfg),
        Suite::LinkZero => link_zero(cfg),
        Suite::Grid => grid_suite(cfg)?,
        Suite::LowerBound => lower_bound_suite(cfg),
        Suite::Stationarity => stationarity_suite(cfg),
        Suite::Numeric => numeric(cfg),
        Suite::Simplex => simplex(cfg),
        Suite::Objective => objective_suite(cfg),
    };
    Ok(SuiteReport { properties })
}

// ---------------------------------------------------------------------------
// trial machinery

struct Measured {
    error: f64,
    case: Counterexample,
}

fn case(label: impl Into<String>, y: &[f64], theta: &[f64]) -> Counterexample {
    Counterexample { label: label.into(), y: y.to_vec(), theta: theta.to_vec(), detail: String::new() }
}

fn measure(mut case: Counterexample, result: Result<f64>) -> Measured {
    match result {
        Ok(error) => Measured { error, case },
        Err(e) => {
            case.detail = e.to_string();
            Measured { error: f64::INFINITY, case }
        }
    }
}

fn stream_id(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn trial_rng(seed: u64, stream: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((trial as u128) << 24);
    rng
}

fn single(name: &str, tolerance: f64, m: Measured) -> PropertyReport {
    let error = if m.error.is_nan() { f64::INFINITY } else { m.error };
    PropertyReport {
        name: name.to_string(),
        trials: 1,
        failures: usize::from(!(error <= tolerance)),
        worst: error,
        tolerance,
        worst_case: Some(m.case),
    }
}

fn run_property<F>(name: &str, tolerance: f64, default_trials: usize, cfg: &CheckConfig, f: F) -> PropertyReport
where
    F: Fn(&mut ChaCha8Rng) -> Measured + Sync + Send,
{
    let trials = cfg.trials.unwrap_or(default_trials);
    let stream = stream_id(name);
    let results = cfg.execution.map_range(trials, |i| f(&mut trial_rng(cfg.seed, stream, i)));
    let mut report = PropertyReport {
        name: name.to_string(),
        trials,
        failures: 0,
        worst: 0.0,
        tolerance,
        worst_case: None,
    };
    for m in results {
        let error = if m.error.is_nan() { f64::INFINITY } else { m.error };
        if !(error <= tolerance) {
            report.failures += 1;
        }
        if report.worst_case.is_none() || error > report.worst {
            report.worst = error;
            report.worst_case = Some(m.case);
        }
    }
    report
}

// ---------------------------------------------------------------------------
// samplers

fn sample_k(rng: &mut ChaCha8Rng, cfg: &CheckConfig, lo: usize, hi: usize) -> usize {
    cfg.k.unwrap_or_else(|| rng.random_range(lo..=hi))
}

fn sample_theta(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let scale = [0.1, 1.0, 5.0][rng.random_range(0..3)];
    let mut theta: Vec<f64> = (0..k).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    if k > 1 && rng.random_bool(0.05) {
        let (i, j) = (rng.random_range(0..k), rng.random_range(0..k));
        theta[i] = theta[j];
    }
    theta
}

fn sample_interior(rng: &mut ChaCha8Rng, k: usize) -> ProbVector {
    let w: Vec<f64> = (0..k).map(|_| 0.01 + rng.sample::<f64, _>(Exp1)).collect();
    ProbVector::normalized(&w).expect("positive weights")
}

/// Interior points, sparse points and vertices.
fn sample_simplex(rng: &mut ChaCha8Rng, k: usize) -> ProbVector {
    match rng.random_range(0..4) {
        0 => ProbVector::vertex(k, rng.random_range(0..k)),
        1 => {
            let mut w: Vec<f64> = (0..k).map(|_| 0.01 + rng.sample::<f64, _>(Exp1)).collect();
            let zeros = rng.random_range(1..k);
            for _ in 0..zeros {
                let i = rng.random_range(0..k);
                w[i] = 0.0;
            }
            if w.iter().all(|v| *v == 0.0) {
                w[rng.random_range(0..k)] = 1.0;
            }
            ProbVector::normalized(&w).expect("nonzero weights")
        }
        _ => sample_interior(rng, k),
    }
}

/// A target for `generator`: any vector for squared, a simplex point
/// otherwise.
fn sample_target(rng: &mut ChaCha8Rng, generator: Generator, k: usize) -> Vec<f64> {
    if generator.on_simplex() {
        sample_simplex(rng, k).into_vec()
    } else {
        let scale = [0.1, 1.0, 5.0][rng.random_range(0..3)];
        (0..k).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// suites

fn sandwich(cfg: &CheckConfig) -> Vec<PropertyReport> {
    Generator::ALL
        .iter()
        .map(|&g| {
            run_property(&format!("sandwich/{g}"), 1e-9, 10_000, cfg, |rng| {
                let k = sample_k(rng, cfg, 2, 10);
                let y = sample_target(rng, g, k);
                let theta = sample_theta(rng, k);
                let result = (|| {
                    let fitz = LossSpec::fitzpatrick(g).value(&y, &theta)?;
                    let fy = LossSpec::fenchel_young(g).value(&y, &theta)?;
                    Ok((-fitz).max(fitz - fy).max(0.0))
                })();
                measure(case(g.name(), &y, &theta), result)
            })
        })
        .collect()
}

fn coincidences(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let squared = run_property("coincide/fitz-squared=half-fy", 1e-12, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_target(rng, Generator::Squared, k);
        let theta = sample_theta(rng, k);
        let result = (|| Ok((fitz_squared(&y, &theta)?.value - 0.5 * fy_value(Generator::Squared, &y, &theta)?).abs()))();
        measure(case("squared", &y, &theta), result)
    });
    let perceptron = run_property("coincide/fitz-perceptron=fy", 1e-12, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_simplex(rng, k);
        let theta = sample_theta(rng, k);
        let result =
            (|| Ok((fitz_perceptron(&y, &theta)?.value - fy_value(Generator::Perceptron, &y, &theta)?).abs()))();
        measure(case("perceptron", &y, &theta), result)
    });
    let sparsemax = run_property("coincide/sparsemax-two-forms", 1e-10, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_simplex(rng, k);
        let theta = sample_theta(rng, k);
        let result =
            (|| Ok((fitz_sparsemax(&y, &theta)?.value - fitz_sparsemax_conjugate_form(&y, &theta)?).abs()))();
        measure(case("sparsemax", &y, &theta), result)
    });
    vec![squared, perceptron, sparsemax]
}

fn goldens(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let fixed = |name: &str, tol: f64, label: &str, y: &[f64], theta: &[f64], f: &dyn Fn() -> Result<f64>| {
        single(name, tol, measure(case(label, y, theta), f()))
    };
    let e1 = ProbVector::vertex(2, 0);
    let zero = [0.0, 0.0];
    let mut out = vec![
        fixed("golden/fitz-sparsemax(e1,0)", 1e-12, "sparsemax", &e1, &zero, &|| {
            let out = fitz_sparsemax(&e1, &zero)?;
            Ok((out.value - 0.125).abs().max(max_abs_diff(&out.y_star, &[0.75, 0.25])))
        }),
        fixed("golden/fitz-logistic(e1,0)", 1e-12, "logistic", &e1, &zero, &|| {
            let s = fitz_logistic_solve(&e1, &zero, &BisectionConfig::default())?;
            let value = LossSpec::fitzpatrick(Generator::Logistic).value(&e1, &zero)?;
            Ok((value - 0.278_464_542_761_073_8)
                .abs()
                .max((s.lambda_star - 1.524_124_324_657_529_3).abs())
                .max(max_abs_diff(&s.y_star, &[0.782_188_294_280_199_9, 0.217_811_705_719_800_1])))
        }),
        fixed("golden/fy-logistic(e1,0)=ln2", 1e-12, "logistic", &e1, &zero, &|| {
            Ok((fy_value(Generator::Logistic, &e1, &zero)? - std::f64::consts::LN_2).abs())
        }),
        fixed("golden/lambert-w(1)", 1e-15, "lambert_w", &[], &[1.0], &|| {
            Ok((lambert_w(1.0)? - 0.567_143_290_409_783_8).abs())
        }),
    ];
    out.push(run_property("golden/lambda*-at-link=1+lse", 1e-8, 100, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let theta = sample_theta(rng, k);
        let result = (|| {
            let y = softargmax(&theta)?;
            let s = fitz_logistic_solve(&y, &theta, &BisectionConfig::default())?;
            Ok((s.lambda_star - 1.0 - log_sum_exp(&theta)?).abs())
        })();
        measure(case("logistic", &[], &theta), result)
    }));
    out
}

fn solver(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let solve = |rng: &mut ChaCha8Rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_simplex(rng, k);
        let theta = sample_theta(rng, k);
        let result = fitz_logistic_solve(&y, &theta, &BisectionConfig::default());
        (case("logistic", &y, &theta), result)
    };
    vec![
        run_property("solver/residual", 1e-10, 1000, cfg, |rng| {
            let (c, r) = solve(rng);
            measure(c, r.map(|s| s.residual.abs()))
        }),
        run_property("solver/lambda*-in-bracket", 0.0, 1000, cfg, |rng| {
            let (c, r) = solve(rng);
            measure(
                c,
                r.map(|s| (s.bracket.0 - s.lambda_star).max(s.lambda_star - s.bracket.1).max(0.0)),
            )
        }),
        run_property("solver/y*-sums-to-one", 1e-8, 1000, cfg, |rng| {
            let (c, r) = solve(rng);
            measure(c, r.map(|s| (s.y_star.iter().sum::<f64>() - 1.0).abs()))
        }),
    ]
}

/// `‖a - b‖∞ / max(‖a‖∞, ‖b‖∞)`, absolute when both are below `1e-8`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    max_abs_diff(a, b) / scale.max(1e-8)
}

/// True when every projection that the loss goes through keeps its support
/// under `±h` probes of each score, and no argmax is within `h` of a tie.
fn smooth_at(loss: LossSpec, y: &[f64], theta: &[f64], h: f64) -> bool {
    let support = |z: &[f64]| project_simplex(z).ok().map(|p| p.iter().map(|v| *v > 0.0).collect::<Vec<_>>());
    let stable = |z: &[f64]| {
        let base = support(z);
        (0..z.len()).all(|i| {
            [-h, h].iter().all(|d| {
                let mut probe = z.to_vec();
                probe[i] += d;
                support(&probe) == base
            })
        })
    };
    match (loss.generator, loss.family) {
        (Generator::Perceptron, _) => {
            let mut sorted = theta.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted[0] - sorted[1] > 1e3 * h
        }
        (Generator::Sparsemax, crate::Family::FenchelYoung) => stable(theta),
        (Generator::Sparsemax, crate::Family::Fitzpatrick) => {
            let mid: Vec<f64> = y.iter().zip(theta).map(|(a, b)| 0.5 * (a + b)).collect();
            // the midpoint moves by h/2 per probe
            stable(&mid) && stable(theta)
        }
        _ => true,
    }
}

fn gradients(cfg: &CheckConfig) -> Vec<PropertyReport> {
    LossSpec::all()
        .into_iter()
        .map(|loss| {
            run_property(&format!("gradient/{loss}"), 1e-4, 100, cfg, |rng| {
                let k = sample_k(rng, cfg, 2, 6);
                let y = if loss.generator.on_simplex() {
                    sample_interior(rng, k).into_vec()
                } else {
                    sample_target(rng, loss.generator, k)
                };
                let mut theta = sample_theta(rng, k);
                for _ in 0..1000 {
                    if smooth_at(loss, &y, &theta, 1e-6) {
                        break;
                    }
                    theta = sample_theta(rng, k);
                }
                let result = (|| {
                    let g = loss.grad(&y, &theta)?;
                    let fd = finite_diff_grad(|t| loss.value(&y, t).unwrap_or(f64::NAN), &theta, 1e-6)?;
                    Ok(relative_error(&g, &fd))
                })();
                measure(case(loss.to_string(), &y, &theta), result)
            })
        })
        .collect()
}

fn convexity(cfg: &CheckConfig) -> Vec<PropertyReport> {
    LossSpec::all()
        .into_iter()
        .map(|loss| {
            run_property(&format!("convexity/{loss}"), 1e-9, 1000, cfg, |rng| {
                let k = sample_k(rng, cfg, 2, 10);
                let y = sample_target(rng, loss.generator, k);
                let t1 = sample_theta(rng, k);
                let t2 = sample_theta(rng, k);
                let mid: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| 0.5 * (a + b)).collect();
                let result = (|| {
                    let gap = loss.value(&y, &mid)? - 0.5 * (loss.value(&y, &t1)? + loss.value(&y, &t2)?);
                    Ok(gap.max(0.0))
                })();
                let mut c = case(loss.to_string(), &y, &t1);
                c.detail = format!("theta2={t2:?}");
                measure(c, result)
            })
        })
        .collect()
}

fn shift(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let mut out: Vec<PropertyReport> = LossSpec::all()
        .into_iter()
        .filter(|l| l.generator.on_simplex())
        .map(|loss| {
            run_property(&format!("shift/{loss}"), 1e-9, 1000, cfg, |rng| {
                let k = sample_k(rng, cfg, 2, 10);
                let y = sample_simplex(rng, k);
                let theta = sample_theta(rng, k);
                let c = rng.random_range(-100.0..100.0);
                let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
                let result = (|| Ok((loss.value(&y, &shifted)? - loss.value(&y, &theta)?).abs()))();
                measure(case(format!("{loss} c={c}"), &y, &theta), result)
            })
        })
        .collect();
    out.push(run_property("shift/lambda*", 1e-8, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_simplex(rng, k);
        let theta = sample_theta(rng, k);
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
        let result = (|| {
            let bc = BisectionConfig::default();
            let a = fitz_logistic_solve(&y, &shifted, &bc)?.lambda_star;
            let b = fitz_logistic_solve(&y, &theta, &bc)?.lambda_star;
            Ok((a - b - c).abs())
        })();
        measure(case(format!("logistic c={c}"), &y, &theta), result)
    }));
    out
}

fn link_zero(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let mut out: Vec<PropertyReport> = LossSpec::all()
        .into_iter()
        .map(|loss| {
            run_property(&format!("link-zero/{loss}"), 1e-9, 1000, cfg, |rng| {
                let k = sample_k(rng, cfg, 2, 10);
                let theta = sample_theta(rng, k);
                let result = (|| {
                    let y = loss.link(&theta)?;
                    loss.value(&y, &theta)
                })();
                measure(case(loss.to_string(), &[], &theta), result)
            })
        })
        .collect();
    // conversely, a vanishing loss pins y to the link for strictly convex generators
    for g in [Generator::Squared, Generator::Sparsemax, Generator::Logistic] {
        for loss in [LossSpec::fenchel_young(g), LossSpec::fitzpatrick(g)] {
            out.push(run_property(&format!("zero-implies-link/{loss}"), 1e-4, 1000, cfg, |rng| {
                let k = sample_k(rng, cfg, 2, 10);
                let theta = sample_theta(rng, k);
                // half the draws land near the link so the premise is exercised
                let y = match (rng.random_bool(0.5), loss.link(&theta)) {
                    (true, Ok(link)) if g.on_simplex() => {
                        let noise = sample_interior(rng, k);
                        let t = 10f64.powf(rng.random_range(-12.0..-2.0));
                        link.iter().zip(noise.iter()).map(|(a, b)| (1.0 - t) * a + t * b).collect()
                    }
                    (true, Ok(link)) => link.iter().map(|a| a + 1e-6 * rng.sample::<f64, _>(StandardNormal)).collect(),
                    _ => sample_target(rng, g, k),
                };
                let result = (|| {
                    let value = loss.value(&y, &theta)?;
                    Ok(if value < 1e-9 { max_abs_diff(&y, &loss.link(&theta)?) } else { 0.0 })
                })();
                measure(case(loss.to_string(), &y, &theta), result)
            }));
        }
    }
    out
}

fn grid_suite(cfg: &CheckConfig) -> Result<Vec<PropertyReport>> {
    let grid = GridConfig { resolution: cfg.grid_resolution, k_max: 3, execution: Execution::Sequential };
    grid.validate()?;
    let ks: Vec<usize> = match cfg.k {
        Some(k) if (2..=3).contains(&k) => vec![k],
        Some(k) => return Err(Error::UnsupportedDimension { k, max: 3 }),
        None => vec![2, 3],
    };
    let tol = 5.0 / grid.resolution as f64;
    let mut out = Vec::new();
    for g in [Generator::Sparsemax, Generator::Logistic] {
        let gen = BregmanGenerator::for_simplex_generator(g).expect("simplex generator");
        for &k in &ks {
            let sub = CheckConfig { k: Some(k), ..*cfg };
            out.push(run_property(&format!("grid/{g}/k={k}"), tol, 50, &sub, |rng| {
                let y = sample_simplex(rng, k);
                // the interior grid misses boundary maxima by about
                // spread(θ) / resolution, so scores stay at unit scale
                let theta: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let result = (|| {
                    let grid_value = fitz_value_via_grid(gen, &y, &theta, &grid)?;
                    Ok((grid_value - LossSpec::fitzpatrick(g).value(&y, &theta)?).abs())
                })();
                measure(case(g.name(), &y, &theta), result)
            }));
        }
    }
    Ok(out)
}

fn lower_bound_suite(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let mut out = Vec::new();
    for g in [Generator::Sparsemax, Generator::Logistic] {
        let gen = BregmanGenerator::for_simplex_generator(g).expect("simplex generator");
        out.push(run_property(&format!("lower-bound/{g}"), 1e-8, 1000, cfg, |rng| {
            let k = sample_k(rng, cfg, 2, 10);
            let y = sample_simplex(rng, k);
            let theta = sample_theta(rng, k);
            let result = (|| {
                let eval = LossSpec::fitzpatrick(g).evaluate(&y, &theta)?;
                Ok((lower_bound_quadratic(gen, &y, &eval.y_star)? - eval.value).max(0.0))
            })();
            measure(case(g.name(), &y, &theta), result)
        }));
    }
    out.push(run_property("lower-bound/squared-equality", 1e-12, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_target(rng, Generator::Squared, k);
        let theta = sample_theta(rng, k);
        let result = (|| {
            let out = fitz_squared(&y, &theta)?;
            Ok((lower_bound_quadratic(BregmanGenerator::Squared, &y, &out.y_star)? - out.value).abs())
        })();
        measure(case("squared", &y, &theta), result)
    }));
    out
}

fn stationarity_suite(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let stationarity = run_property("stationarity/squared-stationarity", 1e-12, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_target(rng, Generator::Squared, k);
        let theta = sample_theta(rng, k);
        let result = (|| {
            let (value, y_star) = fitz_value_via_stationarity(|t| t, |_| 1.0, &y, &theta)?;
            let closed = fitz_squared(&y, &theta)?;
            Ok((value - closed.value).abs().max(max_abs_diff(&y_star, &closed.y_star)))
        })();
        measure(case("squared", &y, &theta), result)
    });
    let bregman_positive = run_property("bregman/positive-off-diagonal", 0.0, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let y = sample_interior(rng, k);
        let y2 = sample_interior(rng, k);
        let result = (|| {
            let mut worst: f64 = 0.0;
            for gen in [BregmanGenerator::Squared, BregmanGenerator::NEGENTROPY] {
                let off = bregman(gen, &y, &y2)?.finite().unwrap_or(f64::INFINITY);
                let diag = bregman(gen, &y, &y)?.finite().unwrap_or(f64::INFINITY);
                if !(off > 0.0) || y == y2 {
                    worst = f64::INFINITY;
                }
                worst = worst.max((diag.abs() - 1e-15).max(0.0));
            }
            Ok(worst)
        })();
        measure(case("bregman", &y, &y2), result)
    });
    vec![stationarity, bregman_positive]
}

fn numeric(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let agree = run_property("numeric/lambert-w-vs-exp-form", 1e-12, 1000, cfg, |rng| {
        let x: f64 = rng.random_range(-700.0..690.0);
        let result = (|| {
            let a = lambert_w(x.exp())?;
            let b = lambert_w_exp(x)?;
            Ok(if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
        })();
        measure(case("lambert_w", &[], &[x]), result)
    });
    let monotone = run_property("numeric/lambert-w-monotone", 0.0, 100, cfg, |rng| {
        let mut zs: Vec<f64> = (0..200).map(|_| 10f64.powf(rng.random_range(-20.0..300.0))).collect();
        zs.sort_by(f64::total_cmp);
        let result = (|| {
            let ws = zs.iter().map(|&z| lambert_w(z)).collect::<Result<Vec<_>>>()?;
            Ok(ws.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max))
        })();
        measure(case("lambert_w", &[], &zs[..3]), result)
    });
    let lse = run_property("numeric/lse-shift", 1e-12, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 1, 10);
        let theta = sample_theta(rng, k);
        let c = rng.random_range(-1e3..1e3);
        let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
        let result = (|| Ok((log_sum_exp(&shifted)? - log_sum_exp(&theta)? - c).abs()))();
        measure(case(format!("lse c={c}"), &[], &theta), result)
    });
    let bisection = run_property("numeric/bisect-residual", 1e-10, 1000, cfg, |rng| {
        let cfg = BisectionConfig::default();
        let target: f64 = rng.random_range(-5.0..5.0);
        let family = rng.random_range(0..4);
        let f = move |x: f64| match family {
            0 => target - x,
            1 => target - x * x * x,
            2 => target.abs() + 0.1 - x.exp(),
            _ => target - x - x.tanh(),
        };
        let result = bisect(f, -2.0, 2.0, &cfg).map(|root| f(root.x).abs());
        measure(case(format!("bisect family={family}"), &[], &[target]), result)
    });
    vec![agree, monotone, lse, bisection]
}

fn simplex(cfg: &CheckConfig) -> Vec<PropertyReport> {
    let kkt = run_property("simplex/projection-kkt", 1e-12, 10_000, cfg, |rng| {
        let k = sample_k(rng, cfg, 1, 8);
        let z = sample_theta(rng, k);
        let result = project_simplex(&z).map(|p| {
            // p = max(z - τ, 0) for a single τ
            let support: Vec<usize> = (0..k).filter(|&i| p[i] > 0.0).collect();
            let tau = z[support[0]] - p[support[0]];
            let mut err = (p.iter().sum::<f64>() - 1.0).abs();
            for i in 0..k {
                err = err.max(if p[i] > 0.0 { (z[i] - p[i] - tau).abs() } else { (z[i] - tau).max(0.0) });
            }
            err
        });
        measure(case("project_simplex", &[], &z), result)
    });
    let grid = run_property("simplex/projection-vs-grid", 1e-12, 300, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 3).min(3);
        let z = sample_theta(rng, k);
        let result = project_simplex(&z).map(|p| {
            let obj = |q: &[f64]| q.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let r = 1000usize;
            let mut best = f64::INFINITY;
            for a in 0..=r {
                if k == 2 {
                    best = best.min(obj(&[a as f64 / r as f64, (r - a) as f64 / r as f64]));
                } else {
                    for b in 0..=(r - a) {
                        best = best.min(obj(&[a as f64 / r as f64, b as f64 / r as f64, (r - a - b) as f64 / r as f64]));
                    }
                }
            }
            // never worse than a grid point; never better than the grid by
            // more than one spacing step allows
            let spacing = 1.0 / r as f64;
            let slack = 2.0 * spacing * (obj(&p).sqrt() + 1.0) * (k as f64).sqrt() + spacing * spacing * k as f64;
            let worse = (obj(&p) - best).max(0.0);
            let better = (best - obj(&p) - slack).max(0.0);
            worse.max(better)
        });
        measure(case("project_simplex", &[], &z), result)
    });
    let co_sorted = run_property("simplex/co-sorting", 0.0, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 2, 10);
        let theta = sample_theta(rng, k);
        let result = (|| {
            let mut worst: f64 = 0.0;
            for link in [project_simplex(&theta)?, softargmax(&theta)?] {
                for i in 0..k {
                    for j in 0..k {
                        if theta[i] > theta[j] {
                            worst = worst.max(link[j] - link[i]);
                        }
                    }
                }
            }
            Ok(worst)
        })();
        measure(case("links", &[], &theta), result)
    });
    let shift = run_property("simplex/projection-shift", 1e-12, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 1, 10);
        let theta = sample_theta(rng, k);
        let c = rng.random_range(-10.0..10.0);
        let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
        let result = (|| Ok(max_abs_diff(&project_simplex(&shifted)?, &project_simplex(&theta)?)))();
        measure(case(format!("project_simplex c={c}"), &[], &theta), result)
    });
    let softmax = run_property("simplex/softargmax-positive", 1e-12, 1000, cfg, |rng| {
        let k = sample_k(rng, cfg, 1, 10);
        let theta = sample_theta(rng, k);
        let result = softargmax(&theta).map(|p| {
            let positive = if p.iter().all(|v| *v > 0.0) { 0.0 } else { f64::INFINITY };
            positive + (p.iter().sum::<f64>() - 1.0).abs()
        });
        measure(case("softargmax", &[], &theta), result)
    });
    vec![kkt, grid, co_sorted, shift, softmax]
}

fn objective_suite(cfg: &CheckConfig) -> Vec<PropertyReport> {
    LossSpec::all()
        .into_iter()
        .flat_map(|loss| {
            let k = cfg.k.unwrap_or(3);
            let data = synth_generate(cfg.seed, 10, 4, k, 0.3);
            let gradient = run_property(&format!("objective-gradient/{loss}"), 1e-4, 20, cfg, |rng| {
                let result = shared(&data).and_then(|data| {
                    // five samples, as in the training invariants
                    let dataset = crate::data::Dataset::single_split(
                        "five",
                        data.features().slice(ndarray::s![..5, ..]).to_owned(),
                        data.labels()[..5].to_vec(),
                    )?;
                    let train = TrainConfig { execution: Execution::Sequential, ..TrainConfig::new(loss, 0.7) };
                    let w = random_weights(rng, k, dataset.d());
                    let (_, g) = objective(&w, &dataset.all(), &train)?;
                    let fd = finite_diff_grad(
                        |flat| {
                            let w = WeightMatrix::from_array(Array2::from_shape_vec((k, dataset.d()), flat.to_vec()).unwrap());
                            w.and_then(|w| objective(&w, &dataset.all(), &train)).map_or(f64::NAN, |(v, _)| v)
                        },
                        w.as_flat(),
                        1e-6,
                    )?;
                    Ok(relative_error(g.as_flat(), &fd))
                });
                measure(case(loss.to_string(), &[], &[]), result)
            });
            let convex = run_property(&format!("objective-convexity/{loss}"), 1e-9, 50, cfg, |rng| {
                let result = shared(&data).and_then(|data| {
                    let train = TrainConfig { execution: Execution::Sequential, ..TrainConfig::new(loss, 0.7) };
                    let a = random_weights(rng, k, data.d());
                    let b = random_weights(rng, k, data.d());
                    let mid = WeightMatrix::from_array((a.array() + b.array()) * 0.5)?;
                    let f = |w: &WeightMatrix| objective(w, &data.all(), &train).map(|(v, _)| v);
                    Ok((f(&mid)? - 0.5 * (f(&a)? + f(&b)?)).max(0.0))
                });
                measure(case(loss.to_string(), &[], &[]), result)
            });
            [gradient, convex]
        })
        .collect()
}

fn shared<T>(r: &Result<T>) -> Result<&T> {
    r.as_ref().map_err(|e| Error::domain(e.to_string()))
}

fn random_weights(rng: &mut ChaCha8Rng, k: usize, d: usize) -> WeightMatrix {
    let scale = [0.1, 1.0][rng.random_range(0..2)];
    WeightMatrix::from_array(Array2::from_shape_fn((k, d), |_| scale * rng.sample::<f64, _>(StandardNormal)))
        .expect("finite")
}
