//! Scalar kernels shared by the losses and their tests: the principal branch
//! of the Lambert W function (directly and in log-domain), a shifted
//! log-sum-exp, a guarded bisection for monotone-decreasing functions and
//! central finite differences.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Termination settings for [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    /// Stop once the bracket is narrower than this.
    pub abs_tol: f64,
    /// Stop once `|f(x)|` falls below this.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig {
            abs_tol: 1e-12,
            residual_tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.residual_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::domain(format!("invalid bisection config {self:?}")));
        }
        Ok(())
    }
}

/// Outcome of a successful [`bisect`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `f(x)` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// Bracket in force when bisection started (after any expansion).
    pub bracket: (f64, f64),
}

/// Maximum number of outward doublings attempted when the initial interval
/// does not straddle a sign change.
const MAX_EXPANSIONS: usize = 60;

/// Principal branch of the Lambert W function on `z >= 0`.
pub fn lambert_w(z: f64) -> Result<f64> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::domain(format!("lambert_w needs a finite z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z > 1e300 {
        // w·e^w overflows during the iteration this close to f64::MAX.
        return lambert_w_exp(z.ln());
    }
    Ok(halley(z, initial_guess(z)))
}

fn initial_guess(z: f64) -> f64 {
    if z < 1.0 {
        z
    } else if z >= E {
        let lz = z.ln();
        lz - lz.ln()
    } else {
        // linear interpolation between W(1) and W(e) = 1
        0.567_143_290_409_783_8 + (z - 1.0) * (1.0 - 0.567_143_290_409_783_8) / (E - 1.0)
    }
}

fn halley(z: f64, mut w: f64) -> f64 {
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - z;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// `W(e^x)` without forming `e^x` when it would overflow.
///
/// Above `x = 690` the root of `w + ln w = x` is found by Newton steps
/// started from `x - ln x`; below `-700` the result is `e^x` itself, which is
/// exact to well under an ulp there.
pub fn lambert_w_exp(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("lambert_w_exp needs a finite x, got {x}")));
    }
    if x < -700.0 {
        return Ok(x.exp());
    }
    if x <= 690.0 {
        return lambert_w(x.exp());
    }
    let mut w = x - x.ln();
    for _ in 0..64 {
        let h = w + w.ln() - x;
        let step = h / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 2.0 * f64::EPSILON * w {
            break;
        }
    }
    Ok(w)
}

/// `ln Σ exp(θ_i)`, shifted by the maximum so it never overflows.
pub fn log_sum_exp(theta: &[f64]) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::domain("log_sum_exp of an empty vector"));
    }
    if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
        return Err(Error::domain(format!("log_sum_exp of non-finite entry {bad}")));
    }
    Ok(lse_unchecked(theta))
}

pub(crate) fn lse_unchecked(theta: &[f64]) -> f64 {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = theta.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Root of a monotone-decreasing `f` on `[lo, hi]`.
///
/// If `f(lo) >= 0 >= f(hi)` does not hold, the interval is doubled outward on
/// the offending side(s) up to 60 times before giving up with
/// [`Error::NoRoot`].
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, cfg: &BisectionConfig) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    cfg.validate()?;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::domain(format!("bisect needs finite lo < hi, got [{lo}, {hi}]")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    let mut expansions = 0;
    while !(flo >= 0.0 && fhi <= 0.0) {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::NoRoot { lo, hi });
        }
        let width = hi - lo;
        if !(flo >= 0.0) {
            lo -= width;
            flo = f(lo);
        }
        if !(fhi <= 0.0) {
            hi += width;
            fhi = f(hi);
        }
        expansions += 1;
    }
    let bracket = (lo, hi);
    if flo == 0.0 {
        return Ok(Root { x: lo, residual: 0.0, iterations: 0, bracket });
    }
    if fhi == 0.0 {
        return Ok(Root { x: hi, residual: 0.0, iterations: 0, bracket });
    }

    let (mut best, mut best_f) = if flo.abs() <= fhi.abs() { (lo, flo) } else { (hi, fhi) };
    for iter in 1..=cfg.max_iter {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            // bracket is down to adjacent floats
            return Ok(Root { x: best, residual: best_f, iterations: iter, bracket });
        }
        let fm = f(mid);
        if fm.abs() < best_f.abs() {
            best = mid;
            best_f = fm;
        }
        if fm.abs() <= cfg.residual_tol {
            return Ok(Root { x: mid, residual: fm, iterations: iter, bracket });
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= cfg.abs_tol {
            return Ok(Root { x: best, residual: best_f, iterations: iter, bracket });
        }
    }
    Err(Error::NotConverged {
        best,
        residual: best_f,
        iterations: cfg.max_iter,
    })
}

/// Central differences `(f(θ + h e_i) - f(θ - h e_i)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::domain(format!("finite difference step must be positive, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        for value in [up, down] {
            if !value.is_finite() {
                return Err(Error::Evaluation { coordinate: i, value });
            }
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
