//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use super::{objective, TrainConfig, WeightMatrix};
use crate::data::SplitView;
use crate::error::{Error, Result};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 30;
const MAX_ZOOM: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub w: WeightMatrix,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Final `‖∇‖ / ‖∇₀‖` (zero when the start point is already stationary).
    pub grad_norm_rel: f64,
    pub converged: bool,
}

/// Fits the model on `data` starting from `W = 0`.
pub fn lbfgs_minimize(data: &SplitView<'_>, cfg: &TrainConfig) -> Result<LbfgsOutcome> {
    cfg.validate()?;
    let (k, d) = (data.dataset().k(), data.dataset().d());
    let eval = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
        let w = WeightMatrix::from_flat(k, d, flat.to_vec());
        let (v, g) = objective(&w, data, cfg)?;
        Ok((v, g.as_flat().to_vec()))
    };
    let out = lbfgs_minimize_fn(eval, vec![0.0; k * d], cfg.lbfgs_memory, cfg.grad_tol, cfg.max_iter)
        .map_err(|e| match e {
            Error::LineSearch { iteration, best_value, best } => Error::LineSearch {
                iteration,
                best_value,
                best: Box::new(WeightMatrix::from_flat(k, d, best.as_flat().to_vec())),
            },
            other => other,
        })?;
    Ok(LbfgsOutcome { w: WeightMatrix::from_flat(k, d, out.w.as_flat().to_vec()), ..out })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// L-BFGS on a flat parameter vector. The returned `w` (and the best
/// iterate carried by [`Error::LineSearch`]) is a `1 × n` matrix.
pub fn lbfgs_minimize_fn<F>(
    mut eval: F,
    x0: Vec<f64>,
    memory: usize,
    grad_tol: f64,
    max_iter: usize,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (f0, g0) = eval(&x0)?;
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let g0_norm = norm(&g0);
    let rel = |g: &[f64]| if g0_norm > 0.0 { norm(g) / g0_norm } else { 0.0 };
    let mut cur = Point { x: x0, f: f0, g: g0 };
    let mut trace = vec![f0];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);

    let finish = |p: Point, trace: Vec<f64>, iterations: usize, converged: bool, grad_rel: f64| LbfgsOutcome {
        w: WeightMatrix::from_flat(1, n, p.x),
        trace,
        iterations,
        grad_norm_rel: grad_rel,
        converged,
    };

    let mut grad_rel = rel(&cur.g);
    if grad_rel <= grad_tol {
        return Ok(finish(cur, trace, 0, true, grad_rel));
    }
    for iter in 1..=max_iter {
        let mut dir = two_loop(&cur.g, &history);
        let mut slope = dot(&cur.g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = cur.g.iter().map(|v| -v).collect();
            slope = -dot(&cur.g, &cur.g);
        }
        let alpha0 = if history.is_empty() { (1.0 / norm(&cur.g)).min(1.0) } else { 1.0 };
        let mut step = line_search(&mut eval, &cur, &dir, slope, alpha0, iter)?;
        if step.is_none() && !history.is_empty() {
            history.clear();
            let sd: Vec<f64> = cur.g.iter().map(|v| -v).collect();
            let sd_slope = -dot(&cur.g, &cur.g);
            step = line_search(&mut eval, &cur, &sd, sd_slope, (1.0 / norm(&cur.g)).min(1.0), iter)?;
        }
        let Some(next) = step else {
            return Err(Error::LineSearch {
                iteration: iter,
                best_value: cur.f,
                best: Box::new(WeightMatrix::from_flat(1, n, cur.x)),
            });
        };

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        cur = next;
        trace.push(cur.f);
        grad_rel = rel(&cur.g);
        if grad_rel <= grad_tol {
            return Ok(finish(cur, trace, iter, true, grad_rel));
        }
    }
    Ok(finish(cur, trace, max_iter, false, grad_rel))
}

/// `-H g` by the two-loop recursion with `H₀ = (sᵀy / yᵀy) I`.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Strong-Wolfe search along `dir`. `Ok(None)` when no step decreases the
/// objective; a step that only satisfies the sufficient-decrease condition
/// is accepted when the zoom phase runs out of room.
fn line_search<F>(
    eval: &mut F,
    start: &Point,
    dir: &[f64],
    slope0: f64,
    alpha_init: f64,
    iteration: usize,
) -> Result<Option<Point>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut probe = |alpha: f64| -> Result<(Point, f64)> {
        let x: Vec<f64> = start.x.iter().zip(dir).map(|(a, b)| a + alpha * b).collect();
        let (f, g) = eval(&x)?;
        if f.is_nan() {
            return Err(Error::NonFiniteObjective { iteration });
        }
        let slope = dot(&g, dir);
        Ok((Point { x, f, g }, slope))
    };
    let armijo = |alpha: f64, f: f64| f <= start.f + C1 * alpha * slope0 && f < start.f;

    let mut prev = (0.0, start.f, slope0);
    let mut alpha = alpha_init;
    let mut best: Option<Point> = None;
    for i in 0..MAX_BRACKET {
        let (p, slope) = probe(alpha)?;
        if !p.f.is_finite() || !armijo(alpha, p.f) || (i > 0 && p.f >= prev.1) {
            return zoom(&mut probe, &armijo, prev, (alpha, p.f, slope), slope0, best);
        }
        if slope.abs() <= -C2 * slope0 {
            return Ok(Some(p));
        }
        if slope >= 0.0 {
            let f = p.f;
            return zoom(&mut probe, &armijo, (alpha, f, slope), prev, slope0, Some(p));
        }
        prev = (alpha, p.f, slope);
        best = Some(p);
        alpha *= 2.0;
    }
    Ok(best)
}

type Probe<'a> = dyn FnMut(f64) -> Result<(Point, f64)> + 'a;

fn zoom(
    probe: &mut Probe<'_>,
    armijo: &dyn Fn(f64, f64) -> bool,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    slope0: f64,
    mut best: Option<Point>,
) -> Result<Option<Point>> {
    for _ in 0..MAX_ZOOM {
        let alpha = interpolate(lo, hi);
        if (hi.0 - lo.0).abs() <= 1e-16 * lo.0.abs().max(hi.0.abs()).max(1e-300) {
            break;
        }
        let (p, slope) = probe(alpha)?;
        if !p.f.is_finite() || !armijo(alpha, p.f) || p.f >= lo.1 {
            hi = (alpha, p.f, slope);
        } else {
            if slope.abs() <= -C2 * slope0 {
                return Ok(Some(p));
            }
            if slope * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, p.f, slope);
            best = Some(p);
        }
    }
    Ok(best)
}

/// Cubic interpolation between two bracket ends, kept away from the ends.
fn interpolate(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let (lo, hi) = if a.0 <= b.0 { (a.0, b.0) } else { (b.0, a.0) };
    let width = hi - lo;
    let d1 = a.2 + b.2 - 3.0 * (a.1 - b.1) / (a.0 - b.0);
    let disc = d1 * d1 - a.2 * b.2;
    let candidate = if disc >= 0.0 && b.0 != a.0 {
        let d2 = (b.0 - a.0).signum() * disc.sqrt();
        b.0 - (b.0 - a.0) * (b.2 + d2 - d1) / (b.2 - a.2 + 2.0 * d2)
    } else {
        f64::NAN
    };
    if candidate.is_finite() && candidate > lo + 0.1 * width && candidate < hi - 0.1 * width {
        candidate
    } else {
        lo + 0.5 * width
    }
}
