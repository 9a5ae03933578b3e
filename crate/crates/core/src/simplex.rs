//! Points of the probability simplex and the link functions that map scores
//! onto it.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::numeric::lse_unchecked;

/// Entries below this magnitude are snapped to exact zero when a
/// [`ProbVector`] is built from user data or from a projection.
pub const SNAP_TOL: f64 = 1e-12;

/// Allowed deviation of the entry sum from one.
pub const SUM_TOL: f64 = 1e-9;

/// A point `y` of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `entries`, snapping entries with magnitude below
    /// [`SNAP_TOL`] to zero.
    pub fn new(mut entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("probability vector must have at least one entry"));
        }
        for v in entries.iter_mut() {
            if !v.is_finite() {
                return Err(Error::domain(format!("non-finite probability entry {v}")));
            }
            if v.abs() < SNAP_TOL {
                *v = 0.0;
            }
            if *v < 0.0 {
                return Err(Error::domain(format!("negative probability entry {v}")));
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::domain(format!("probability entries sum to {sum}, not 1")));
        }
        Ok(ProbVector(entries))
    }

    /// Scales nonnegative weights so they sum to one.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::domain(format!("cannot normalize weights with sum {sum}")));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    /// The vertex `e_index` of the `k`-simplex.
    pub fn vertex(k: usize, index: usize) -> Self {
        assert!(index < k, "vertex index {index} out of range for k = {k}");
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        ProbVector(v)
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0);
        ProbVector(vec![1.0 / k as f64; k])
    }

    /// Wraps entries already known to lie on the simplex (no snapping).
    pub(crate) fn from_trusted(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| *v >= 0.0));
        ProbVector(entries)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Number of nonzero entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

/// An unconstrained score vector `θ` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_scores(&entries)?;
        Ok(ScoreVector(entries))
    }

    pub fn zeros(k: usize) -> Self {
        ScoreVector(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ScoreVector::new(v)
    }
}

pub(crate) fn check_scores(theta: &[f64]) -> Result<()> {
    if theta.is_empty() {
        return Err(Error::domain("score vector must have at least one entry"));
    }
    if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
        return Err(Error::domain(format!("non-finite score entry {bad}")));
    }
    Ok(())
}

/// Euclidean projection onto the simplex by sort-then-threshold:
/// `y_i = max(z_i - τ, 0)` with `τ` fixed by the unit-sum constraint.
pub fn project_simplex(z: &[f64]) -> Result<ProbVector> {
    check_scores(z)?;
    let tau = simplex_threshold(z);
    let mut y: Vec<f64> = z
        .iter()
        .map(|zi| {
            let v = zi - tau;
            if v < SNAP_TOL {
                0.0
            } else {
                v
            }
        })
        .collect();
    if y.iter().all(|v| *v == 0.0) {
        // only reachable when every positive part was snapped; fall back to the max
        let i = argmax_index(z);
        y[i] = 1.0;
    }
    Ok(ProbVector::from_trusted(y))
}

fn simplex_threshold(z: &[f64]) -> f64 {
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = sorted[0] - 1.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    tau
}

/// `exp(θ) / Σ exp(θ_i)`, evaluated through the log-sum-exp shift.
pub fn softargmax(theta: &[f64]) -> Result<ProbVector> {
    check_scores(theta)?;
    let lse = lse_unchecked(theta);
    Ok(ProbVector::from_trusted(
        theta.iter().map(|t| (t - lse).exp()).collect(),
    ))
}

/// `e_i` for the lowest index `i` attaining `max θ`.
pub fn argmax_vertex(theta: &[f64]) -> Result<ProbVector> {
    check_scores(theta)?;
    Ok(ProbVector::vertex(theta.len(), argmax_index(theta)))
}

pub(crate) fn argmax_index(theta: &[f64]) -> usize {
    let mut best = 0;
    for (i, t) in theta.iter().enumerate().skip(1) {
        if *t > theta[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        let p = ProbVector::new(vec![1.0 - 5e-13, 5e-13]).unwrap();
        assert_eq!(p[1], 0.0);
        assert_eq!(p.support_size(), 1);
        let p = ProbVector::normalized(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.0, 0.5]);
        assert!(ProbVector::normalized(&[0.0, 0.0]).is_err());
        assert!(ScoreVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.6, 0.4]).unwrap().as_slice(), &[0.6, 0.4]);
        assert_eq!(project_simplex(&[2.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.0]).unwrap();
        assert_relative_eq!(p[0], 0.75, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.25, epsilon = 1e-15);
        assert!(project_simplex(&[]).is_err());
    }

    #[test]
    fn softargmax_examples() {
        assert_eq!(softargmax(&[0.0, 0.0]).unwrap().as_slice(), &[0.5, 0.5]);
        let p = softargmax(&[1f64.ln(), 3f64.ln()]).unwrap();
        assert_relative_eq!(p[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_vertex(&[3.0, 1.0, 2.0]).unwrap(), ProbVector::vertex(3, 0));
        assert_eq!(argmax_vertex(&[1.0, 1.0]).unwrap(), ProbVector::vertex(2, 0));
        assert_eq!(argmax_vertex(&[-5.0, -1.0]).unwrap(), ProbVector::vertex(2, 1));
    }

    // Independent projection: bisection on τ ↦ Σ max(z_i - τ, 0) - 1.
    fn project_by_bisection(z: &[f64]) -> Vec<f64> {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (max - 1.0, max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = z.iter().map(|v| (v - mid).max(0.0)).sum();
            if s > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        z.iter().map(|v| (v - tau).max(0.0)).collect()
    }

    fn scores(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0..5.0f64, 1..=max_k)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn projection_matches_bisection(z in scores(8)) {
            let p = project_simplex(&z).unwrap();
            let q = project_by_bisection(&z);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn projection_shift_equivariant(z in scores(8), c in -100.0..100.0f64) {
            let p = project_simplex(&z).unwrap();
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let q = project_simplex(&shifted).unwrap();
            for (a, b) in p.iter().zip(q.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn links_are_co_sorted(theta in scores(8)) {
            let links = [project_simplex(&theta).unwrap(), softargmax(&theta).unwrap()];
            for link in &links {
                for i in 0..theta.len() {
                    for j in 0..theta.len() {
                        if theta[i] > theta[j] {
                            prop_assert!(link[i] >= link[j]);
                        }
                    }
                }
            }
        }

        #[test]
        fn softargmax_strictly_positive(theta in scores(8)) {
            let p = softargmax(&theta).unwrap();
            prop_assert!(p.iter().all(|v| *v > 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn softargmax_shift_invariant(theta in scores(8), c in -500.0..500.0f64) {
            let p = softargmax(&theta).unwrap();
            let shifted: Vec<f64> = theta.iter().map(|v| v + c).collect();
            let q = softargmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(q.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
