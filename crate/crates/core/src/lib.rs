//! Fenchel-Young and Fitzpatrick losses for label-proportion estimation.
//!
//! * [`numeric`]: Lambert W, log-sum-exp, bisection, finite differences.
//! * [`simplex`]: probability vectors and the simplex link functions.
//! * [`losses`]: values, gradients and maximizers for both loss families.
//! * [`oracle`]: slow brute-force references used to verify the closed forms.
//! * [`train`]: regularized linear models fitted with L-BFGS.
//! * [`data`]: multi-label dataset loading, preprocessing and synthesis.
//! * [`check`]: randomized property suites over all of the above.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod data;
mod error;
pub mod losses;
pub mod numeric;
pub mod oracle;
pub mod par;
pub mod simplex;
pub mod train;

pub use error::{Error, Result};
pub use losses::{Family, FitzSolveResult, Generator, LossSpec};
pub use numeric::BisectionConfig;
pub use par::Execution;
pub use simplex::{ProbVector, ScoreVector};
