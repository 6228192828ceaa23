//! Solvers for `W_p^p` between empirical measures (euclidean ground cost),
//! plus the exact 1-D and dual lower-bound oracles and a semi-discrete
//! estimator against catalog measures.

mod assignment;
mod dual;
mod entropic;
mod onedim;
mod plan;
mod semidiscrete;

pub use assignment::wasserstein_assignment;
pub use dual::dual_lipschitz_lower_bound;
pub use entropic::{wasserstein_entropic, EntropicOptions, EntropicSolution};
pub use onedim::wasserstein_1d;
pub use plan::{CouplingMatrix, Method, Pairing, TransportPlan};
pub use semidiscrete::{semidiscrete_wp, SemidiscreteOptions};

pub(crate) use entropic::sinkhorn as sinkhorn_value_only;
pub(crate) use semidiscrete::exact_one_dim;
pub(crate) use semidiscrete::median_cost as median_pair_cost;

use crate::measures::MeasureError;
use thiserror::Error;

/// Default size cap for the exact assignment solver (guards `O(n^3)`).
pub const DEFAULT_ASSIGNMENT_CAP: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("expected 1-dimensional measures, got d = {got}")]
    NotOneDimensional { got: usize },
    #[error(
        "assignment solver requires equal sizes and uniform weights \
         ({left} vs {right} points); use the entropic solver"
    )]
    AssignmentShape { left: usize, right: usize },
    #[error("assignment size {n} exceeds the configured cap {cap}")]
    AssignmentCap { n: usize, cap: usize },
    #[error("entropic regularization must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("oversampling factor must be at least 2, got {0}")]
    BadOversample(usize),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Squared euclidean distance between two points.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// `|a - b|_2^p` in double precision.
#[inline]
pub(crate) fn cost_pow(a: &[f64], b: &[f64], p: f64) -> f64 {
    let sq = sq_dist(a, b);
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.sqrt().powf(p)
    }
}
