//! Reference (analytic) and empirical measures.
//!
//! The analytic side is a closed catalog: every entry has an exact tail
//! function `H`, exact dyadic cell masses (products of 1-D interval masses),
//! closed-form or quadrature-backed moments, and a deterministic seeded
//! sampler. The empirical side is a weighted point cloud with a fixed
//! dimension.

mod catalog;
mod empirical;

pub use catalog::{parse_spec, AnalyticMeasure, MeasureKind};
pub use empirical::EmpiricalMeasure;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("point {index} has {got} coordinates, expected {expected}")]
    DimMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("weights must be non-negative and sum to 1 (sum = {sum})")]
    BadWeights { sum: f64 },
    #[error("weights length {got} does not match point count {expected}")]
    WeightCount { expected: usize, got: usize },
    #[error("cannot parse measure spec `{spec}`: {reason}")]
    Spec { spec: String, reason: String },
    #[error("mean euclidean norm diverges for `{spec}`")]
    InfiniteMean { spec: String },
    #[error("operation requires dimension {expected}, measure has {got}")]
    WrongDim { expected: usize, got: usize },
}
