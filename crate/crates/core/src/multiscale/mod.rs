//! Dyadic multiscale discrepancy functionals.
//!
//! Two empirically computable functionals dominate `W_p^p` up to universal
//! constants: the flat triple sum `Delta_p` over blocks, levels and cells,
//! and the block-normalized two-level form `D_p`. Both are evaluated on
//! truncated `(m, level)` ranges with an explicit upper bound on everything
//! omitted, plus the cube-truncated split `A_{p,M} + B_{p,M}` that the
//! deviation arguments use.

pub mod grid;
mod kappa;
mod profile;

pub use grid::{block_index, cell_key, DyadicCellKey};
pub use kappa::{empirical_kappa, KappaStats};
pub use profile::{
    d_p_functional, default_level_max, default_m_max, delta_profile, delta_profile_two_sample,
    BlockProfile, MultiscaleProfile, Reference, TruncatedSplit,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiscaleError {
    #[error("sample dimension {sample} does not match reference dimension {reference}")]
    DimMismatch { sample: usize, reference: usize },
    #[error("cell keys need d * level_max <= 120 bits, got d={dim} level_max={level_max}")]
    LevelCapacity { dim: usize, level_max: u32 },
    #[error("kappa estimation needs at least {needed} usable observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("observation {index} has D_p = 0 but W_p^p = {w} > 0, contradicting the domination")]
    KappaContradiction { index: usize, w: f64 },
}
