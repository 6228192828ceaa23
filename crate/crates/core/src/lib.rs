//! Empirical Wasserstein distances in `R^d`, dyadic multiscale upper-bound
//! functionals, and a seeded Monte Carlo harness that checks predicted
//! convergence-rate exponents against fitted log-log slopes.
//!
//! The crate is organized around five areas:
//!
//! - [`measures`]: a closed catalog of reference distributions with exact
//!   tail functions, dyadic cell-mass oracles and deterministic samplers,
//!   plus weighted empirical point clouds.
//! - [`transport`]: exact 1-D, exact assignment, and entropic solvers for
//!   `W_p^p` between point clouds, and a semi-discrete estimator against a
//!   catalog measure.
//! - [`multiscale`]: the dyadic block/partition discrepancy functionals that
//!   dominate `W_p^p`, with explicit truncation-error accounting.
//! - [`theory`]: a pure prediction engine mapping `(p, d, r)` to regime
//!   labels, rate exponents and deviation envelopes (exact rationals).
//! - [`experiments`]: the Monte Carlo rate harness with slope fits and
//!   verdicts against predictions.

pub mod experiments;
pub mod measures;
pub mod multiscale;
pub mod quad;
pub mod stats;
pub mod theory;
pub mod transport;
pub mod verify;

pub use measures::{AnalyticMeasure, EmpiricalMeasure};
pub use multiscale::MultiscaleProfile;
pub use theory::{ProblemParams, RatePrediction, Regime};
pub use transport::TransportPlan;
