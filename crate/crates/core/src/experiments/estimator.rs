//! One replicate of `W_p^p(mu_n, mu)` (or its two-sample surrogate), plus
//! deterministic seed derivation for replicate streams.

use super::config::{EstimatorKind, ExperimentConfig};
use super::ExperimentError;
use crate::measures::AnalyticMeasure;
use crate::transport::{
    self, semidiscrete_wp, wasserstein_assignment, EntropicOptions, SemidiscreteOptions,
};

/// SplitMix64 step; decorrelates replicate lanes from the master seed.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one `(n index, replicate)` lane. Values depend only on the
/// master seed and the lane, never on scheduling.
pub fn lane_seed(master: u64, n_index: usize, replicate: u32) -> u64 {
    let lane = ((n_index as u64) << 32) | replicate as u64;
    splitmix64(master ^ splitmix64(lane))
}

/// Estimated `W_p^p` and a deterministic work-unit count for the solve.
pub struct Estimate {
    pub value: f64,
    pub work: u64,
}

pub fn estimate_replicate(
    config: &ExperimentConfig,
    measure: &AnalyticMeasure,
    p: f64,
    n: u64,
    seed: u64,
) -> Result<Estimate, ExperimentError> {
    let n = n as usize;
    let solver = &config.solver;
    match config.estimator {
        EstimatorKind::Exact1d => {
            let sample = measure.sample_stream(n, seed, 0)?;
            let value = transport::semidiscrete_wp(
                &sample,
                measure,
                p,
                config.oversample.max(2),
                seed,
                &SemidiscreteOptions {
                    assignment_cap: solver.assignment_cap,
                    entropic_epsilon_factor: solver.entropic_epsilon_factor,
                    entropic_max_iter: solver.entropic_max_iter,
                    entropic_tol: solver.entropic_tol,
                },
            )?
            .0;
            Ok(Estimate {
                value,
                work: (n as u64).saturating_mul(n.ilog2().max(1) as u64),
            })
        }
        EstimatorKind::TwoSample => {
            let x = measure.sample_stream(n, seed, 0)?;
            let y = measure.sample_stream(n, seed, 4)?;
            if n <= solver.exact_cap {
                let (value, _) =
                    wasserstein_assignment(&x, &y, p, Some(solver.assignment_cap.max(n)))?;
                Ok(Estimate {
                    value,
                    work: (n as u64).pow(3),
                })
            } else {
                let eps = solver.entropic_epsilon_factor
                    * crate::transport::median_pair_cost(&x, &y, p);
                let sol = crate::transport::sinkhorn_value_only(
                    &x,
                    &y,
                    p,
                    EntropicOptions {
                        epsilon: eps.max(1e-12),
                        max_iter: solver.entropic_max_iter,
                        tol: solver.entropic_tol,
                        eps_scaling: true,
                        keep_plan: false,
                    },
                )?;
                Ok(Estimate {
                    value: sol.value,
                    work: (sol.iterations as u64)
                        .saturating_mul(n as u64)
                        .saturating_mul(n as u64),
                })
            }
        }
        EstimatorKind::Semidiscrete => {
            let sample = measure.sample_stream(n, seed, 0)?;
            let (value, _proxy) = semidiscrete_wp(
                &sample,
                measure,
                p,
                config.oversample,
                seed,
                &SemidiscreteOptions {
                    assignment_cap: solver.exact_cap.max(1),
                    entropic_epsilon_factor: solver.entropic_epsilon_factor,
                    entropic_max_iter: solver.entropic_max_iter,
                    entropic_tol: solver.entropic_tol,
                },
            )?;
            let m = (config.oversample * n) as u64;
            Ok(Estimate {
                value,
                work: m.pow(3).min(u64::MAX / 2),
            })
        }
    }
}
