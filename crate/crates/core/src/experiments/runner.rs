//! The three experiment drivers: moment rates, moderate-deviation tails,
//! and running-max trajectory diagnostics.
//!
//! Everything is deterministic given the config: replicate `(n, j)` lanes
//! derive their seeds from the master seed alone, values are stored by
//! replicate index, and aggregation uses pairwise summation over that
//! order, so the scheduling of the worker pool never changes a byte of the
//! report.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::config::{
    ConfigStatistic, EstimatorKind, ExperimentConfig, NormalizationKind,
};
use super::estimator::{estimate_replicate, lane_seed, Estimate};
use super::report::{verdict, PerN, RateReport, RuntimeMeta, Verdict};
use super::ExperimentError;
use crate::measures::AnalyticMeasure;
use crate::stats::{self, LineFit};
use crate::theory::{
    self, classify, moderate_deviation_rate, moment_rate, near_boundary, ratio_to_f64,
    MomentKind, RatePrediction, Regime, Statistic,
};
use crate::transport::{self, SemidiscreteOptions};

/// Raw replicate values ordered by `(n index, replicate index)`.
pub type RawValues = Vec<(u64, Vec<f64>)>;

fn check_moment_hypotheses(
    config: &ExperimentConfig,
    measure: &AnalyticMeasure,
    p: f64,
    r: f64,
) -> Result<(), ExperimentError> {
    let spec = measure.spec().to_string();
    let refuse = |what: String| ExperimentError::DivergentMoment { spec: spec.clone(), what };
    if !measure.strong_moment_finite(p) {
        return Err(refuse(format!(
            "E|X|^p with p = {p} diverges, so W_p^p(mu_n, mu) is infinite"
        )));
    }
    match config.statistic {
        ConfigStatistic::Mean | ConfigStatistic::RMoment => {
            let order = r * p;
            let ok = match config.moment_kind {
                MomentKind::Weak => measure.weak_moment_finite(order),
                MomentKind::Strong => measure.strong_moment_finite(order),
            };
            if !ok {
                return Err(refuse(format!(
                    "{:?} moment of order rp = {order} diverges",
                    config.moment_kind
                )));
            }
        }
        ConfigStatistic::SecondMoment => {
            if !measure.sqrt_tail_integral(p).is_finite() {
                return Err(refuse(
                    "the square-root tail integral diverges".to_string(),
                ));
            }
        }
    }
    Ok(())
}

/// Replicate values for every `n` in the grid, in parallel, plus work
/// accounting. Values depend only on `(config.seed, n index, replicate)`.
fn collect_values(
    config: &ExperimentConfig,
    measure: &AnalyticMeasure,
    p: f64,
) -> Result<(RawValues, Vec<u64>, Vec<u64>), ExperimentError> {
    let mut raw = Vec::with_capacity(config.n_grid.len());
    let mut work = Vec::with_capacity(config.n_grid.len());
    let mut wall = Vec::with_capacity(config.n_grid.len());
    for (i, &n) in config.n_grid.iter().enumerate() {
        let t0 = Instant::now();
        let estimates: Result<Vec<Estimate>, ExperimentError> = (0..config.replicates)
            .into_par_iter()
            .map(|j| estimate_replicate(config, measure, p, n, lane_seed(config.seed, i, j)))
            .collect();
        let estimates = estimates?;
        let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        let units = estimates.iter().map(|e| e.work).sum::<u64>();
        raw.push((n, values));
        work.push(units);
        wall.push(t0.elapsed().as_millis() as u64);
    }
    Ok((raw, work, wall))
}

fn statistic_of(values: &[f64], statistic: ConfigStatistic, r: f64) -> f64 {
    match statistic {
        ConfigStatistic::Mean => stats::mean(values),
        ConfigStatistic::SecondMoment => {
            let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
            stats::mean(&sq)
        }
        ConfigStatistic::RMoment => {
            let pw: Vec<f64> = values.iter().map(|v| v.powf(r)).collect();
            stats::mean(&pw)
        }
    }
}

/// Bootstrap standard error of a plug-in moment statistic (200 seeded
/// resamples; deterministic given the lane seed).
fn bootstrap_stderr(
    values: &[f64],
    statistic: ConfigStatistic,
    r: f64,
    seed: u64,
) -> f64 {
    const RESAMPLES: usize = 200;
    let k = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats_out = Vec::with_capacity(RESAMPLES);
    let mut buf = vec![0.0f64; k];
    for _ in 0..RESAMPLES {
        for slot in buf.iter_mut() {
            *slot = values[rng.gen_range(0..k)];
        }
        stats_out.push(statistic_of(&buf, statistic, r));
    }
    stats::variance(&stats_out).sqrt()
}

fn aggregate_per_n(
    raw: &RawValues,
    work: &[u64],
    config: &ExperimentConfig,
    r: f64,
) -> Vec<PerN> {
    raw.iter()
        .enumerate()
        .map(|(i, (n, values))| {
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = stats::mean(values);
            let variance = stats::variance(values);
            let r_moment = {
                let pw: Vec<f64> = values.iter().map(|v| v.powf(r)).collect();
                stats::mean(&pw)
            };
            let stat_value = statistic_of(values, config.statistic, r);
            let stat_stderr = match config.statistic {
                ConfigStatistic::Mean => (variance / values.len() as f64).sqrt(),
                _ => bootstrap_stderr(
                    values,
                    config.statistic,
                    r,
                    lane_seed(config.seed, i, u32::MAX),
                ),
            };
            PerN {
                n: *n,
                mean,
                variance,
                r_moment,
                quantiles: [
                    sorted[0],
                    stats::quantile_sorted(&sorted, 0.25),
                    stats::quantile_sorted(&sorted, 0.5),
                    stats::quantile_sorted(&sorted, 0.75),
                    sorted[sorted.len() - 1],
                ],
                stat_value,
                stat_stderr,
                work_units: work[i],
            }
        })
        .collect()
}

/// Weighted log-log fit of the tracked statistic, with the predicted log
/// correction subtracted from the response when the prediction carries one.
fn fit_rate(per_n: &[PerN], prediction: Option<&RatePrediction>) -> Option<LineFit> {
    if per_n.iter().any(|p| !(p.stat_value > 0.0)) || per_n.len() < 4 {
        return None;
    }
    let log_power = prediction.map_or(0.0, |p| ratio_to_f64(p.log_power));
    let x: Vec<f64> = per_n.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = per_n
        .iter()
        .map(|p| p.stat_value.ln() - log_power * (p.n as f64).ln().ln())
        .collect();
    let w: Vec<f64> = per_n
        .iter()
        .map(|p| {
            let rel = (p.stat_stderr / p.stat_value).max(1e-6);
            1.0 / (rel * rel)
        })
        .collect();
    Some(stats::weighted_least_squares(&x, &y, &w))
}

/// Moment-rate experiment: estimates the tracked statistic of
/// `W_p^p(mu_n, mu)` over the grid, fits the log-log slope, and renders a
/// verdict against the theory prediction.
pub fn run_moment_rate(
    config: &ExperimentConfig,
) -> Result<(RateReport, RawValues), ExperimentError> {
    let t0 = Instant::now();
    config.validate(true)?;
    let measure = config.measure_parsed()?;
    let p = ratio_to_f64(config.p_ratio()?);
    let r = ratio_to_f64(config.r_ratio()?);
    check_moment_hypotheses(config, &measure, p, r)?;
    let params = config.problem_params()?;
    let statistic = match config.statistic {
        ConfigStatistic::Mean => Statistic::Mean,
        ConfigStatistic::SecondMoment => Statistic::SecondMoment,
        ConfigStatistic::RMoment => Statistic::RMoment,
    };
    let prediction = moment_rate(&params, statistic)?;
    let mut warnings = Vec::new();
    if near_boundary(&params) {
        warnings.push(
            "parameters sit within 2% of the regime boundary; finite-n slopes mix regimes"
                .to_string(),
        );
    }

    let (raw, work, wall) = collect_values(config, &measure, p)?;
    let per_n = aggregate_per_n(&raw, &work, config, r);
    let fit = fit_rate(&per_n, Some(&prediction));
    let (verdict_value, band) = match &fit {
        None => (Verdict::Inconclusive, config.band.unwrap_or(0.05)),
        Some(f) => {
            let (mut v, band) = verdict(f, ratio_to_f64(prediction.exponent), config.band);
            // Boundary parameters mix polynomial and logarithmic factors at
            // finite n; stay inconclusive unless the fit is extremely clean.
            if prediction.regime == Regime::Boundary && f.r_squared <= 0.99 {
                warnings.push(
                    "boundary regime: verdict demoted to inconclusive (R^2 <= 0.99)".to_string(),
                );
                v = Verdict::Inconclusive;
            }
            (v, band)
        }
    };

    let report = RateReport {
        config: config.clone(),
        config_hash: config.hash(),
        estimator: config.estimator.label().to_string(),
        per_n,
        fit,
        prediction: Some(prediction),
        band,
        verdict: verdict_value,
        warnings,
        runtime: RuntimeMeta {
            total_ms: t0.elapsed().as_millis() as u64,
            per_n_ms: wall,
        },
    };
    Ok((report, raw))
}

// ----------------------------------------------------------------------
// Deviation tails
// ----------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationCell {
    pub n: u64,
    pub x: f64,
    /// `x / n^{1 - alpha}`.
    pub threshold: f64,
    pub exceedances: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// Cells need >= 10 exceedances to enter the fit.
    pub used_in_fit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerXFit {
    pub x: f64,
    pub cells_used: usize,
    pub fit: Option<LineFit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub estimator: String,
    pub alpha: String,
    pub x_grid: Vec<f64>,
    pub cells: Vec<DeviationCell>,
    pub per_x: Vec<PerXFit>,
    /// Pooled within-`x` centered slope over qualifying cells.
    pub pooled_fit: Option<LineFit>,
    pub prediction: RatePrediction,
    pub band: f64,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
    pub runtime: RuntimeMeta,
}

impl DeviationReport {
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.runtime = RuntimeMeta::default();
        serde_json::to_string_pretty(&clone).expect("report serializes")
    }
}

/// Moderate-deviation experiment: empirical exceedance probabilities of
/// `W_p^p > x / n^{1-alpha}` with Wilson intervals and a decay-slope fit
/// over sufficiently populated cells.
pub fn run_deviation_tail(
    config: &ExperimentConfig,
) -> Result<(DeviationReport, RawValues), ExperimentError> {
    let t0 = Instant::now();
    config.validate(true)?;
    let measure = config.measure_parsed()?;
    let p = ratio_to_f64(config.p_ratio()?);
    let r = ratio_to_f64(config.r_ratio()?);
    check_moment_hypotheses(config, &measure, p, r)?;
    let params = config.problem_params()?;
    let alpha = config.alpha_ratio()?;
    let prediction = moderate_deviation_rate(&params, alpha)?;
    let alpha_f = ratio_to_f64(alpha);
    let mut warnings = Vec::new();
    if near_boundary(&params) {
        warnings.push("parameters sit within 2% of the regime boundary".to_string());
    }

    // Sample the smallest n first: the default x-grid comes from its
    // quantiles and the power pre-check can refuse before the big sizes.
    let k = config.replicates;
    let small_n = config.n_grid[0];
    let t_small = Instant::now();
    let small: Result<Vec<Estimate>, _> = (0..k)
        .into_par_iter()
        .map(|j| estimate_replicate(config, &measure, p, small_n, lane_seed(config.seed, 0, j)))
        .collect();
    let small = small?;
    let small_vals: Vec<f64> = small.iter().map(|e| e.value).collect();
    let small_ms = t_small.elapsed().as_millis() as u64;
    let small_work: u64 = small.iter().map(|e| e.work).sum();

    let x_grid: Vec<f64> = match &config.x_grid {
        Some(xs) => xs.clone(),
        None => {
            let mut sorted = small_vals.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // Quantiles of W at the smallest n, mapped back to the x scale
            // of the threshold x / n^{1-alpha}.
            let back = (small_n as f64).powf(1.0 - alpha_f);
            [0.5, 0.8, 0.9, 0.95]
                .iter()
                .map(|&q| stats::quantile_sorted(&sorted, q) * back)
                .filter(|x| *x > 0.0)
                .collect()
        }
    };
    if x_grid.is_empty() {
        return Err(ExperimentError::Config(
            "deviation x-grid is empty (all replicate values zero?)".into(),
        ));
    }

    // Power pre-check at the largest n via the shape-only envelope: the
    // most permissive x must still promise >= 10 expected exceedances.
    let n_max = *config.n_grid.last().unwrap();
    let x_min = x_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let tau = x_min * (n_max as f64).powf(alpha_f - 1.0);
    let envelope = theory::deviation_bound(&params, n_max, tau)?.min(1.0);
    let expected = k as f64 * envelope;
    if expected < 10.0 {
        let minimal_k = (10.0 / envelope.max(1e-12)).ceil() as u64;
        return Err(ExperimentError::Underpowered {
            minimal_k,
            have: k as u64,
        });
    }

    // Remaining sizes.
    let mut raw: RawValues = vec![(small_n, small_vals)];
    let mut wall = vec![small_ms];
    let mut work = vec![small_work];
    for (i, &n) in config.n_grid.iter().enumerate().skip(1) {
        let tn = Instant::now();
        let ests: Result<Vec<Estimate>, _> = (0..k)
            .into_par_iter()
            .map(|j| estimate_replicate(config, &measure, p, n, lane_seed(config.seed, i, j)))
            .collect();
        let ests = ests?;
        raw.push((n, ests.iter().map(|e| e.value).collect()));
        work.push(ests.iter().map(|e| e.work).sum());
        wall.push(tn.elapsed().as_millis() as u64);
    }

    // Exceedance cells.
    let mut cells = Vec::new();
    for (n, values) in &raw {
        for &x in &x_grid {
            let threshold = x * (*n as f64).powf(alpha_f - 1.0);
            let exceedances = values.iter().filter(|v| **v > threshold).count() as u64;
            let trials = values.len() as u64;
            let p_hat = exceedances as f64 / trials as f64;
            let (lo, hi) = stats::wilson_interval(exceedances, trials, 1.96);
            cells.push(DeviationCell {
                n: *n,
                x,
                threshold,
                exceedances,
                trials,
                p_hat,
                wilson_lo: lo,
                wilson_hi: hi,
                used_in_fit: exceedances >= 10,
            });
        }
    }

    // Per-x fits and the pooled within-x centered fit.
    let mut per_x = Vec::new();
    let mut pooled: Vec<(f64, f64, f64)> = Vec::new(); // centered (lnn, lnp, w)
    for &x in &x_grid {
        let group: Vec<&DeviationCell> = cells
            .iter()
            .filter(|c| c.x == x && c.used_in_fit)
            .collect();
        let fit = if group.len() >= 3 {
            let xs: Vec<f64> = group.iter().map(|c| (c.n as f64).ln()).collect();
            let ys: Vec<f64> = group.iter().map(|c| c.p_hat.ln()).collect();
            let ws: Vec<f64> = group
                .iter()
                .map(|c| {
                    let rel = ((1.0 - c.p_hat) / (c.trials as f64 * c.p_hat)).max(1e-6);
                    1.0 / rel
                })
                .collect();
            Some(stats::weighted_least_squares(&xs, &ys, &ws))
        } else {
            None
        };
        if group.len() >= 2 {
            let xs: Vec<f64> = group.iter().map(|c| (c.n as f64).ln()).collect();
            let ys: Vec<f64> = group.iter().map(|c| c.p_hat.ln()).collect();
            let xm = stats::mean(&xs);
            let ym = stats::mean(&ys);
            for (i, c) in group.iter().enumerate() {
                let rel = ((1.0 - c.p_hat) / (c.trials as f64 * c.p_hat)).max(1e-6);
                pooled.push((xs[i] - xm, ys[i] - ym, 1.0 / rel));
            }
        }
        per_x.push(PerXFit {
            x,
            cells_used: group.len(),
            fit,
        });
    }
    let pooled_fit = if pooled.len() >= 4 {
        let xs: Vec<f64> = pooled.iter().map(|t| t.0).collect();
        let ys: Vec<f64> = pooled.iter().map(|t| t.1).collect();
        let ws: Vec<f64> = pooled.iter().map(|t| t.2).collect();
        Some(stats::weighted_least_squares(&xs, &ys, &ws))
    } else {
        None
    };

    let (verdict_value, band) = match &pooled_fit {
        None => {
            warnings.push("too few populated cells for a decay fit".to_string());
            (Verdict::Inconclusive, config.band.unwrap_or(0.05))
        }
        Some(f) => {
            // At alpha = 1/r the predicted exponent is 0 (stabilizing
            // exceedance); a two-sided band still applies.
            verdict(f, ratio_to_f64(prediction.exponent), config.band)
        }
    };

    let report = DeviationReport {
        config: config.clone(),
        config_hash: config.hash(),
        estimator: config.estimator.label().to_string(),
        alpha: theory::format_ratio(alpha),
        x_grid,
        cells,
        per_x,
        pooled_fit,
        prediction,
        band,
        verdict: verdict_value,
        warnings,
        runtime: RuntimeMeta {
            total_ms: t0.elapsed().as_millis() as u64,
            per_n_ms: wall,
        },
    };
    let _ = work;
    Ok((report, raw))
}

// ----------------------------------------------------------------------
// Running-max trajectories
// ----------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryDiag {
    pub trajectory: u32,
    /// Normalized statistic at each checkpoint.
    pub normalized: Vec<f64>,
    /// Running max of `k * W_p^p(mu_k, mu)` over checkpoints.
    pub running_max: Vec<f64>,
    /// Boundedness-violation flag (final quarter exceeding 3x the median of
    /// the middle half); a heuristic, not a proof.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub normalization: NormalizationKind,
    pub regime: Regime,
    pub checkpoints: Vec<u64>,
    pub trajectories: Vec<TrajectoryDiag>,
    pub flagged: u32,
    /// Diagnostics only: almost-sure statements are not falsifiable by
    /// finite runs.
    pub note: String,
    pub runtime: RuntimeMeta,
}

impl TrajectoryReport {
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.runtime = RuntimeMeta::default();
        serde_json::to_string_pretty(&clone).expect("report serializes")
    }
}

fn normalization_factor(
    kind: NormalizationKind,
    regime: Regime,
    p: f64,
    d: f64,
    r: f64,
    n: u64,
) -> Result<f64, ExperimentError> {
    let nf = n as f64;
    match kind {
        NormalizationKind::AsRate => match regime {
            Regime::SmallDim => Ok(nf.powf((r - 1.0) / r)),
            Regime::LargeDim => Ok(nf.powf(p / d) * nf.ln().max(1.0).powf(-1.0 / r)),
            Regime::Boundary => Err(ExperimentError::Theory(
                theory::TheoryError::NoPrediction(
                    "no almost-sure normalization at the regime boundary".into(),
                ),
            )),
        },
        NormalizationKind::Lil => {
            let loglog = nf.ln().max(1.001).ln().max(1e-9);
            if 2.0 * p > d {
                Ok((nf / loglog).sqrt())
            } else if 2.0 * p < d {
                Ok((nf / loglog).powf(p / d))
            } else {
                Err(ExperimentError::Theory(theory::TheoryError::NoPrediction(
                    "the iterated-logarithm normalization is not stated at p = d/2".into(),
                )))
            }
        }
    }
}

/// Running-max trajectory diagnostic along single growing samples.
pub fn run_running_max(
    config: &ExperimentConfig,
) -> Result<(TrajectoryReport, RawValues), ExperimentError> {
    let t0 = Instant::now();
    config.validate(false)?;
    let measure = config.measure_parsed()?;
    let p = ratio_to_f64(config.p_ratio()?);
    let r = ratio_to_f64(config.r_ratio()?);
    check_moment_hypotheses(config, &measure, p, r)?;
    let params = config.problem_params()?;
    let regime = classify(&params);
    let kind = config.normalization.unwrap_or(NormalizationKind::AsRate);
    if kind == NormalizationKind::Lil && !measure.sqrt_tail_integral(p).is_finite() {
        return Err(ExperimentError::DivergentMoment {
            spec: measure.spec().to_string(),
            what: "the square-root tail integral diverges; no LIL normalization".to_string(),
        });
    }
    let d = measure.dim() as f64;
    // Validate the normalization once up front (checkpoint value unused).
    normalization_factor(kind, regime, p, d, r, config.n_grid[0].max(3))?;

    let checkpoints: Vec<u64> = config
        .checkpoints
        .clone()
        .unwrap_or_else(|| config.n_grid.clone());
    if checkpoints.len() < 8 {
        return Err(ExperimentError::Config(format!(
            "trajectory diagnostics need at least 8 checkpoints, got {}",
            checkpoints.len()
        )));
    }
    let n_max = *checkpoints.last().unwrap() as usize;
    let trajectories = config.trajectories.max(1);

    let semis = SemidiscreteOptions {
        assignment_cap: config.solver.exact_cap.max(1),
        entropic_epsilon_factor: config.solver.entropic_epsilon_factor,
        entropic_max_iter: config.solver.entropic_max_iter,
        entropic_tol: config.solver.entropic_tol,
    };

    let results: Result<Vec<(TrajectoryDiag, Vec<f64>)>, ExperimentError> = (0..trajectories)
        .into_par_iter()
        .map(|t| {
            let seed = lane_seed(config.seed, 1 << 20, t);
            let full = measure.sample_stream(n_max, seed, 0)?;
            let second = if config.estimator == EstimatorKind::TwoSample {
                Some(measure.sample_stream(n_max, seed, 4)?)
            } else {
                None
            };
            let mut raw_w = Vec::with_capacity(checkpoints.len());
            let mut normalized = Vec::with_capacity(checkpoints.len());
            let mut running = Vec::with_capacity(checkpoints.len());
            let mut peak = 0.0f64;
            for &kcp in &checkpoints {
                let prefix = full.prefix(kcp as usize)?;
                let w = match config.estimator {
                    EstimatorKind::Exact1d => transport::exact_one_dim(&prefix, &measure, p)?,
                    EstimatorKind::TwoSample => {
                        let other = second.as_ref().unwrap().prefix(kcp as usize)?;
                        if kcp as usize <= config.solver.exact_cap {
                            transport::wasserstein_assignment(
                                &prefix,
                                &other,
                                p,
                                Some(config.solver.assignment_cap.max(kcp as usize)),
                            )?
                            .0
                        } else {
                            let eps = config.solver.entropic_epsilon_factor
                                * transport::median_pair_cost(&prefix, &other, p);
                            transport::sinkhorn_value_only(
                                &prefix,
                                &other,
                                p,
                                crate::transport::EntropicOptions {
                                    epsilon: eps.max(1e-12),
                                    max_iter: config.solver.entropic_max_iter,
                                    tol: config.solver.entropic_tol,
                                    eps_scaling: true,
                                    keep_plan: false,
                                },
                            )?
                            .value
                        }
                    }
                    EstimatorKind::Semidiscrete => {
                        semidiscrete_checkpoint(&prefix, &measure, p, config.oversample, seed, &semis)?
                    }
                };
                peak = peak.max(kcp as f64 * w);
                running.push(peak);
                normalized.push(w * normalization_factor(kind, regime, p, d, r, kcp)?);
                raw_w.push(w);
            }
            let flagged = boundedness_flag(&normalized);
            Ok((
                TrajectoryDiag {
                    trajectory: t,
                    normalized,
                    running_max: running,
                    flagged,
                },
                raw_w,
            ))
        })
        .collect();
    let results = results?;

    let flagged = results.iter().filter(|(d, _)| d.flagged).count() as u32;
    let raw: RawValues = checkpoints
        .iter()
        .enumerate()
        .map(|(ci, &k)| (k, results.iter().map(|(_, w)| w[ci]).collect()))
        .collect();
    let report = TrajectoryReport {
        config: config.clone(),
        config_hash: config.hash(),
        normalization: kind,
        regime,
        checkpoints,
        trajectories: results.into_iter().map(|(d, _)| d).collect(),
        flagged,
        note: "boundedness heuristic on normalized trajectories; almost-sure statements \
               are not falsifiable at finite n"
            .to_string(),
        runtime: RuntimeMeta {
            total_ms: t0.elapsed().as_millis() as u64,
            per_n_ms: Vec::new(),
        },
    };
    Ok((report, raw))
}

fn semidiscrete_checkpoint(
    prefix: &crate::measures::EmpiricalMeasure,
    measure: &AnalyticMeasure,
    p: f64,
    oversample: usize,
    seed: u64,
    opts: &SemidiscreteOptions,
) -> Result<f64, ExperimentError> {
    Ok(transport::semidiscrete_wp(prefix, measure, p, oversample, seed, opts)?.0)
}

/// Final quarter of checkpoints exceeding 3x the median of the middle half.
fn boundedness_flag(normalized: &[f64]) -> bool {
    let t = normalized.len();
    if t < 8 {
        return false;
    }
    let mut mid: Vec<f64> = normalized[t / 4..3 * t / 4].to_vec();
    mid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = stats::median_sorted(&mid);
    let final_max = normalized[3 * t / 4..]
        .iter()
        .cloned()
        .fold(f64::MIN, f64::max);
    final_max > 3.0 * median
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundedness_flag_cases() {
        let flat = vec![1.0; 16];
        assert!(!boundedness_flag(&flat));
        let mut blowup = vec![1.0; 16];
        for (i, v) in blowup.iter_mut().enumerate().skip(12) {
            *v = 4.0 + i as f64;
        }
        assert!(boundedness_flag(&blowup));
        let zeros = vec![0.0; 16];
        assert!(!boundedness_flag(&zeros));
    }
}
