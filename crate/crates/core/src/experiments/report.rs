//! Report types, slope fitting and verdicts.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ExperimentError;
use crate::stats::{self, LineFit};
use crate::theory::RatePrediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

/// Wall-clock metadata; excluded when comparing reports for determinism.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RuntimeMeta {
    pub total_ms: u64,
    pub per_n_ms: Vec<u64>,
}

/// Per-sample-size Monte Carlo aggregates of `W_p^p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerN {
    pub n: u64,
    /// Mean of the replicate values.
    pub mean: f64,
    /// Unbiased variance of the replicate values.
    pub variance: f64,
    /// Plug-in `r`-th moment of the replicate values (config `r`).
    pub r_moment: f64,
    /// {min, q25, median, q75, max} of the replicate values.
    pub quantiles: [f64; 5],
    /// The tracked statistic for the slope fit.
    pub stat_value: f64,
    /// Its standard error (exact for the mean, bootstrap otherwise).
    pub stat_stderr: f64,
    /// Deterministic solver work units (monotone in `n` on exact paths).
    pub work_units: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub estimator: String,
    pub per_n: Vec<PerN>,
    pub fit: Option<LineFit>,
    pub prediction: Option<RatePrediction>,
    pub band: f64,
    pub verdict: Verdict,
    /// Prediction regime warnings (near-boundary parameters etc).
    pub warnings: Vec<String>,
    pub runtime: RuntimeMeta,
}

impl RateReport {
    /// Canonical JSON with runtime metadata zeroed, for byte comparisons.
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.runtime = RuntimeMeta::default();
        serde_json::to_string_pretty(&clone).expect("report serializes")
    }

    /// Flat `n,replicate,value` CSV of the raw replicate values.
    pub fn to_csv(values: &[(u64, Vec<f64>)]) -> String {
        let mut out = String::from("n,replicate,value\n");
        for (n, reps) in values {
            for (j, v) in reps.iter().enumerate() {
                out.push_str(&format!("{n},{j},{v}\n"));
            }
        }
        out
    }
}

/// Weighted least squares of `log(value)` on `log(n)`.
///
/// Requires at least 4 distinct `n` and strictly positive values; weights
/// are inverse variances of `log(value)`.
pub fn fit_loglog_slope(pairs: &[(f64, f64, f64)]) -> Result<LineFit, ExperimentError> {
    if pairs.iter().any(|&(_, v, _)| !(v > 0.0)) {
        return Err(ExperimentError::FitDomain(
            "all values must be strictly positive".into(),
        ));
    }
    let mut distinct: Vec<f64> = pairs.iter().map(|&(n, _, _)| n).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(ExperimentError::FitDomain(format!(
            "need at least 4 distinct sample sizes, got {}",
            distinct.len()
        )));
    }
    let x: Vec<f64> = pairs.iter().map(|&(n, _, _)| n.ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|&(_, v, _)| v.ln()).collect();
    let w: Vec<f64> = pairs.iter().map(|&(_, _, w)| w.max(1e-300)).collect();
    Ok(stats::weighted_least_squares(&x, &y, &w))
}

/// Verdict rule: consistent iff `|slope - exponent| <= band`, with
/// `band = max(0.05, 3 stderr)` unless overridden.
pub fn verdict(fit: &LineFit, predicted_exponent: f64, band: Option<f64>) -> (Verdict, f64) {
    let band = band.unwrap_or_else(|| (3.0 * fit.slope_stderr).max(0.05));
    let v = if (fit.slope - predicted_exponent).abs() <= band {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    (v, band)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_recovered() {
        let pairs: Vec<(f64, f64, f64)> = (4..10)
            .map(|k| {
                let n = (1u64 << k) as f64;
                (n, 3.0 * n.powf(-0.5), 1.0)
            })
            .collect();
        let fit = fit_loglog_slope(&pairs).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
    }

    #[test]
    fn noisy_power_law_close() {
        // Deterministic 1% ripple around c n^{-1/3}.
        let pairs: Vec<(f64, f64, f64)> = (4..14)
            .map(|k| {
                let n = (1u64 << k) as f64;
                let noise = 1.0 + 0.01 * ((k as f64) * 2.399).sin();
                (n, 0.7 * n.powf(-1.0 / 3.0) * noise, 1.0)
            })
            .collect();
        let fit = fit_loglog_slope(&pairs).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 0.02, "slope {}", fit.slope);
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let pairs: Vec<(f64, f64, f64)> =
            (4..8).map(|k| ((1u64 << k) as f64, 2.5, 1.0)).collect();
        let fit = fit_loglog_slope(&pairs).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_and_short() {
        assert!(fit_loglog_slope(&[(8.0, 0.0, 1.0); 5]).is_err());
        assert!(fit_loglog_slope(&[(8.0, 1.0, 1.0), (16.0, 0.5, 1.0), (32.0, 0.3, 1.0)]).is_err());
    }

    #[test]
    fn verdict_band_rules() {
        let fit = LineFit {
            slope: -0.48,
            intercept: 0.0,
            slope_stderr: 0.0,
            r_squared: 1.0,
        };
        assert_eq!(verdict(&fit, -0.5, Some(0.05)).0, Verdict::Consistent);
        let fit = LineFit {
            slope: -0.30,
            ..fit
        };
        assert_eq!(verdict(&fit, -0.5, Some(0.05)).0, Verdict::Inconsistent);
        let fit = LineFit {
            slope: -0.40,
            slope_stderr: 0.04,
            ..fit
        };
        let (v, band) = verdict(&fit, -0.5, None);
        assert!((band - 0.12).abs() < 1e-12);
        assert_eq!(v, Verdict::Consistent);
    }
}
