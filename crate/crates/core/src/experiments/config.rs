//! Declarative experiment configuration.
//!
//! Configs deserialize with `deny_unknown_fields` so a typoed key is a hard
//! error, never a silently ignored knob.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::measures::{parse_spec, AnalyticMeasure};
use crate::theory::{parse_ratio, MomentKind, ProblemParams, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Exact quantile-route semi-discrete value (1-D only).
    #[serde(rename = "exact_1d")]
    Exact1d,
    /// `W_p^p` between two independent samples of the same size.
    TwoSample,
    /// Oversampled reference draw against the analytic measure.
    Semidiscrete,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Exact1d => "exact_1d",
            EstimatorKind::TwoSample => "two_sample",
            EstimatorKind::Semidiscrete => "semidiscrete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigStatistic {
    Mean,
    SecondMoment,
    RMoment,
}

/// Trajectory normalizations for the running-max diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationKind {
    /// `n^{(r-1)/r}` or `n^{p/d} (log n)^{-1/r}` by regime.
    AsRate,
    /// `(n / loglog n)^{1/2}` or `(n / loglog n)^{p/d}` by regime.
    Lil,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Sizes up to this use the exact assignment path in estimators.
    pub exact_cap: usize,
    /// Hard cap on any assignment solve.
    pub assignment_cap: usize,
    /// Entropic fallback: `epsilon = factor * median pairwise cost`.
    pub entropic_epsilon_factor: f64,
    pub entropic_max_iter: usize,
    pub entropic_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            exact_cap: 512,
            assignment_cap: crate::transport::DEFAULT_ASSIGNMENT_CAP,
            entropic_epsilon_factor: 0.05,
            entropic_max_iter: 1000,
            entropic_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Catalog measure spec, e.g. `uniform:d=1`.
    pub measure: String,
    /// Wasserstein order as an exact rational string (`"1"`, `"3/2"`).
    pub p: String,
    /// Moment ratio `r` (moments of order `rp`), exact rational string.
    pub r: String,
    pub moment_kind: MomentKind,
    pub statistic: ConfigStatistic,
    pub n_grid: Vec<u64>,
    /// Replicates per sample size.
    pub replicates: u32,
    pub estimator: EstimatorKind,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Semi-discrete oversampling factor (>= 2).
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    /// Deviation runs: thresholds `x`; defaults to empirical quantiles
    /// {0.5, 0.8, 0.9, 0.95} of `W_p^p` at the smallest `n`.
    #[serde(default)]
    pub x_grid: Option<Vec<f64>>,
    /// Deviation runs: moderate-deviation scaling exponent (default `1/r`).
    #[serde(default)]
    pub alpha: Option<String>,
    /// Verdict tolerance band override.
    #[serde(default)]
    pub band: Option<f64>,
    /// Trajectory runs: checkpoints (must be a subset of `n_grid`).
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    /// Trajectory runs: number of independent trajectories.
    #[serde(default = "default_trajectories")]
    pub trajectories: u32,
    #[serde(default)]
    pub normalization: Option<NormalizationKind>,
}

fn default_oversample() -> usize {
    4
}

fn default_trajectories() -> u32 {
    20
}

impl ExperimentConfig {
    pub fn measure_parsed(&self) -> Result<AnalyticMeasure, ExperimentError> {
        Ok(parse_spec(&self.measure)?)
    }

    pub fn p_ratio(&self) -> Result<Q, ExperimentError> {
        Ok(parse_ratio(&self.p)?)
    }

    pub fn r_ratio(&self) -> Result<Q, ExperimentError> {
        Ok(parse_ratio(&self.r)?)
    }

    pub fn alpha_ratio(&self) -> Result<Q, ExperimentError> {
        match &self.alpha {
            Some(s) => Ok(parse_ratio(s)?),
            None => {
                let r = self.r_ratio()?;
                Ok(Q::new(*r.denom(), *r.numer()))
            }
        }
    }

    pub fn problem_params(&self) -> Result<ProblemParams, ExperimentError> {
        let measure = self.measure_parsed()?;
        Ok(ProblemParams::new(
            self.p_ratio()?,
            measure.dim() as u32,
            self.r_ratio()?,
            self.moment_kind,
        )?)
    }

    /// Structural validation shared by all run kinds. Slope runs also
    /// require `K >= 20`.
    pub fn validate(&self, slope_run: bool) -> Result<(), ExperimentError> {
        let cfg = |m: String| ExperimentError::Config(m);
        if self.n_grid.len() < 4 {
            return Err(cfg(format!(
                "n_grid needs at least 4 entries, got {}",
                self.n_grid.len()
            )));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(cfg("n_grid must be strictly increasing".into()));
        }
        if self.n_grid[0] == 0 {
            return Err(cfg("sample sizes must be positive".into()));
        }
        if slope_run && self.replicates < 20 {
            return Err(cfg(format!(
                "slope runs need at least 20 replicates, got {}",
                self.replicates
            )));
        }
        if self.replicates == 0 {
            return Err(cfg("replicates must be positive".into()));
        }
        if self.oversample < 2 {
            return Err(cfg("oversample must be at least 2".into()));
        }
        if let Some(xs) = &self.x_grid {
            if xs.is_empty() || xs.iter().any(|x| !(*x > 0.0)) {
                return Err(cfg("x_grid entries must be positive".into()));
            }
        }
        if let Some(cps) = &self.checkpoints {
            if !cps.iter().all(|c| self.n_grid.contains(c)) {
                return Err(cfg("checkpoints must be a subset of n_grid".into()));
            }
        }
        let measure = self.measure_parsed()?;
        if self.estimator == EstimatorKind::Exact1d && measure.dim() != 1 {
            return Err(cfg(format!(
                "exact_1d estimator requires d = 1, measure has d = {}",
                measure.dim()
            )));
        }
        let params = self.problem_params()?;
        let _ = params;
        Ok(())
    }

    /// Hex digest of the canonical JSON form: the provenance key of reports.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canon);
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse a TOML config (the declarative file format of the CLI).
pub fn config_from_toml(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    toml::from_str(text).map_err(|e| ExperimentError::Config(format!("config parse error: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            measure: "uniform:d=1".into(),
            p: "1".into(),
            r: "3/2".into(),
            moment_kind: MomentKind::Weak,
            statistic: ConfigStatistic::Mean,
            n_grid: vec![16, 32, 64, 128],
            replicates: 20,
            estimator: EstimatorKind::Exact1d,
            seed: 7,
            solver: SolverConfig::default(),
            oversample: 4,
            x_grid: None,
            alpha: None,
            band: None,
            checkpoints: None,
            trajectories: 20,
            normalization: None,
        }
    }

    #[test]
    fn valid_config_passes() {
        base().validate(true).unwrap();
    }

    #[test]
    fn rejects_short_or_unsorted_grid() {
        let mut c = base();
        c.n_grid = vec![16, 32, 64];
        assert!(c.validate(true).is_err());
        let mut c = base();
        c.n_grid = vec![16, 64, 32, 128];
        assert!(c.validate(true).is_err());
    }

    #[test]
    fn rejects_low_replicates_for_slopes() {
        let mut c = base();
        c.replicates = 10;
        assert!(c.validate(true).is_err());
        assert!(c.validate(false).is_ok());
    }

    #[test]
    fn default_alpha_is_one_over_r() {
        let c = base();
        assert_eq!(c.alpha_ratio().unwrap(), Q::new(2, 3));
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = base();
        let mut b = base();
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), base().hash());
    }

    #[test]
    fn toml_round_trip_rejects_unknown_keys() {
        let text = r#"
            measure = "uniform:d=1"
            p = "1"
            r = "3/2"
            moment_kind = "weak"
            statistic = "mean"
            n_grid = [16, 32, 64, 128]
            replicates = 25
            estimator = "exact_1d"
            seed = 3
        "#;
        let c = config_from_toml(text).unwrap();
        assert_eq!(c.replicates, 25);
        let bad = format!("{text}\nunknown_key = 1\n");
        assert!(config_from_toml(&bad).is_err());
    }
}
