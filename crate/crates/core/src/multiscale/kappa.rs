//! Empirical estimation of the domination ratio `W_p^p / D_p`.
//!
//! The domination holds with an unknown constant, so we never assert a
//! level; we check that observed ratios stay bounded (no positive trend in
//! the sample size) and that `D_p = 0` forces `W_p^p = 0`.

use serde::{Deserialize, Serialize};

use super::MultiscaleError;
use crate::stats::{self, LineFit};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaStats {
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// OLS slope of ratio on `ln n` with its significance call at 5%.
    pub trend: LineFit,
    pub trend_positive: bool,
    pub used: usize,
}

/// Ratio statistics over observed `(n, W_p^p, D_p)` triples.
///
/// Pairs with `D_p = 0` and `W_p^p = 0` carry no ratio information and are
/// skipped; `D_p = 0` with `W_p^p > 0` contradicts the domination outright
/// and is a hard error. At least 5 usable observations are required.
pub fn empirical_kappa(observations: &[(f64, f64, f64)]) -> Result<KappaStats, MultiscaleError> {
    let mut ln_n = Vec::new();
    let mut ratios = Vec::new();
    for (index, &(n, w, d)) in observations.iter().enumerate() {
        if d <= 0.0 {
            if w > 0.0 {
                return Err(MultiscaleError::KappaContradiction { index, w });
            }
            continue;
        }
        ln_n.push(n.ln());
        ratios.push(w / d);
    }
    if ratios.len() < 5 {
        return Err(MultiscaleError::TooFewObservations {
            needed: 5,
            got: ratios.len(),
        });
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let weights = vec![1.0; ratios.len()];
    let trend = stats::weighted_least_squares(&ln_n, &ratios, &weights);
    let distinct_n = {
        let mut xs = ln_n.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        xs.len()
    };
    // With a single n there is no trend to speak of.
    let trend_positive =
        distinct_n >= 2 && stats::slope_significantly_positive(&trend, ratios.len(), 0.05);
    Ok(KappaStats {
        max_ratio: *sorted.last().unwrap(),
        median_ratio: stats::median_sorted(&sorted),
        trend,
        trend_positive,
        used: ratios.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_ratio_has_no_trend() {
        let obs: Vec<(f64, f64, f64)> = (1..=8)
            .map(|i| {
                let n = (1 << i) as f64;
                (n, 0.8 / n, 1.0 / n)
            })
            .collect();
        let stats = empirical_kappa(&obs).unwrap();
        assert!((stats.max_ratio - 0.8).abs() < 1e-12);
        assert!((stats.median_ratio - 0.8).abs() < 1e-12);
        assert!(!stats.trend_positive);
    }

    #[test]
    fn zero_d_with_positive_w_is_fatal() {
        let obs = vec![
            (8.0, 0.1, 0.2),
            (16.0, 0.05, 0.1),
            (32.0, 0.3, 0.0),
        ];
        let err = empirical_kappa(&obs).unwrap_err();
        assert!(matches!(err, MultiscaleError::KappaContradiction { index: 2, .. }));
    }

    #[test]
    fn degenerate_pairs_are_skipped_but_counted_out() {
        let obs = vec![(8.0, 0.0, 0.0); 10];
        let err = empirical_kappa(&obs).unwrap_err();
        assert!(matches!(err, MultiscaleError::TooFewObservations { got: 0, .. }));
    }

    #[test]
    fn growing_ratio_is_flagged() {
        let obs: Vec<(f64, f64, f64)> = (1..=30)
            .map(|i| {
                let n = (1 << (i % 10)) as f64 * 2.0;
                let ratio = 0.2 + 0.1 * n.ln();
                (n, ratio / n, 1.0 / n)
            })
            .collect();
        let stats = empirical_kappa(&obs).unwrap();
        assert!(stats.trend_positive);
    }
}
