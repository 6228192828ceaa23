//! Small statistical utilities shared by the experiment harness and the
//! invariant suites: pairwise summation, weighted least squares on log-log
//! data, Wilson intervals, quantiles, and Student-t critical values.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Pairwise (cascade) summation with a fixed reduction tree.
///
/// The result depends only on the order of `values`, never on how the work
/// producing them was scheduled, so replicate aggregation stays bit-stable.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Mean via pairwise summation.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance via pairwise summation; 0 for fewer than 2 values.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / (n as f64 - 1.0)
}

/// Linear-interpolation quantile of a *sorted* slice (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let q = q.clamp(0.0, 1.0);
    let h = q * (sorted.len() as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Median of a sorted slice.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    quantile_sorted(sorted, 0.5)
}

/// Result of a (weighted) simple linear regression.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope estimate.
    pub slope_stderr: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
}

/// Weighted least squares of `y` on `x`.
///
/// Weights must be positive; with fewer than 3 points the slope stderr is 0.
pub fn weighted_least_squares(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    assert!(x.len() >= 2, "need at least two points");
    let sw = pairwise_sum(w);
    let xb = pairwise_sum(&x.iter().zip(w).map(|(x, w)| x * w).collect::<Vec<_>>()) / sw;
    let yb = pairwise_sum(&y.iter().zip(w).map(|(y, w)| y * w).collect::<Vec<_>>()) / sw;
    let sxx = pairwise_sum(
        &x.iter()
            .zip(w)
            .map(|(x, w)| w * (x - xb) * (x - xb))
            .collect::<Vec<_>>(),
    );
    let sxy = pairwise_sum(
        &x.iter()
            .zip(y)
            .zip(w)
            .map(|((x, y), w)| w * (x - xb) * (y - yb))
            .collect::<Vec<_>>(),
    );
    let syy = pairwise_sum(
        &y.iter()
            .zip(w)
            .map(|(y, w)| w * (y - yb) * (y - yb))
            .collect::<Vec<_>>(),
    );
    let slope = sxy / sxx;
    let intercept = yb - slope * xb;
    let n = x.len() as f64;
    let dof = (n - 2.0).max(1.0);
    // Residual variance scaled back to the weighted metric.
    let rss = pairwise_sum(
        &x.iter()
            .zip(y)
            .zip(w)
            .map(|((x, y), w)| {
                let r = y - (intercept + slope * x);
                w * r * r
            })
            .collect::<Vec<_>>(),
    );
    let slope_stderr = if x.len() > 2 {
        (rss / dof / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    }
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Upper quantile of the Student-t distribution with `df` degrees of freedom.
pub fn t_upper_quantile(df: f64, level: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    t.inverse_cdf(level)
}

/// One-sided test for a positive regression slope at significance `alpha`.
///
/// Returns `true` when the slope is significantly positive.
pub fn slope_significantly_positive(fit: &LineFit, n_points: usize, alpha: f64) -> bool {
    if n_points < 3 || fit.slope_stderr <= 0.0 {
        return false;
    }
    let t_stat = fit.slope / fit.slope_stderr;
    let crit = t_upper_quantile((n_points - 2) as f64, 1.0 - alpha);
    t_stat > crit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(pairwise_sum(&v), 15.0);
    }

    #[test]
    fn exact_line_recovered() {
        let x: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
        let w = vec![1.0; x.len()];
        let fit = weighted_least_squares(&x, &y, &w);
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_contains_p_hat() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(lo > 0.2 && hi < 0.41);
    }

    #[test]
    fn t_quantile_sane() {
        // Large dof approaches the normal quantile 1.645.
        let q = t_upper_quantile(1000.0, 0.95);
        assert!((q - 1.646).abs() < 0.01, "got {q}");
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(median_sorted(&v), 2.5);
    }
}
