//! Pure prediction engine: classifies `(p, d, r)` into rate regimes and
//! returns the predicted exponents, logarithmic factors and deviation
//! envelopes.
//!
//! Unknown universal constants are pinned to 1 and every envelope is shape
//! only: experiments compare slopes, never levels. Exponents are carried as
//! exact rationals so boundary detection is exact equality, never float
//! comparison.

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational scalar used throughout the engine.
pub type Q = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no prediction: {0}")]
    NoPrediction(String),
}

/// Parse `"2"`, `"1.5"` or `"3/2"` into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Q, TheoryError> {
    let bad = || TheoryError::InvalidParams(format!("cannot parse rational `{s}`"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: i64 = a.trim().parse().map_err(|_| bad())?;
        let d: i64 = b.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let i: i64 = if int == "-" || int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = 10i64.pow(frac.len() as u32);
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let num = i.abs() * scale + f;
        return Ok(Q::new(if neg { -num } else { num }, scale));
    }
    let n: i64 = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// Render a rational the way `parse_ratio` reads it back.
pub fn format_ratio(q: Q) -> String {
    if q.denom() == &1 {
        format!("{}", q.numer())
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub mod ratio_serde {
    use super::{format_ratio, parse_ratio, Q};
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(*q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallDim,
    Boundary,
    LargeDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    DeviationProb,
    Mean,
    SecondMoment,
    RMoment,
    AsRate,
    LilRate,
}

/// `(p, d, r)` plus the moment hypothesis class: moments of order `rp`,
/// weak or strong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(with = "ratio_serde")]
    pub p: Q,
    pub d: u32,
    #[serde(with = "ratio_serde")]
    pub r: Q,
    pub moment_kind: MomentKind,
}

impl ProblemParams {
    pub fn new(p: Q, d: u32, r: Q, moment_kind: MomentKind) -> Result<Self, TheoryError> {
        if p < Q::one() {
            return Err(TheoryError::InvalidParams(format!(
                "p must be >= 1, got {}",
                format_ratio(p)
            )));
        }
        if d < 1 {
            return Err(TheoryError::InvalidParams("d must be >= 1".into()));
        }
        if r <= Q::one() {
            return Err(TheoryError::InvalidParams(format!(
                "r must be > 1, got {}",
                format_ratio(r)
            )));
        }
        Ok(ProblemParams {
            p,
            d,
            r,
            moment_kind,
        })
    }

    /// `d * min((r-1)/r, 1/2)`, the regime threshold for `p`.
    pub fn threshold(&self) -> Q {
        let d = Q::from_integer(self.d as i64);
        let a = (self.r - Q::one()) / self.r;
        let half = Q::new(1, 2);
        d * if a < half { a } else { half }
    }

    /// `d (r-1)/r`, the location used for the near-boundary warning.
    pub fn moment_boundary(&self) -> Q {
        Q::from_integer(self.d as i64) * (self.r - Q::one()) / self.r
    }
}

/// One predicted rate: `n^{exponent} (log n)^{log_power} x^{x_power}` up to
/// an unknown constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub statistic: Statistic,
    pub regime: Regime,
    #[serde(with = "ratio_serde")]
    pub exponent: Q,
    #[serde(with = "ratio_serde")]
    pub log_power: Q,
    #[serde(with = "ratio_serde")]
    pub x_power: Q,
    pub source: String,
    /// Always true: constants are never asserted, only shapes.
    pub shape_only: bool,
}

impl RatePrediction {
    fn new(statistic: Statistic, regime: Regime, exponent: Q, log_power: Q, source: &str) -> Self {
        RatePrediction {
            statistic,
            regime,
            exponent,
            log_power,
            x_power: Q::zero(),
            source: source.to_string(),
            shape_only: true,
        }
    }
}

/// Regime classification: `small_dim` iff `p` exceeds the threshold,
/// `boundary` at exact rational equality.
pub fn classify(params: &ProblemParams) -> Regime {
    let t = params.threshold();
    if params.p > t {
        Regime::SmallDim
    } else if params.p == t {
        Regime::Boundary
    } else {
        Regime::LargeDim
    }
}

/// Near-boundary warning: `|p - d(r-1)/r| < 0.02 p` without being exactly
/// on the boundary.
pub fn near_boundary(params: &ProblemParams) -> bool {
    let gap = (params.p - params.moment_boundary()).abs();
    gap != Q::zero() && gap < params.p * Q::new(1, 50)
}

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// Predicted decay of a moment-type statistic of `W_p^p(mu_n, mu)`.
///
/// The Rosenthal-regime correction uses the default `epsilon = 1/10`; see
/// [`moment_rate_with`].
pub fn moment_rate(
    params: &ProblemParams,
    statistic: Statistic,
) -> Result<RatePrediction, TheoryError> {
    moment_rate_with(params, statistic, q(1, 10))
}

/// As [`moment_rate`] with an explicit Rosenthal `epsilon > 0`.
pub fn moment_rate_with(
    params: &ProblemParams,
    statistic: Statistic,
    rosenthal_eps: Q,
) -> Result<RatePrediction, TheoryError> {
    let regime = classify(params);
    let one = Q::one();
    let two = Q::from_integer(2);
    let p = params.p;
    let d = Q::from_integer(params.d as i64);
    let r = params.r;
    let strong = params.moment_kind == MomentKind::Strong;

    match statistic {
        Statistic::Mean => {
            // First moment of W_p^p under an rp-th moment (weak suffices).
            if r < two {
                let (e, lp, src) = match regime {
                    Regime::SmallDim => (-(r - one) / r, Q::zero(), "first-moment small-dim"),
                    Regime::Boundary => (-p / d, two, "first-moment boundary"),
                    Regime::LargeDim => (-p / d, Q::zero(), "first-moment large-dim"),
                };
                Ok(RatePrediction::new(statistic, regime, e, lp, src))
            } else if r == two {
                let (e, lp, src) = match regime {
                    Regime::SmallDim => (q(-1, 2), one, "first-moment small-dim (r = 2)"),
                    Regime::Boundary => (q(-1, 2), two, "first-moment boundary (r = 2)"),
                    Regime::LargeDim => (-p / d, Q::zero(), "first-moment large-dim (r = 2)"),
                };
                Ok(RatePrediction::new(statistic, regime, e, lp, src))
            } else {
                // r > 2 certifies the square-root tail condition; the mean
                // inherits half the second-moment rate.
                let (e, lp, src) = match regime {
                    Regime::SmallDim => (q(-1, 2), Q::zero(), "second-moment small-dim via Jensen"),
                    Regime::Boundary => (q(-1, 2), one, "second-moment boundary via Jensen"),
                    Regime::LargeDim => (-p / d, Q::zero(), "second-moment large-dim via Jensen"),
                };
                Ok(RatePrediction::new(statistic, regime, e, lp, src))
            }
        }
        Statistic::SecondMoment => {
            if r <= two {
                return Err(TheoryError::NoPrediction(
                    "second moment needs the square-root tail condition, certified only for r > 2"
                        .into(),
                ));
            }
            // Cases split at p vs d/2, which for r > 2 is exactly the regime.
            let (e, lp, src) = match regime {
                Regime::SmallDim => (-one, Q::zero(), "second-moment small-dim"),
                Regime::Boundary => (-one, two, "second-moment boundary"),
                Regime::LargeDim => (-two * p / d, Q::zero(), "second-moment large-dim"),
            };
            Ok(RatePrediction::new(statistic, regime, e, lp, src))
        }
        Statistic::RMoment => {
            if !strong {
                return Err(TheoryError::NoPrediction(
                    "r-th moment bounds require strong moments of order rp".into(),
                ));
            }
            if r < two {
                let (e, lp, src) = match regime {
                    Regime::SmallDim => (-(r - one), Q::zero(), "r-moment small-dim"),
                    Regime::Boundary => (-(r - one), r, "r-moment boundary"),
                    Regime::LargeDim => (-r * p / d, Q::zero(), "r-moment large-dim"),
                };
                Ok(RatePrediction::new(statistic, regime, e, lp, src))
            } else if r == two {
                Err(TheoryError::NoPrediction(
                    "at r = 2 the r-th moment is the second moment; use second_moment".into(),
                ))
            } else {
                if rosenthal_eps <= Q::zero() {
                    return Err(TheoryError::InvalidParams(
                        "rosenthal epsilon must be positive".into(),
                    ));
                }
                let half = q(1, 2);
                let (e, lp, src) = if p > d * (r - one) / r {
                    // n^{-r/2} dominates n^{-(r-1)} when r > 2.
                    (-r * half, Q::zero(), "r-moment p > d(r-1)/r")
                } else if two * p > d {
                    // gamma-corrected polynomial term vs n^{-r/2}.
                    let gamma =
                        rosenthal_eps * (two * p - d) / (d * (r - two + rosenthal_eps));
                    let poly = gamma - p * r / d;
                    let other = -r * half;
                    let e = if poly > other { poly } else { other };
                    (e, Q::zero(), "r-moment d/2 < p <= d(r-1)/r")
                } else if two * p == d {
                    (-r * half, r, "r-moment p = d/2")
                } else {
                    (-r * p / d, Q::zero(), "r-moment p < d/2")
                };
                Ok(RatePrediction::new(statistic, regime, e, lp, src))
            }
        }
        Statistic::AsRate => {
            if !strong {
                return Err(TheoryError::NoPrediction(
                    "almost-sure rates require strong moments of order rp".into(),
                ));
            }
            if r >= two {
                return Err(TheoryError::NoPrediction(
                    "almost-sure rates are stated for r in (1,2)".into(),
                ));
            }
            match regime {
                Regime::SmallDim => Ok(RatePrediction::new(
                    statistic,
                    regime,
                    -(r - one) / r,
                    Q::zero(),
                    "as-rate small-dim",
                )),
                Regime::LargeDim => Ok(RatePrediction::new(
                    statistic,
                    regime,
                    -p / d,
                    one / r,
                    "as-rate large-dim",
                )),
                Regime::Boundary => Err(TheoryError::NoPrediction(
                    "the boundary case p = d(r-1)/r has no almost-sure prediction".into(),
                )),
            }
        }
        Statistic::LilRate => {
            if r <= two {
                return Err(TheoryError::NoPrediction(
                    "the iterated-logarithm rate needs the square-root tail condition, \
                     certified only for r > 2"
                        .into(),
                ));
            }
            // Normalization (n / loglog n)^theta; the loglog factor is
            // implied by the statistic tag.
            if two * p > d {
                Ok(RatePrediction::new(
                    statistic,
                    regime,
                    q(-1, 2),
                    Q::zero(),
                    "lil p > d/2",
                ))
            } else if two * p < d {
                Ok(RatePrediction::new(
                    statistic,
                    regime,
                    -p / d,
                    Q::zero(),
                    "lil p < d/2",
                ))
            } else {
                Err(TheoryError::NoPrediction(
                    "the iterated-logarithm rate is not stated at p = d/2".into(),
                ))
            }
        }
        Statistic::DeviationProb => Err(TheoryError::NoPrediction(
            "use moderate_deviation_rate for deviation probabilities".into(),
        )),
    }
}

/// Decay in `n` of `P(W_p^p > x / n^{1 - alpha})` at admissible `alpha`,
/// with the `x` power recorded in the prediction.
pub fn moderate_deviation_rate(
    params: &ProblemParams,
    alpha: Q,
) -> Result<RatePrediction, TheoryError> {
    let one = Q::one();
    let two = Q::from_integer(2);
    if alpha <= Q::zero() || alpha > one {
        return Err(TheoryError::InvalidParams(format!(
            "alpha must be in (0, 1], got {}",
            format_ratio(alpha)
        )));
    }
    let regime = classify(params);
    let p = params.p;
    let d = Q::from_integer(params.d as i64);
    let r = params.r;
    let refusal = |lo: Q, lo_open: bool| {
        TheoryError::NoPrediction(format!(
            "alpha = {} outside the admissible interval {}{}, 1]",
            format_ratio(alpha),
            if lo_open { "(" } else { "[" },
            format_ratio(lo),
        ))
    };
    if r < two {
        match regime {
            Regime::SmallDim => {
                let lo = one / r;
                if alpha < lo {
                    return Err(refusal(lo, false));
                }
                let mut pred = RatePrediction::new(
                    Statistic::DeviationProb,
                    regime,
                    -(alpha * r - one),
                    Q::zero(),
                    "moderate-deviation small-dim",
                );
                pred.x_power = -r;
                Ok(pred)
            }
            Regime::Boundary => {
                let lo = one / r;
                if alpha <= lo {
                    return Err(refusal(lo, true));
                }
                let mut pred = RatePrediction::new(
                    Statistic::DeviationProb,
                    regime,
                    -(alpha * r - one),
                    two * r,
                    "moderate-deviation boundary",
                );
                pred.x_power = -r;
                Ok(pred)
            }
            Regime::LargeDim => {
                let lo = (d - p) / d;
                if alpha < lo {
                    return Err(refusal(lo, false));
                }
                let mut pred = RatePrediction::new(
                    Statistic::DeviationProb,
                    regime,
                    -(p * r - (one - alpha) * r * d) / d,
                    Q::zero(),
                    "moderate-deviation large-dim",
                );
                pred.x_power = -r;
                Ok(pred)
            }
        }
    } else if r > two {
        let half = q(1, 2);
        let lo = {
            let a = (d - p) / d;
            if a > half {
                a
            } else {
                half
            }
        };
        if alpha <= lo {
            return Err(refusal(lo, true));
        }
        let mut pred = RatePrediction::new(
            Statistic::DeviationProb,
            regime,
            -(alpha * r - one),
            Q::zero(),
            "moderate-deviation r > 2",
        );
        pred.x_power = -r;
        Ok(pred)
    } else {
        Err(TheoryError::NoPrediction(
            "no deviation statement is available at exactly r = 2".into(),
        ))
    }
}

/// Admissibility of a Baum-Katz weight exponent; refusal is a value carrying
/// the admissible interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaumKatz {
    Admissible {
        #[serde(with = "ratio_serde")]
        exponent: Q,
    },
    Refused {
        #[serde(with = "ratio_serde")]
        lo: Q,
        lo_open: bool,
        #[serde(with = "ratio_serde")]
        hi: Q,
    },
}

/// Weight exponent of the summable series `sum n^w P(max_k k W_p^p > n^a x)`
/// for admissible `alpha`, under strong moments.
pub fn baum_katz_weights(params: &ProblemParams, alpha: Q) -> Result<BaumKatz, TheoryError> {
    let one = Q::one();
    let two = Q::from_integer(2);
    if alpha <= Q::zero() || alpha > one {
        return Err(TheoryError::InvalidParams(format!(
            "alpha must be in (0, 1], got {}",
            format_ratio(alpha)
        )));
    }
    if params.moment_kind != MomentKind::Strong {
        return Err(TheoryError::NoPrediction(
            "series summability requires strong moments of order rp".into(),
        ));
    }
    let p = params.p;
    let d = Q::from_integer(params.d as i64);
    let r = params.r;
    if r < two {
        match classify(params) {
            Regime::SmallDim => {
                let lo = one / r;
                if alpha >= lo {
                    Ok(BaumKatz::Admissible {
                        exponent: alpha * r - two,
                    })
                } else {
                    Ok(BaumKatz::Refused {
                        lo,
                        lo_open: false,
                        hi: one,
                    })
                }
            }
            Regime::LargeDim => {
                let lo = (d - p) / d;
                if alpha > lo {
                    Ok(BaumKatz::Admissible {
                        exponent: (p * r - (one - alpha) * r * d - d) / d,
                    })
                } else {
                    Ok(BaumKatz::Refused {
                        lo,
                        lo_open: true,
                        hi: one,
                    })
                }
            }
            Regime::Boundary => Err(TheoryError::NoPrediction(
                "the boundary case p = d(r-1)/r has no series statement".into(),
            )),
        }
    } else if r > two {
        let half = q(1, 2);
        let a = (d - p) / d;
        let lo = if a > half { a } else { half };
        if alpha > lo {
            Ok(BaumKatz::Admissible {
                exponent: alpha * r - two,
            })
        } else {
            Ok(BaumKatz::Refused {
                lo,
                lo_open: true,
                hi: one,
            })
        }
    } else {
        Err(TheoryError::NoPrediction(
            "no series statement is available at exactly r = 2".into(),
        ))
    }
}

/// Structural deviation envelope `P(W_p^p > x)` with every unknown constant
/// (and every norm and tail integral) pinned to 1: shape only.
pub fn deviation_bound(params: &ProblemParams, n: u64, x: f64) -> Result<f64, TheoryError> {
    if n == 0 || !(x > 0.0) {
        return Err(TheoryError::InvalidParams(
            "need n >= 1 and x > 0".into(),
        ));
    }
    let two = Q::from_integer(2);
    let r: f64 = ratio_to_f64(params.r);
    let p: f64 = ratio_to_f64(params.p);
    let d = params.d as f64;
    let nf = n as f64;
    if params.r < two {
        let envelope = match classify(params) {
            Regime::SmallDim => x.powf(-r) * nf.powf(-(r - 1.0)),
            Regime::LargeDim => x.powf(-r) * nf.powf(-r * p / d),
            Regime::Boundary => {
                let logn = nf.ln().max(1.0);
                let inner = (x.powf(1.0 / p) * nf.powf(r / (d * (r - 1.0)))).ln().max(0.0);
                x.powf(-r) * nf.powf(-(r - 1.0)) * logn.powf(r) * (1.0 + inner).powf(r)
            }
        };
        Ok(envelope.min(1.0))
    } else if params.r > two {
        // q > r is free; default q = r + 1.
        let qq = r + 1.0;
        let a = if p > d / 2.0 {
            if x <= 1.0 {
                (-nf * x * x).exp()
            } else {
                0.0
            }
        } else if p == d / 2.0 {
            if x <= 1.0 {
                let s = x / (2.0 + 1.0 / x).ln();
                (-nf * s * s).exp()
            } else {
                0.0
            }
        } else if x <= 1.0 {
            (-nf * x.powf(d / p)).exp()
        } else {
            0.0
        };
        let envelope = a + x.powf(-r) * nf.powf(-(r - 1.0)) + x.powf(-qq) * nf.powf(-qq / 2.0);
        Ok(envelope.min(1.0))
    } else {
        Err(TheoryError::NoPrediction(
            "no deviation envelope is available at exactly r = 2".into(),
        ))
    }
}

/// Convert an exact rational into f64.
pub fn ratio_to_f64(qv: Q) -> f64 {
    *qv.numer() as f64 / *qv.denom() as f64
}

/// One row of the exportable exponent table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(with = "ratio_serde")]
    pub p: Q,
    pub d: u32,
    #[serde(with = "ratio_serde")]
    pub r: Q,
    pub moment_kind: MomentKind,
    pub statistic: Statistic,
    pub regime: Regime,
    #[serde(with = "ratio_serde")]
    pub exponent: Q,
    #[serde(with = "ratio_serde")]
    pub log_power: Q,
    pub source: String,
}

/// The engine's outputs over a canonical parameter grid, for documentation
/// and fixtures.
pub fn standard_table() -> Vec<TableRow> {
    let mut rows = Vec::new();
    let grid: Vec<(Q, u32, Q, MomentKind)> = vec![
        (q(1, 1), 1, q(3, 2), MomentKind::Weak),
        (q(1, 1), 1, q(3, 2), MomentKind::Strong),
        (q(1, 1), 3, q(3, 2), MomentKind::Strong),
        (q(1, 1), 4, q(3, 2), MomentKind::Strong),
        (q(1, 1), 1, q(3, 1), MomentKind::Strong),
        (q(1, 1), 2, q(3, 1), MomentKind::Strong),
        (q(1, 1), 3, q(3, 1), MomentKind::Strong),
        (q(2, 1), 4, q(3, 1), MomentKind::Strong),
        (q(2, 1), 3, q(4, 3), MomentKind::Strong),
        (q(1, 1), 2, q(2, 1), MomentKind::Weak),
        (q(3, 2), 1, q(7, 4), MomentKind::Strong),
        (q(1, 1), 5, q(3, 2), MomentKind::Strong),
        (q(2, 1), 5, q(5, 2), MomentKind::Strong),
    ];
    for (p, d, r, kind) in grid {
        let params = ProblemParams::new(p, d, r, kind).unwrap();
        for statistic in [
            Statistic::Mean,
            Statistic::SecondMoment,
            Statistic::RMoment,
            Statistic::AsRate,
            Statistic::LilRate,
        ] {
            if let Ok(pred) = moment_rate(&params, statistic) {
                rows.push(TableRow {
                    p,
                    d,
                    r,
                    moment_kind: kind,
                    statistic,
                    regime: pred.regime,
                    exponent: pred.exponent,
                    log_power: pred.log_power,
                    source: pred.source,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: Q, d: u32, r: Q) -> ProblemParams {
        ProblemParams::new(p, d, r, MomentKind::Strong).unwrap()
    }

    #[test]
    fn parse_ratio_forms() {
        assert_eq!(parse_ratio("2").unwrap(), q(2, 1));
        assert_eq!(parse_ratio("1.5").unwrap(), q(3, 2));
        assert_eq!(parse_ratio("3/2").unwrap(), q(3, 2));
        assert_eq!(parse_ratio("-0.25").unwrap(), q(-1, 4));
        assert!(parse_ratio("a/b").is_err());
        assert!(parse_ratio("1/0").is_err());
    }

    #[test]
    fn classify_examples() {
        // d(r-1)/r = 1/3 < 1
        assert_eq!(classify(&params(q(1, 1), 1, q(3, 2))), Regime::SmallDim);
        // d(r-1)/r = 1 = p
        assert_eq!(classify(&params(q(1, 1), 3, q(3, 2))), Regime::Boundary);
        // d min(2/3, 1/2) = 2 > 1
        assert_eq!(classify(&params(q(1, 1), 4, q(3, 1))), Regime::LargeDim);
    }

    #[test]
    fn classify_monotone_in_p() {
        let base = params(q(1, 1), 3, q(3, 2));
        let mut last = classify(&base) as u8;
        for num in 2..12 {
            let pr = params(q(num, 2), 3, q(3, 2));
            let now = classify(&pr) as u8;
            assert!(now <= last, "regime moved away from small_dim as p grew");
            last = now;
        }
    }

    #[test]
    fn mean_rate_examples() {
        let pred = moment_rate(&params(q(1, 1), 1, q(3, 2)), Statistic::Mean).unwrap();
        assert_eq!(pred.exponent, q(-1, 3));
        assert_eq!(pred.log_power, Q::zero());

        let pred = moment_rate(&params(q(1, 1), 3, q(3, 1)), Statistic::SecondMoment).unwrap();
        assert_eq!(pred.exponent, q(-2, 3));

        let pred = moment_rate(&params(q(2, 1), 4, q(3, 1)), Statistic::RMoment).unwrap();
        assert_eq!(pred.exponent, q(-3, 2));
        assert_eq!(pred.log_power, q(3, 1));
    }

    #[test]
    fn boundary_continuity_of_mean_exponent() {
        // At p = d(r-1)/r the small- and large-dim polynomial exponents agree.
        for (d, r) in [(3u32, q(3, 2)), (4, q(4, 3)), (2, q(8, 5))] {
            let p = Q::from_integer(d as i64) * (r - Q::one()) / r;
            if p < Q::one() {
                continue;
            }
            let b = params(p, d, r);
            assert_eq!(classify(&b), Regime::Boundary);
            let small = -(r - Q::one()) / r;
            let large = -p / Q::from_integer(d as i64);
            assert_eq!(small, large);
        }
    }

    #[test]
    fn moment_exponents_always_negative() {
        for d in 1..=5u32 {
            for (pn, pd) in [(1i64, 1i64), (3, 2), (2, 1)] {
                for (rn, rd) in [(6i64, 5i64), (3, 2), (2, 1), (5, 2), (4, 1)] {
                    let pr = ProblemParams::new(q(pn, pd), d, q(rn, rd), MomentKind::Strong)
                        .unwrap();
                    for s in [
                        Statistic::Mean,
                        Statistic::SecondMoment,
                        Statistic::RMoment,
                        Statistic::AsRate,
                        Statistic::LilRate,
                    ] {
                        if let Ok(pred) = moment_rate(&pr, s) {
                            assert!(
                                pred.exponent < Q::zero(),
                                "{s:?} at p={pn}/{pd} d={d} r={rn}/{rd} gave {}",
                                format_ratio(pred.exponent)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn deviation_bound_scales_as_promised() {
        // Stay below the probability clamp: x = 2 keeps every envelope < 1.
        // Small dim, r = 3/2: doubling n multiplies by 2^{-(r-1)} = 2^{-1/2}.
        let pr = params(q(1, 1), 1, q(3, 2));
        let e1 = deviation_bound(&pr, 1 << 12, 2.0).unwrap();
        let e2 = deviation_bound(&pr, 1 << 13, 2.0).unwrap();
        assert!((e2 / e1 - 2f64.powf(-0.5)).abs() < 1e-12);
        // Large dim (p=1, d=4, r=3/2): factor 2^{-rp/d} = 2^{-0.375}.
        let pr = params(q(1, 1), 4, q(3, 2));
        let e1 = deviation_bound(&pr, 1 << 12, 2.0).unwrap();
        let e2 = deviation_bound(&pr, 1 << 13, 2.0).unwrap();
        assert!((e2 / e1 - 2f64.powf(-0.375)).abs() < 1e-12);
        // x -> 2x multiplies non-boundary envelopes by 2^{-r}.
        let e2x = deviation_bound(&pr, 1 << 12, 4.0).unwrap();
        assert!((e2x / e1 - 2f64.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn deviation_bound_monotone() {
        let cases = [
            params(q(1, 1), 1, q(3, 2)),
            params(q(1, 1), 4, q(3, 2)),
            params(q(1, 1), 1, q(3, 1)),
            params(q(1, 1), 4, q(3, 1)),
            params(q(2, 1), 4, q(3, 1)),
        ];
        for pr in cases {
            let mut last = f64::INFINITY;
            for k in 6..16 {
                let v = deviation_bound(&pr, 1 << k, 0.3).unwrap();
                assert!(v <= last + 1e-15, "not monotone in n");
                last = v;
            }
            let mut last = f64::INFINITY;
            for i in 1..40 {
                let v = deviation_bound(&pr, 4096, 0.05 * i as f64).unwrap();
                assert!(v <= last + 1e-15, "not monotone in x");
                last = v;
            }
        }
    }

    #[test]
    fn baum_katz_examples() {
        let pr = params(q(1, 1), 1, q(3, 2));
        match baum_katz_weights(&pr, q(2, 3)).unwrap() {
            BaumKatz::Admissible { exponent } => assert_eq!(exponent, q(-1, 1)),
            _ => panic!("alpha = 1/r should be admissible in small dim"),
        }
        let pr = params(q(1, 1), 4, q(3, 2));
        match baum_katz_weights(&pr, q(1, 2)).unwrap() {
            BaumKatz::Refused { lo, lo_open, hi } => {
                assert_eq!(lo, q(3, 4));
                assert!(lo_open);
                assert_eq!(hi, Q::one());
            }
            _ => panic!("alpha = 0.5 < 3/4 must be refused"),
        }
        // alpha = 1 gives weight r - 2 in the n^{alpha r - 2} families
        // (small dimension here; also r > 2).
        let small = params(q(1, 1), 1, q(3, 2));
        match baum_katz_weights(&small, Q::one()).unwrap() {
            BaumKatz::Admissible { exponent } => {
                assert_eq!(exponent, small.r - Q::from_integer(2));
            }
            _ => panic!("alpha = 1 admissible"),
        }
        let big_r = params(q(1, 1), 1, q(3, 1));
        match baum_katz_weights(&big_r, Q::one()).unwrap() {
            BaumKatz::Admissible { exponent } => {
                assert_eq!(exponent, Q::one());
            }
            _ => panic!("alpha = 1 admissible for r > 2"),
        }
    }

    #[test]
    fn weak_moments_refused_for_series() {
        let pr = ProblemParams::new(q(1, 1), 1, q(3, 2), MomentKind::Weak).unwrap();
        assert!(baum_katz_weights(&pr, q(2, 3)).is_err());
    }

    #[test]
    fn moderate_deviation_examples() {
        // alpha = 1/r in small dim: exponent 0 (stabilizing exceedance).
        let pr = ProblemParams::new(q(1, 1), 1, q(3, 2), MomentKind::Weak).unwrap();
        let pred = moderate_deviation_rate(&pr, q(2, 3)).unwrap();
        assert_eq!(pred.exponent, Q::zero());
        assert_eq!(pred.x_power, q(-3, 2));
        // Below the admissible interval: refusal.
        assert!(moderate_deviation_rate(&pr, q(1, 2)).is_err());
    }

    #[test]
    fn boundary_statistics_without_predictions() {
        let b = params(q(1, 1), 3, q(3, 2));
        assert_eq!(classify(&b), Regime::Boundary);
        assert!(moment_rate(&b, Statistic::AsRate).is_err());
        assert!(baum_katz_weights(&b, q(4, 5)).is_err());
        // But the mean does have a boundary prediction with logs.
        let pred = moment_rate(&b, Statistic::Mean).unwrap();
        assert_eq!(pred.exponent, q(-1, 3));
        assert_eq!(pred.log_power, q(2, 1));
    }

    #[test]
    fn near_boundary_warning() {
        let b = params(q(100, 99), 3, q(3, 2)); // p = 1.0101.., boundary at 1
        assert!(near_boundary(&b));
        let far = params(q(2, 1), 3, q(3, 2));
        assert!(!near_boundary(&far));
        let exact = params(q(1, 1), 3, q(3, 2));
        assert!(!near_boundary(&exact));
    }

    #[test]
    fn rosenthal_epsilon_correction() {
        // d/2 < p <= d(r-1)/r (here p = 2 = 2d/3 exactly, the closed upper
        // end): gamma = eps (2p-d)/(d (r-2+eps)) = 1/33, and the polynomial
        // term gamma - pr/d = -65/33 still loses to -r/2 = -3/2; for r > 2
        // the n^{-r/2} term always dominates this case.
        let pr = params(q(2, 1), 3, q(3, 1));
        let pred = moment_rate(&pr, Statistic::RMoment).unwrap();
        assert_eq!(pred.exponent, q(-3, 2));
        assert_eq!(pred.log_power, Q::zero());
        // A larger epsilon moves gamma but not the max.
        let pred = moment_rate_with(&pr, Statistic::RMoment, q(1, 2)).unwrap();
        assert_eq!(pred.exponent, q(-3, 2));
    }

    #[test]
    fn table_round_trips_as_json() {
        let rows = standard_table();
        assert!(rows.len() >= 30);
        let s = serde_json::to_string_pretty(&rows).unwrap();
        let back: Vec<TableRow> = serde_json::from_str(&s).unwrap();
        let s2 = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(s, s2);
    }
}
