//! Cheap lower bound on `W_1` from the 1-Lipschitz test function `x -> |x|_2`.

use super::TransportError;
use crate::measures::{AnalyticMeasure, EmpiricalMeasure};

/// `| (1/n) sum |X_k|_2  -  E|X|_2 |`, a valid lower bound on any
/// `W_1(mu_n, mu)`.
///
/// Errors when the analytic mean euclidean norm diverges.
pub fn dual_lipschitz_lower_bound(
    x: &EmpiricalMeasure,
    mu: &AnalyticMeasure,
) -> Result<f64, TransportError> {
    if x.dim() != mu.dim() {
        return Err(TransportError::DimMismatch {
            left: x.dim(),
            right: mu.dim(),
        });
    }
    let analytic = mu.mean_euclidean_norm()?;
    Ok((x.mean_euclidean_norm() - analytic).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::parse_spec;
    use crate::transport::semidiscrete_wp;

    #[test]
    fn matching_mean_gives_zero() {
        let mu = parse_spec("uniform:d=1").unwrap();
        let x = EmpiricalMeasure::from_values(&[0.5]).unwrap();
        assert_eq!(dual_lipschitz_lower_bound(&x, &mu).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_at_one_is_tight() {
        let mu = parse_spec("uniform:d=1").unwrap();
        let x = EmpiricalMeasure::from_values(&[1.0]).unwrap();
        let bound = dual_lipschitz_lower_bound(&x, &mu).unwrap();
        assert!((bound - 0.5).abs() < 1e-12);
        let (w1, _) = semidiscrete_wp(&x, &mu, 1.0, 2, 1, &Default::default()).unwrap();
        assert!((w1 - 0.5).abs() < 1e-12, "bound should be tight here");
    }

    #[test]
    fn infinite_mean_is_an_error() {
        let mu = parse_spec("pareto:beta=1,d=1").unwrap();
        let x = EmpiricalMeasure::from_values(&[1.0]).unwrap();
        assert!(matches!(
            dual_lipschitz_lower_bound(&x, &mu),
            Err(TransportError::Measure(_))
        ));
    }
}
