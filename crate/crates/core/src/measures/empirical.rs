//! Weighted point clouds in `R^d`.

use super::MeasureError;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A discrete probability measure on finitely many points of `R^d`.
///
/// Points are stored flat (row-major, `dim` coordinates per point). Weights
/// are non-negative and sum to 1 within `1e-12`; the default is uniform
/// `1/n`. Sub-ranges of a sample stream are themselves empirical measures
/// (see [`EmpiricalMeasure::range`]).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    coords: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Uniform-weight cloud from row-major flat coordinates.
    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self, MeasureError> {
        assert!(dim >= 1, "dimension must be positive");
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(MeasureError::EmptySample);
        }
        let n = coords.len() / dim;
        for (i, chunk) in coords.chunks_exact(dim).enumerate() {
            if chunk.iter().any(|c| !c.is_finite()) {
                return Err(MeasureError::NonFinite { index: i });
            }
        }
        Ok(EmpiricalMeasure {
            coords,
            weights: vec![1.0 / n as f64; n],
            dim,
            uniform: true,
        })
    }

    /// Uniform-weight cloud from a list of points.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::EmptySample);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(MeasureError::EmptySample);
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MeasureError::DimMismatch {
                    index: i,
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, dim)
    }

    /// Cloud with explicit weights.
    pub fn weighted(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        let mut m = Self::from_points(points)?;
        if weights.len() != m.len() {
            return Err(MeasureError::WeightCount {
                expected: m.len(),
                got: weights.len(),
            });
        }
        let sum: f64 = crate::stats::pairwise_sum(&weights);
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > WEIGHT_SUM_TOL
        {
            return Err(MeasureError::BadWeights { sum });
        }
        m.uniform = weights.windows(2).all(|w| w[0] == w[1]);
        m.weights = weights;
        Ok(m)
    }

    /// Convenience constructor for 1-D clouds with uniform weights.
    pub fn from_values(values: &[f64]) -> Result<Self, MeasureError> {
        Self::from_flat(values.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// True when all weights are equal.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn points_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Uniform-weight measure on the points `[a, b)` of this cloud.
    pub fn range(&self, a: usize, b: usize) -> Result<Self, MeasureError> {
        if a >= b || b > self.len() {
            return Err(MeasureError::EmptySample);
        }
        Self::from_flat(self.coords[a * self.dim..b * self.dim].to_vec(), self.dim)
    }

    /// Uniform-weight measure on the first `k` points.
    pub fn prefix(&self, k: usize) -> Result<Self, MeasureError> {
        self.range(0, k)
    }

    /// Apply `x -> scale * x + shift` to every point (same shift per coordinate).
    pub fn affine(&self, scale: f64, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim);
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(c, s)| scale * c + s))
            .collect();
        EmpiricalMeasure {
            coords,
            weights: self.weights.clone(),
            dim: self.dim,
            uniform: self.uniform,
        }
    }

    /// Mean euclidean norm of the points under the cloud's weights.
    pub fn mean_euclidean_norm(&self) -> f64 {
        let terms: Vec<f64> = self
            .points_iter()
            .zip(&self.weights)
            .map(|(p, w)| w * p.iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect();
        crate::stats::pairwise_sum(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_sum_to_one() {
        let m = EmpiricalMeasure::from_values(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.len(), 3);
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(m.is_uniform());
    }

    #[test]
    fn rejects_bad_weights() {
        let pts = vec![vec![0.0], vec![1.0]];
        let err = EmpiricalMeasure::weighted(pts, vec![0.6, 0.6]).unwrap_err();
        assert!(matches!(err, MeasureError::BadWeights { .. }));
    }

    #[test]
    fn rejects_non_finite() {
        let err = EmpiricalMeasure::from_values(&[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, MeasureError::NonFinite { index: 1 }));
    }

    #[test]
    fn rejects_ragged_points() {
        let err = EmpiricalMeasure::from_points(vec![vec![0.0, 1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, MeasureError::DimMismatch { index: 1, .. }));
    }

    #[test]
    fn range_is_uniform_sub_measure() {
        let m = EmpiricalMeasure::from_values(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let s = m.range(1, 3).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.point(0), &[1.0]);
        assert_eq!(s.weight(0), 0.5);
    }
}
