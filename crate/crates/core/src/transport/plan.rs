//! Realized transport plans.

use serde::{Deserialize, Serialize};

use crate::measures::EmpiricalMeasure;

use super::cost_pow;

/// Which solver produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "exact-1d")]
    Exact1d,
    #[serde(rename = "assignment")]
    Assignment,
    #[serde(rename = "entropic")]
    Entropic,
}

/// Dense coupling matrix, row-major (`rows x cols`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl CouplingMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = self.entries[i * self.cols..(i + 1) * self.cols].iter().sum();
        }
        out
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self.get(i, j);
            }
        }
        out
    }
}

/// Either a permutation (equal-size uniform case) or a coupling matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pairing {
    Permutation { sigma: Vec<usize> },
    Coupling { matrix: CouplingMatrix },
}

/// A realized pairing together with its cost `sum pi(i,j) |x_i - y_j|^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub pairing: Pairing,
    pub cost: f64,
    pub method: Method,
    pub p: f64,
}

impl TransportPlan {
    /// Recompute the cost of the stored pairing against the original clouds.
    pub fn reevaluate_cost(&self, x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> f64 {
        match &self.pairing {
            Pairing::Permutation { sigma } => {
                let n = sigma.len() as f64;
                sigma
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| cost_pow(x.point(i), y.point(j), self.p))
                    .sum::<f64>()
                    / n
            }
            Pairing::Coupling { matrix } => {
                let mut total = 0.0;
                for i in 0..matrix.rows {
                    for j in 0..matrix.cols {
                        let w = matrix.get(i, j);
                        if w != 0.0 {
                            total += w * cost_pow(x.point(i), y.point(j), self.p);
                        }
                    }
                }
                total
            }
        }
    }

    /// Largest violation of the marginal constraints.
    pub fn marginal_violation(&self, x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> f64 {
        match &self.pairing {
            Pairing::Permutation { sigma } => {
                // A permutation always couples uniform weights exactly; only
                // a length mismatch can violate anything.
                if sigma.len() == x.len() && sigma.len() == y.len() {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Pairing::Coupling { matrix } => {
                let mut worst: f64 = 0.0;
                for (i, r) in matrix.row_sums().iter().enumerate() {
                    worst = worst.max((r - x.weight(i)).abs());
                }
                for (j, c) in matrix.col_sums().iter().enumerate() {
                    worst = worst.max((c - y.weight(j)).abs());
                }
                worst
            }
        }
    }
}
