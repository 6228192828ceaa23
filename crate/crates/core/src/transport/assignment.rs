//! Exact solver for equal-size uniform clouds via the assignment problem.

use super::plan::{Method, Pairing, TransportPlan};
use super::{cost_pow, TransportError, DEFAULT_ASSIGNMENT_CAP};
use crate::measures::EmpiricalMeasure;

/// Globally optimal permutation coupling for equal-size, uniform-weight
/// clouds; `value = (1/n) sum |x_i - y_{sigma(i)}|^p`.
///
/// `cap` guards the `O(n^3)` dual-update search (`None` uses
/// [`DEFAULT_ASSIGNMENT_CAP`]). Ties between equal-cost columns resolve to
/// the lowest index, which affects plans but never values.
pub fn wasserstein_assignment(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    p: f64,
    cap: Option<usize>,
) -> Result<(f64, TransportPlan), TransportError> {
    if x.dim() != y.dim() {
        return Err(TransportError::DimMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    if x.len() != y.len() || !x.is_uniform() || !y.is_uniform() {
        return Err(TransportError::AssignmentShape {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    let cap = cap.unwrap_or(DEFAULT_ASSIGNMENT_CAP);
    if n > cap {
        return Err(TransportError::AssignmentCap { n, cap });
    }

    let mut costs = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            costs[i * n + j] = cost_pow(x.point(i), y.point(j), p);
        }
    }
    let sigma = solve_lap(&costs, n);
    let value = sigma
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i * n + j])
        .sum::<f64>()
        / n as f64;
    Ok((
        value,
        TransportPlan {
            pairing: Pairing::Permutation { sigma },
            cost: value,
            method: Method::Assignment,
            p,
        },
    ))
}

/// Dense `O(n^3)` shortest-augmenting-path assignment (Jonker–Volgenant
/// style dual updates). Returns the row-to-column assignment.
pub(crate) fn solve_lap(costs: &[f64], n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    debug_assert_eq!(costs.len(), n * n);

    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // column -> row (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];

        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;

            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }

            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }

            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_on_equal_clouds() {
        let x = EmpiricalMeasure::from_points(vec![vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
        let (v, _) = wasserstein_assignment(&x, &x, 2.0, None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn single_pair_euclidean() {
        let x = EmpiricalMeasure::from_points(vec![vec![0.0, 0.0]]).unwrap();
        let y = EmpiricalMeasure::from_points(vec![vec![3.0, 4.0]]).unwrap();
        let (v, _) = wasserstein_assignment(&x, &y, 1.0, None).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn beats_every_other_permutation_on_small_instance() {
        let x = EmpiricalMeasure::from_points(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.2, 2.0],
        ])
        .unwrap();
        let y = EmpiricalMeasure::from_points(vec![
            vec![0.9, 0.4],
            vec![0.1, 1.9],
            vec![-0.1, 0.1],
        ])
        .unwrap();
        let (v, _) = wasserstein_assignment(&x, &y, 2.0, None).unwrap();
        // All 6 permutations of 3 elements.
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let best = perms
            .iter()
            .map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| cost_pow(x.point(i), y.point(j), 2.0))
                    .sum::<f64>()
                    / 3.0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((v - best).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let x = EmpiricalMeasure::from_values(&[0.0, 1.0]).unwrap();
        let y = EmpiricalMeasure::from_values(&[0.0]).unwrap();
        assert!(matches!(
            wasserstein_assignment(&x, &y, 1.0, None),
            Err(TransportError::AssignmentShape { .. })
        ));
        let w =
            EmpiricalMeasure::weighted(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
        assert!(matches!(
            wasserstein_assignment(&w, &w, 1.0, None),
            Err(TransportError::AssignmentShape { .. })
        ));
    }

    #[test]
    fn cap_refusal() {
        let x = EmpiricalMeasure::from_values(&[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            wasserstein_assignment(&x, &x, 1.0, Some(2)),
            Err(TransportError::AssignmentCap { n: 3, cap: 2 })
        ));
    }
}
