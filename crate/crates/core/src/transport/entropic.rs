//! Entropically regularized transport: Sinkhorn scaling with log-domain
//! stabilization (potential absorption), epsilon-scaling, and rounding of
//! the coupling back to the feasible polytope, so the returned value is
//! always an upper bound on the exact `W_p^p`.

use super::plan::{CouplingMatrix, Method, Pairing, TransportPlan};
use super::TransportError;
use crate::measures::EmpiricalMeasure;

#[derive(Debug, Clone, Copy)]
pub struct EntropicOptions {
    /// Target regularization (absolute, same units as the cost).
    pub epsilon: f64,
    /// Budget of scaling iterations across all epsilon stages.
    pub max_iter: usize,
    /// L1 marginal tolerance declaring convergence.
    pub tol: f64,
    /// Warm-start from larger epsilons (halved down to the target).
    pub eps_scaling: bool,
    /// Materialize the rounded plan (costs `n * m` doubles).
    pub keep_plan: bool,
}

impl EntropicOptions {
    pub fn new(epsilon: f64, max_iter: usize) -> Self {
        EntropicOptions {
            epsilon,
            max_iter,
            tol: 1e-8,
            eps_scaling: true,
            keep_plan: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EntropicSolution {
    /// Transport cost of the rounded feasible plan (upper bound on `W_p^p`).
    pub value: f64,
    pub plan: Option<TransportPlan>,
    pub converged: bool,
    /// L1 marginal error of the unrounded scaled kernel.
    pub marginal_error: f64,
    pub iterations: usize,
}

struct Problem<'a> {
    xc: &'a [f64],
    yc: &'a [f64],
    dim: usize,
    p: f64,
    n: usize,
    m: usize,
}

impl Problem<'_> {
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        let a = &self.xc[i * self.dim..(i + 1) * self.dim];
        let b = &self.yc[j * self.dim..(j + 1) * self.dim];
        let mut sq = 0.0;
        for k in 0..self.dim {
            let d = a[k] - b[k];
            sq += d * d;
        }
        if self.p == 2.0 {
            sq
        } else if self.p == 1.0 {
            sq.sqrt()
        } else {
            sq.sqrt().powf(self.p)
        }
    }

    fn fill_kernel(&self, kernel: &mut [f64], f: &[f64], g: &[f64], eps: f64) {
        for i in 0..self.n {
            let row = &mut kernel[i * self.m..(i + 1) * self.m];
            let fi = f[i];
            for (j, slot) in row.iter_mut().enumerate() {
                let arg = ((fi + g[j] - self.cost(i, j)) / eps).min(700.0);
                *slot = arg.exp();
            }
        }
    }
}

/// Sinkhorn iterations on `|x_i - y_j|_2^p` at regularization `epsilon`.
///
/// Not converging within `max_iter` is not an error: the result is still
/// returned with `converged = false` (the rounded value stays feasible).
pub fn wasserstein_entropic(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    p: f64,
    epsilon: f64,
    max_iter: usize,
) -> Result<EntropicSolution, TransportError> {
    sinkhorn(x, y, p, EntropicOptions::new(epsilon, max_iter))
}

pub(crate) fn sinkhorn(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    p: f64,
    opts: EntropicOptions,
) -> Result<EntropicSolution, TransportError> {
    if x.dim() != y.dim() {
        return Err(TransportError::DimMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(TransportError::BadEpsilon(opts.epsilon));
    }
    let prob = Problem {
        xc: x.coords(),
        yc: y.coords(),
        dim: x.dim(),
        p,
        n: x.len(),
        m: y.len(),
    };
    let (n, m) = (prob.n, prob.m);
    let a = x.weights();
    let b = y.weights();

    // Epsilon stages: start near the cost scale and halve down to the target.
    let mut stages = vec![opts.epsilon];
    if opts.eps_scaling {
        let probe_rows = n.min(64);
        let mut max_cost = 0.0f64;
        for i in (0..n).step_by((n / probe_rows).max(1)) {
            for j in 0..m {
                max_cost = max_cost.max(prob.cost(i, j));
            }
        }
        let mut eps = max_cost * 0.25;
        while eps > opts.epsilon * 1.5 {
            stages.push(eps);
            eps *= 0.5;
        }
        stages.reverse(); // largest first, target last
    }

    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let mut u = vec![1.0f64; n];
    let mut v = vec![1.0f64; m];
    let mut kernel = vec![0.0f64; n * m];
    let mut kv = vec![0.0f64; n];
    let mut ktu = vec![0.0f64; m];

    let mut iterations = 0usize;
    let mut marginal_error = f64::INFINITY;
    let mut converged = false;

    let absorb = |f: &mut [f64], g: &mut [f64], u: &mut [f64], v: &mut [f64], eps: f64| {
        for (fi, ui) in f.iter_mut().zip(u.iter_mut()) {
            *fi += eps * ui.ln();
            *ui = 1.0;
        }
        for (gj, vj) in g.iter_mut().zip(v.iter_mut()) {
            *gj += eps * vj.ln();
            *vj = 1.0;
        }
    };

    let last_stage = stages.len() - 1;
    'stages: for (si, &eps) in stages.iter().enumerate() {
        absorb(&mut f, &mut g, &mut u, &mut v, if si == 0 { eps } else { stages[si - 1] });
        prob.fill_kernel(&mut kernel, &f, &g, eps);
        let stage_budget = if si == last_stage {
            opts.max_iter.saturating_sub(iterations).max(1)
        } else {
            30.min(opts.max_iter.saturating_sub(iterations))
        };
        for it in 0..stage_budget {
            // Fused u and v updates: one pass over the kernel instead of two
            // (the iteration is memory-bound at these sizes).
            ktu.iter_mut().for_each(|t| *t = 0.0);
            for i in 0..n {
                let row = &kernel[i * m..(i + 1) * m];
                let s: f64 = row.iter().zip(&v).map(|(k, vj)| k * vj).sum();
                kv[i] = s;
                let ui = a[i] / s.max(1e-300);
                u[i] = ui;
                for (t, k) in ktu.iter_mut().zip(row) {
                    *t += k * ui;
                }
            }
            for j in 0..m {
                v[j] = b[j] / ktu[j].max(1e-300);
            }
            iterations += 1;

            let extreme = u
                .iter()
                .chain(v.iter())
                .fold(1.0f64, |acc, &t| acc.max(t).max(1.0 / t.max(1e-300)));
            if extreme > 1e30 {
                absorb(&mut f, &mut g, &mut u, &mut v, eps);
                prob.fill_kernel(&mut kernel, &f, &g, eps);
                continue;
            }

            if si == last_stage && (it % 8 == 7 || iterations >= opts.max_iter) {
                // Column marginals are exact right after the v update; the
                // error lives on the rows.
                let mut err = 0.0;
                for i in 0..n {
                    let row = &kernel[i * m..(i + 1) * m];
                    let s: f64 = row.iter().zip(&v).map(|(k, vj)| k * vj).sum();
                    err += (u[i] * s - a[i]).abs();
                }
                marginal_error = err;
                if err <= opts.tol {
                    converged = true;
                    break 'stages;
                }
            }
            if iterations >= opts.max_iter {
                break 'stages;
            }
        }
    }

    if !marginal_error.is_finite() {
        let mut err = 0.0;
        for i in 0..n {
            let row = &kernel[i * m..(i + 1) * m];
            let s: f64 = row.iter().zip(&v).map(|(k, vj)| k * vj).sum();
            err += (u[i] * s - a[i]).abs();
        }
        marginal_error = err;
    }

    // Round to the feasible polytope: scale rows down to their targets, then
    // columns, then add the rank-one residual completion.
    let mut alpha = vec![0.0f64; n];
    for i in 0..n {
        let row = &kernel[i * m..(i + 1) * m];
        let s: f64 = row.iter().zip(&v).map(|(k, vj)| k * vj).sum();
        let r = u[i] * s;
        alpha[i] = if r > 0.0 { (a[i] / r).min(1.0) } else { 0.0 };
        kv[i] = s;
    }
    let mut beta = vec![0.0f64; m];
    ktu.iter_mut().for_each(|t| *t = 0.0);
    for i in 0..n {
        let row = &kernel[i * m..(i + 1) * m];
        let scale = alpha[i] * u[i];
        for (t, (k, vj)) in ktu.iter_mut().zip(row.iter().zip(&v)) {
            *t += scale * k * vj;
        }
    }
    for j in 0..m {
        beta[j] = if ktu[j] > 0.0 {
            (b[j] / ktu[j]).min(1.0)
        } else {
            0.0
        };
    }
    // Residual masses.
    let mut err_a = vec![0.0f64; n];
    let mut err_b = vec![0.0f64; m];
    for j in 0..m {
        err_b[j] = b[j] - beta[j] * ktu[j];
    }
    let mut value = 0.0f64;
    let mut row_rank = 0.0f64; // sum_i err_a_i * (sum_j err_b_j c_ij) accumulated later
    let mut plan = if opts.keep_plan {
        Some(vec![0.0f64; n * m])
    } else {
        None
    };
    for i in 0..n {
        let row = &kernel[i * m..(i + 1) * m];
        let scale = alpha[i] * u[i];
        let mut row_mass = 0.0;
        let mut row_cost = 0.0;
        let mut rank_dot = 0.0;
        for j in 0..m {
            let c = prob.cost(i, j);
            let w = scale * row[j] * v[j] * beta[j];
            row_mass += w;
            row_cost += w * c;
            rank_dot += err_b[j] * c;
            if let Some(pl) = plan.as_mut() {
                pl[i * m + j] = w;
            }
        }
        err_a[i] = (a[i] - row_mass).max(0.0);
        value += row_cost;
        row_rank += err_a[i] * rank_dot;
    }
    let missing: f64 = err_a.iter().sum();
    if missing > 1e-300 {
        value += row_rank / missing;
        if let Some(pl) = plan.as_mut() {
            for i in 0..n {
                for j in 0..m {
                    pl[i * m + j] += err_a[i] * err_b[j] / missing;
                }
            }
        }
    }

    let plan = plan.map(|entries| TransportPlan {
        pairing: Pairing::Coupling {
            matrix: CouplingMatrix {
                rows: n,
                cols: m,
                entries,
            },
        },
        cost: value,
        method: Method::Entropic,
        p,
    });

    Ok(EntropicSolution {
        value,
        plan,
        converged,
        marginal_error,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::super::wasserstein_assignment;
    use super::*;
    use crate::measures::AnalyticMeasure;
    use crate::measures::MeasureKind;

    fn uniform_cloud(n: usize, seed: u64, d: usize) -> EmpiricalMeasure {
        AnalyticMeasure::new(MeasureKind::UniformUnit, d)
            .sample(n, seed)
            .unwrap()
    }

    #[test]
    fn single_points_exact_for_any_epsilon() {
        let x = EmpiricalMeasure::from_points(vec![vec![0.0, 0.0]]).unwrap();
        let y = EmpiricalMeasure::from_points(vec![vec![3.0, 4.0]]).unwrap();
        for eps in [1.0, 0.1, 1e-3] {
            let sol = wasserstein_entropic(&x, &y, 1.0, eps, 100).unwrap();
            assert!((sol.value - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_clouds_value_near_zero() {
        let x = uniform_cloud(32, 9, 2);
        // Median pairwise cost is O(0.5); epsilon at one thousandth of it.
        let sol = wasserstein_entropic(&x, &x, 2.0, 5e-4, 2000).unwrap();
        assert!(sol.value >= 0.0);
        assert!(sol.value <= 5e-3, "value {} too large", sol.value);
    }

    #[test]
    fn rounded_value_upper_bounds_exact_and_tightens() {
        let x = uniform_cloud(48, 1, 2);
        let y = uniform_cloud(48, 2, 2);
        let (exact, _) = wasserstein_assignment(&x, &y, 2.0, None).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let sol = wasserstein_entropic(&x, &y, 2.0, eps, 4000).unwrap();
            assert!(
                sol.value >= exact - 1e-9,
                "entropic {} below exact {}",
                sol.value,
                exact
            );
            // Tightening is monotone up to solver noise.
            assert!(sol.value <= prev + 1e-6);
            prev = sol.value;
        }
        assert!(prev <= exact * 1.05 + 1e-9);
    }

    #[test]
    fn plan_is_feasible() {
        let x = uniform_cloud(16, 3, 1);
        let y = uniform_cloud(24, 4, 1);
        let sol = wasserstein_entropic(&x, &y, 1.0, 1e-2, 2000).unwrap();
        let plan = sol.plan.unwrap();
        assert!(plan.marginal_violation(&x, &y) < 1e-9);
        assert!((plan.reevaluate_cost(&x, &y) - sol.value).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let x = uniform_cloud(4, 5, 1);
        assert!(matches!(
            wasserstein_entropic(&x, &x, 1.0, 0.0, 10),
            Err(TransportError::BadEpsilon(_))
        ));
    }
}
