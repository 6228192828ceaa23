//! Adaptive Gauss–Kronrod quadrature on finite intervals, plus fixed-order
//! Gauss–Legendre rules for smooth tensor-product integrals.

/// Kronrod-15 abscissae on `[-1, 1]` (positive half; the rule is symmetric).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];

/// Kronrod-15 weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss-7 weights for the embedded rule (abscissae `XGK[1], XGK[3], XGK[5], XGK[7]`).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss–Kronrod 15(7) panel over `[a, b]`.
///
/// Returns the K15 estimate and `|K15 - G7|` as the local error proxy.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;

    for i in 0..7 {
        let dx = half * XGK[i];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive quadrature of `f` over the finite interval `[a, b]`.
///
/// Globally adaptive: panels live in a worst-error heap and the worst one is
/// bisected until the summed error proxy drops below `rel_tol` times the
/// running integral (or a panel budget is exhausted, which is plenty for the
/// integrable endpoint singularities this crate meets).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    if a == b {
        return 0.0;
    }

    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }
    impl PartialEq for Panel {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err
        }
    }
    impl Eq for Panel {}
    impl PartialOrd for Panel {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Panel {
        fn cmp(&self, other: &Self) -> Ordering {
            self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
        }
    }

    const MAX_PANELS: usize = 20_000;
    let mut heap = BinaryHeap::new();
    let mut accepted: Vec<f64> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    heap.push(Panel {
        a,
        b,
        value: v,
        err: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut panels = 1usize;
    while total_err > rel_tol * total.abs().max(1e-300) && panels < MAX_PANELS {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let width = worst.b - worst.a;
        if width < 1e-15 * (worst.a.abs() + worst.b.abs() + 1.0) || worst.err == 0.0 {
            // Cannot refine further; accept this panel as-is.
            total_err -= worst.err;
            accepted.push(worst.value);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        panels += 1;
    }
    // Re-sum for a stable final value.
    accepted.into_iter().sum::<f64>() + heap.into_iter().map(|p| p.value).sum::<f64>()
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Computed by Newton iteration on the Legendre recurrence; accurate to
/// machine precision for the moderate orders used here (`n <= 256`).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    if n == 1 {
        return vec![(0.0, 2.0)];
    }
    let m = n.div_ceil(2);
    let mut half = Vec::with_capacity(m);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th positive-side root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and its derivative by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        half.push((x, w));
    }
    let mut full: Vec<(f64, f64)> = half.iter().map(|&(x, w)| (-x, w)).collect();
    let center = n % 2 == 1;
    for (j, &(x, w)) in half.iter().enumerate().rev() {
        if center && j == m - 1 {
            continue; // the x = 0 node was already emitted once
        }
        full.push((x, w));
    }
    full
}

/// Integrate a smooth `f` over `[a, b]` with a fixed `n`-point Gauss–Legendre rule.
pub fn gl_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| w * f(center + half * x))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|t| 3.0 * t * t, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_one_minus_t() {
        // ∫_0^1 sqrt(1-t) dt = 2/3
        let v = integrate(|t| (1.0 - t).max(0.0).sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn gl_matches_adaptive_on_smooth() {
        let a = integrate(|t| t.sin() * (-t).exp(), 0.0, 3.0, 1e-12);
        let b = gl_integrate(|t| t.sin() * (-t).exp(), 0.0, 3.0, 64);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gl_nodes_sum_weights() {
        for n in [1, 2, 5, 16, 33, 96] {
            let nodes = gauss_legendre(n);
            assert_eq!(nodes.len(), n);
            let wsum: f64 = nodes.iter().map(|&(_, w)| w).sum();
            assert!((wsum - 2.0).abs() < 1e-12, "n={n} wsum={wsum}");
        }
    }
}
