//! Cross-module invariant suite, runnable as one batch (`verify` in the
//! CLI). Each group bundles the properties its module promises; checks are
//! seeded and desk-scale.

use serde::{Deserialize, Serialize};

use crate::experiments::{self, ConfigStatistic, EstimatorKind, ExperimentConfig, SolverConfig};
use crate::measures::{parse_spec, AnalyticMeasure, EmpiricalMeasure};
use crate::multiscale::{self, block_index, cell_key};
use crate::theory::{self, MomentKind, ProblemParams, Q, Statistic};
use crate::transport;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupResult {
    pub group: String,
    pub checks: Vec<CheckResult>,
}

impl GroupResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn all_passed(groups: &[GroupResult]) -> bool {
    groups.iter().all(|g| g.passed())
}

/// Run the invariant groups, optionally filtered by group name.
pub fn run_groups(filter: Option<&str>, seed: u64) -> Vec<GroupResult> {
    let all: Vec<(&str, fn(u64) -> Vec<CheckResult>)> = vec![
        ("measures", measures_group),
        ("transport", transport_group),
        ("multiscale", multiscale_group),
        ("theory", theory_group),
        ("experiments", experiments_group),
    ];
    all.into_iter()
        .filter(|(name, _)| filter.is_none_or(|f| f == *name))
        .map(|(name, run)| GroupResult {
            group: name.to_string(),
            checks: run(seed),
        })
        .collect()
}

fn check(name: &str, outcome: Result<(), String>) -> CheckResult {
    match outcome {
        Ok(()) => CheckResult {
            name: name.to_string(),
            passed: true,
            detail: String::new(),
        },
        Err(detail) => CheckResult {
            name: name.to_string(),
            passed: false,
            detail,
        },
    }
}

fn catalog() -> Vec<AnalyticMeasure> {
    [
        "uniform:d=1",
        "uniform:d=2",
        "uniform_sym:d=2",
        "pareto:beta=1.5,d=1",
        "pareto:beta=3,d=1",
        "pareto_prod:beta=2.5,d=2",
        "dirac:d=1,at=-0.5",
    ]
    .iter()
    .map(|s| parse_spec(s).unwrap())
    .collect()
}

// ----------------------------------------------------------------------
// measures
// ----------------------------------------------------------------------

fn measures_group(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("moment-ordering", {
        let mut r = Ok(());
        'outer: for m in catalog() {
            let qs = [1.0, 1.2, 1.5, 2.0, 2.4, 3.0, 4.0];
            for win in qs.windows(2) {
                let (q1, q2) = (win[0], win[1]);
                if m.strong_moment(q2).is_finite() && !m.strong_moment(q1).is_finite() {
                    r = Err(format!(
                        "{}: strong moment finite at q={q2} but not q={q1}",
                        m.spec()
                    ));
                    break 'outer;
                }
            }
            for &q in &qs {
                let weak = m.weak_moment(q).powf(1.0 / q);
                let strong = m.strong_moment(q).powf(1.0 / q);
                if weak > strong * (1.0 + 1e-9) + 1e-12 {
                    r = Err(format!(
                        "{}: weak norm {weak} exceeds strong norm {strong} at q={q}",
                        m.spec()
                    ));
                    break 'outer;
                }
            }
        }
        r
    }));

    out.push(check("empirical-tail-matches-H", {
        let mut r = Ok(());
        'outer: for m in catalog() {
            if m.spec().starts_with("dirac") {
                continue;
            }
            let n = 100_000;
            let sample = m.sample(n, seed ^ 0x7a11).unwrap();
            for i in 1..=10 {
                let t = 0.3 * i as f64;
                let h = m.tail(t);
                let frac = sample
                    .points_iter()
                    .filter(|p| p.iter().cloned().fold(0.0f64, |a, c| a.max(c.abs())) > t)
                    .count() as f64
                    / n as f64;
                let se = (h * (1.0 - h) / n as f64).sqrt().max(1e-6);
                if (frac - h).abs() > 4.0 * se {
                    r = Err(format!(
                        "{}: empirical tail {frac} vs H({t}) = {h} (4se = {})",
                        m.spec(),
                        4.0 * se
                    ));
                    break 'outer;
                }
            }
        }
        r
    }));

    out.push(check("cell-refinement-consistency", {
        let mut r = Ok(());
        'outer: for m in catalog() {
            let d = m.dim();
            let lmax = if d >= 3 { 4u32 } else { 6 };
            for block in 0..=6u32 {
                let level0 = m.cell_mass(block, 0, &vec![0u64; d]);
                for level in 1..=lmax {
                    let cells = 1u64 << level;
                    let mut idx = vec![0u64; d];
                    let mut sum = 0.0;
                    'cells: loop {
                        sum += m.cell_mass(block, level, &idx);
                        for c in 0..d {
                            idx[c] += 1;
                            if idx[c] < cells {
                                continue 'cells;
                            }
                            idx[c] = 0;
                        }
                        break;
                    }
                    if (sum - level0).abs() > 1e-10 {
                        r = Err(format!(
                            "{}: level {level} cells sum to {sum}, block mass {level0} (m={block})",
                            m.spec()
                        ));
                        break 'outer;
                    }
                }
            }
        }
        r
    }));

    out.push(check("block-masses-telescope", {
        let mut r = Ok(());
        for m in catalog() {
            let total: f64 = (0..=10u32).map(|b| m.block_mass(b)).sum();
            let rem = m.tail(1024.0);
            if (total + rem - 1.0).abs() > 1e-10 {
                r = Err(format!("{}: {total} + tail {rem} != 1", m.spec()));
                break;
            }
        }
        r
    }));

    out
}

// ----------------------------------------------------------------------
// transport
// ----------------------------------------------------------------------

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> EmpiricalMeasure {
    let coords: Vec<f64> = (0..n * d).map(|_| (rng.gen::<f64>() - 0.3) * spread).collect();
    EmpiricalMeasure::from_flat(coords, d).unwrap()
}

fn transport_group(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7447);

    out.push(check("metric-axioms", {
        let mut r = Ok(());
        for trial in 0..100 {
            let n = 4 + (trial % 12);
            let p = if trial % 2 == 0 { 1.0 } else { 2.0 };
            let a = random_cloud(&mut rng, n, 2, 2.0);
            let b = random_cloud(&mut rng, n, 2, 2.0);
            let c = random_cloud(&mut rng, n, 2, 2.0);
            let w = |x: &EmpiricalMeasure, y: &EmpiricalMeasure| {
                transport::wasserstein_assignment(x, y, p, None)
                    .unwrap()
                    .0
                    .powf(1.0 / p)
            };
            let (ab, ba, aa) = (w(&a, &b), w(&b, &a), w(&a, &a));
            if (ab - ba).abs() > 1e-12 {
                r = Err(format!("symmetry violated: {ab} vs {ba}"));
                break;
            }
            if aa != 0.0 {
                r = Err(format!("W(a,a) = {aa} != 0"));
                break;
            }
            let (ac, bc) = (w(&a, &c), w(&b, &c));
            if ac > ab + bc + 1e-9 {
                r = Err(format!("triangle violated: {ac} > {ab} + {bc}"));
                break;
            }
        }
        r
    }));

    out.push(check("scaling-and-translation", {
        let mut r = Ok(());
        for trial in 0..50 {
            let n = 3 + (trial % 10);
            let p = [1.0, 1.5, 2.0][trial % 3];
            let a = random_cloud(&mut rng, n, 2, 2.0);
            let b = random_cloud(&mut rng, n, 2, 2.0);
            let (base, _) = transport::wasserstein_assignment(&a, &b, p, None).unwrap();
            let lambda = 0.25 + rng.gen::<f64>() * 3.0;
            let (scaled, _) = transport::wasserstein_assignment(
                &a.affine(lambda, &[0.0, 0.0]),
                &b.affine(lambda, &[0.0, 0.0]),
                p,
                None,
            )
            .unwrap();
            let expect = lambda.powf(p) * base;
            if (scaled - expect).abs() > 1e-10 * expect.max(1e-12) {
                r = Err(format!("scaling: {scaled} vs {expect}"));
                break;
            }
            let shift = [rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0];
            let (moved, _) = transport::wasserstein_assignment(
                &a.affine(1.0, &shift),
                &b.affine(1.0, &shift),
                p,
                None,
            )
            .unwrap();
            if (moved - base).abs() > 1e-10 * base.max(1e-12) {
                r = Err(format!("translation: {moved} vs {base}"));
                break;
            }
        }
        r
    }));

    out.push(check("onedim-assignment-equivalence", {
        let mut r = Ok(());
        for trial in 0..60 {
            let n = 2 + (trial % 32);
            let p = [1.0, 2.0, 3.0][trial % 3];
            let a = random_cloud(&mut rng, n, 1, 4.0);
            let b = random_cloud(&mut rng, n, 1, 4.0);
            let (v1, _) = transport::wasserstein_1d(&a, &b, p).unwrap();
            let (v2, _) = transport::wasserstein_assignment(&a, &b, p, None).unwrap();
            if (v1 - v2).abs() > 1e-10 * v1.abs().max(1e-12) {
                r = Err(format!("n={n} p={p}: 1d {v1} vs assignment {v2}"));
                break;
            }
        }
        r
    }));

    out.push(check("entropic-upper-bounds-exact", {
        let mut r = Ok(());
        for trial in 0..12 {
            let n = 8 + 4 * (trial % 4);
            let a = random_cloud(&mut rng, n, 2, 1.0);
            let b = random_cloud(&mut rng, n, 2, 1.0);
            let (exact, _) = transport::wasserstein_assignment(&a, &b, 2.0, None).unwrap();
            let med = transport::median_pair_cost(&a, &b, 2.0);
            let sol = transport::wasserstein_entropic(&a, &b, 2.0, 0.05 * med, 2000).unwrap();
            if sol.value < exact - 1e-9 {
                r = Err(format!("entropic {} below exact {exact}", sol.value));
                break;
            }
        }
        r
    }));

    out.push(check("dual-bound-below-distance", {
        let mut r = Ok(());
        let mu = parse_spec("uniform:d=1").unwrap();
        for trial in 0..100u64 {
            let n = 1 + (trial as usize % 24);
            let x = random_cloud(&mut rng, n, 1, 1.0);
            let bound = transport::dual_lipschitz_lower_bound(&x, &mu).unwrap();
            let (w1, _) =
                transport::semidiscrete_wp(&x, &mu, 1.0, 2, seed ^ trial, &Default::default())
                    .unwrap();
            if bound > w1 + 1e-9 {
                r = Err(format!("dual bound {bound} exceeds W_1 {w1}"));
                break;
            }
        }
        r
    }));

    out
}

// ----------------------------------------------------------------------
// multiscale
// ----------------------------------------------------------------------

fn multiscale_group(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mu2 = parse_spec("uniform:d=2").unwrap();
    let pareto = parse_spec("pareto:beta=2.5,d=1").unwrap();

    out.push(check("partition-of-unity", {
        let mut r = Ok(());
        let sample = mu2.sample(500, seed ^ 0x90F).unwrap();
        let profile = multiscale::delta_profile(&sample, &mu2, 1.0, 3, 5, None).unwrap();
        'outer: for b in &profile.per_block {
            // Independent recount straight from the points.
            for level in 0..=5u32 {
                let mut counts = std::collections::BTreeMap::new();
                let mut in_block = 0u64;
                for pt in sample.points_iter() {
                    if block_index(pt) == b.m {
                        in_block += 1;
                        *counts.entry(cell_key(pt, b.m, level).cell).or_insert(0u64) += 1;
                    }
                }
                let total: u64 = counts.values().sum();
                if total != in_block || in_block != b.sample_count {
                    r = Err(format!(
                        "m={} level={level}: cells {total}, block {in_block}, profile {}",
                        b.m, b.sample_count
                    ));
                    break 'outer;
                }
            }
        }
        r
    }));

    out.push(check("refinement-monotonicity", {
        let mut r = Ok(());
        for (m, n) in [(&mu2, 400usize), (&pareto, 300)] {
            let sample = m.sample(n, seed ^ 0xF00).unwrap();
            let profile = multiscale::delta_profile(&sample, m, 1.0, 6, 6, None).unwrap();
            for b in &profile.per_block {
                for w in b.level_sums.windows(2) {
                    if w[1] < w[0] - 1e-12 {
                        r = Err(format!(
                            "{}: block {} has S decreasing {} -> {}",
                            m.spec(),
                            b.m,
                            w[0],
                            w[1]
                        ));
                    }
                }
            }
        }
        r
    }));

    out.push(check("permutation-invariance", {
        let sample = mu2.sample(200, seed ^ 0x9e3).unwrap();
        let profile = multiscale::delta_profile(&sample, &mu2, 1.0, 3, 6, None).unwrap();
        let mut perm: Vec<Vec<f64>> = sample.points_iter().map(|p| p.to_vec()).collect();
        perm.reverse();
        let shuffled = EmpiricalMeasure::from_points(perm).unwrap();
        let profile2 = multiscale::delta_profile(&shuffled, &mu2, 1.0, 3, 6, None).unwrap();
        if (profile.delta_p - profile2.delta_p).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(format!(
                "delta changed under permutation: {} vs {}",
                profile.delta_p, profile2.delta_p
            ))
        }
    }));

    out.push(check("truncation-soundness", {
        let mut r = Ok(());
        for (m, n) in [(&mu2, 300usize), (&pareto, 300)] {
            let sample = m.sample(n, seed ^ 0x717).unwrap();
            let coarse = multiscale::delta_profile(&sample, m, 1.0, 4, 4, None).unwrap();
            let fine = multiscale::delta_profile(&sample, m, 1.0, 6, 6, None).unwrap();
            let grown = fine.delta_p - coarse.delta_p;
            if grown > coarse.tail_bound + 1e-12 {
                r = Err(format!(
                    "{}: refinement grew delta by {grown}, tail bound {}",
                    m.spec(),
                    coarse.tail_bound
                ));
            }
        }
        r
    }));

    out.push(check("domination-and-split", {
        let mut r = Ok(());
        for (m, n, p) in [(&mu2, 250usize, 1.0), (&pareto, 250, 2.0)] {
            let sample = m.sample(n, seed ^ 0x591).unwrap();
            for cube in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let profile = multiscale::delta_profile(&sample, m, p, 6, 5, Some(cube)).unwrap();
                let c = profile.domination_constant();
                if profile.d_p > c * profile.delta_p + profile.tail_bound + 1e-12 {
                    r = Err(format!(
                        "{}: D_p {} exceeds {c} * delta {} + tail",
                        m.spec(),
                        profile.d_p,
                        profile.delta_p
                    ));
                }
                let split = profile.split.unwrap();
                if profile.delta_p > split.a_pm + split.b_pm + 1e-12 {
                    r = Err(format!(
                        "{}: delta {} exceeds A+B = {} at M={cube}",
                        m.spec(),
                        profile.delta_p,
                        split.a_pm + split.b_pm
                    ));
                }
            }
        }
        r
    }));

    out
}

// ----------------------------------------------------------------------
// theory
// ----------------------------------------------------------------------

fn theory_group(_seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("classify-monotone-in-p", {
        let mut r = Ok(());
        'outer: for d in 1..=5u32 {
            for (rn, rd) in [(6i64, 5i64), (3, 2), (2, 1), (3, 1)] {
                let mut last = 2i32;
                for pn in 2..=10i64 {
                    let params =
                        ProblemParams::new(Q::new(pn, 2), d, Q::new(rn, rd), MomentKind::Strong)
                            .unwrap();
                    let regime = match theory::classify(&params) {
                        theory::Regime::LargeDim => 2,
                        theory::Regime::Boundary => 1,
                        theory::Regime::SmallDim => 0,
                    };
                    if regime > last {
                        r = Err(format!("regime moved backwards at p={pn}/2 d={d}"));
                        break 'outer;
                    }
                    last = regime;
                }
            }
        }
        r
    }));

    out.push(check("boundary-continuity", {
        let mut r = Ok(());
        for (d, rn, rd) in [(3u32, 3i64, 2i64), (4, 4, 3), (5, 3, 2)] {
            let rr = Q::new(rn, rd);
            let p = Q::new(d as i64, 1) * (rr - Q::new(1, 1)) / rr;
            if p < Q::new(1, 1) {
                continue;
            }
            let small = -(rr - Q::new(1, 1)) / rr;
            let large = -p / Q::new(d as i64, 1);
            if small != large {
                r = Err(format!("exponents differ at boundary d={d} r={rn}/{rd}"));
            }
        }
        r
    }));

    out.push(check("moment-exponents-negative", {
        let mut r = Ok(());
        'outer: for d in 1..=4u32 {
            for (pn, pd) in [(1i64, 1i64), (3, 2), (2, 1)] {
                for (rn, rd) in [(5i64, 4i64), (3, 2), (2, 1), (3, 1)] {
                    let params =
                        ProblemParams::new(Q::new(pn, pd), d, Q::new(rn, rd), MomentKind::Strong)
                            .unwrap();
                    for s in [
                        Statistic::Mean,
                        Statistic::SecondMoment,
                        Statistic::RMoment,
                        Statistic::AsRate,
                        Statistic::LilRate,
                    ] {
                        if let Ok(pred) = theory::moment_rate(&params, s) {
                            if pred.exponent >= Q::new(0, 1) {
                                r = Err(format!("non-negative exponent for {s:?}"));
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        r
    }));

    out.push(check("deviation-bound-monotone", {
        let mut r = Ok(());
        'outer: for (pn, d, rn, rd) in
            [(1i64, 1u32, 3i64, 2i64), (1, 4, 3, 2), (1, 1, 3, 1), (2, 4, 3, 1)]
        {
            let params =
                ProblemParams::new(Q::new(pn, 1), d, Q::new(rn, rd), MomentKind::Weak).unwrap();
            let boundary = theory::classify(&params) == theory::Regime::Boundary;
            let mut last = f64::INFINITY;
            for k in 5..18 {
                let v = theory::deviation_bound(&params, 1 << k, 0.2).unwrap();
                if v > last + 1e-15 {
                    r = Err(format!("not monotone in n at p={pn} d={d}"));
                    break 'outer;
                }
                last = v;
            }
            if !boundary {
                let mut last = f64::INFINITY;
                for i in 1..60 {
                    let v = theory::deviation_bound(&params, 4096, 0.02 * i as f64).unwrap();
                    if v > last + 1e-15 {
                        r = Err(format!("not monotone in x at p={pn} d={d}"));
                        break 'outer;
                    }
                    last = v;
                }
            }
        }
        r
    }));

    out
}

// ----------------------------------------------------------------------
// experiments
// ----------------------------------------------------------------------

fn tiny_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        measure: "uniform:d=1".into(),
        p: "1".into(),
        r: "3/2".into(),
        moment_kind: MomentKind::Weak,
        statistic: ConfigStatistic::Mean,
        n_grid: vec![32, 64, 128, 256],
        replicates: 25,
        estimator: EstimatorKind::Exact1d,
        seed,
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

fn experiments_group(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("full-determinism", {
        let config = tiny_config(seed ^ 0xDE7);
        let (a, _) = experiments::run_moment_rate(&config).unwrap();
        let (b, _) = experiments::run_moment_rate(&config).unwrap();
        if a.deterministic_json() == b.deterministic_json() {
            Ok(())
        } else {
            Err("re-running an identical config changed the report".into())
        }
    }));

    out.push(check("replicate-order-independence", {
        let config = tiny_config(seed ^ 0x0D0);
        let measure = config.measure_parsed().unwrap();
        let vals_fwd: Vec<f64> = (0..config.replicates)
            .map(|j| lane_value(&config, &measure, j))
            .collect();
        let mut vals_rev: Vec<f64> = (0..config.replicates)
            .rev()
            .map(|j| lane_value(&config, &measure, j))
            .collect();
        vals_rev.reverse();
        if vals_fwd == vals_rev {
            Ok(())
        } else {
            Err("replicate values changed with evaluation order".into())
        }
    }));

    out.push(check("estimator-consistency-1d", {
        let mut two = tiny_config(seed ^ 0xE57);
        two.estimator = EstimatorKind::TwoSample;
        two.replicates = 30;
        let mut semi = two.clone();
        semi.estimator = EstimatorKind::Semidiscrete;
        let (ra, _) = experiments::run_moment_rate(&two).unwrap();
        let (rb, _) = experiments::run_moment_rate(&semi).unwrap();
        match (ra.fit, rb.fit) {
            (Some(fa), Some(fb)) => {
                let gap = (fa.slope - fb.slope).abs();
                let band = 2.0 * (fa.slope_stderr + fb.slope_stderr) + 0.1;
                if gap <= band {
                    Ok(())
                } else {
                    Err(format!(
                        "slopes {:.3} vs {:.3} differ beyond {band:.3}",
                        fa.slope, fb.slope
                    ))
                }
            }
            _ => Err("missing fits".into()),
        }
    }));

    out.push(check("monotone-work-accounting", {
        let config = tiny_config(seed ^ 0x3AD);
        let (report, _) = experiments::run_moment_rate(&config).unwrap();
        let mono = report
            .per_n
            .windows(2)
            .all(|w| w[0].work_units <= w[1].work_units);
        if mono {
            Ok(())
        } else {
            Err("work units not monotone on the exact path".into())
        }
    }));

    out
}

fn lane_value(config: &ExperimentConfig, measure: &AnalyticMeasure, j: u32) -> f64 {
    let p = theory::ratio_to_f64(config.p_ratio().unwrap());
    let seed = experiments::lane_seed(config.seed, 1, j);
    let sample = measure.sample_stream(64, seed, 0).unwrap();
    transport::semidiscrete_wp(&sample, measure, p, 2, seed, &Default::default())
        .unwrap()
        .0
}
