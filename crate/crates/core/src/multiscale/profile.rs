//! Evaluation of the multiscale functionals on truncated ranges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{block_index, cell_key, pow2};
use super::MultiscaleError;
use crate::measures::{AnalyticMeasure, EmpiricalMeasure};
use crate::stats::pairwise_sum;

/// The reference side of a discrepancy: either a catalog measure with exact
/// cell masses, or a second empirical cloud (two-sample form, also exact).
pub enum Reference<'a> {
    Analytic(&'a AnalyticMeasure),
    Empirical(&'a EmpiricalMeasure),
}

impl Reference<'_> {
    fn dim(&self) -> usize {
        match self {
            Reference::Analytic(m) => m.dim(),
            Reference::Empirical(m) => m.dim(),
        }
    }
}

/// Per-block pieces of the profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockProfile {
    pub m: u32,
    /// `|mu_n(B_m) - nu(B_m)|`.
    pub block_discrepancy: f64,
    pub sample_mass: f64,
    pub reference_mass: f64,
    /// Number of sample points falling in this block.
    pub sample_count: u64,
    /// Cell-discrepancy sums `S(m, l)` for `l = 0..=level_max`.
    pub level_sums: Vec<f64>,
}

/// The cube-truncated split for a stored `M`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncatedSplit {
    pub cube: f64,
    /// Contribution of masses restricted to `[-M, M]^d`.
    pub a_pm: f64,
    /// Contribution of masses restricted to the complement.
    pub b_pm: f64,
}

/// Per-`(m, level)` discrepancies and the aggregated functionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiscaleProfile {
    pub p: f64,
    pub m_max: u32,
    pub level_max: u32,
    pub per_block: Vec<BlockProfile>,
    /// Truncated flat triple sum.
    pub delta_p: f64,
    /// Truncated block-normalized two-level functional.
    pub d_p: f64,
    /// `A_{p,M}`/`B_{p,M}` when a truncation cube was supplied.
    pub split: Option<TruncatedSplit>,
    /// Upper bound on everything the `(m_max, level_max)` truncation omits
    /// from `delta_p`; may be `+inf` when the reference lacks a finite
    /// moment of order `p`.
    pub tail_bound: f64,
}

impl MultiscaleProfile {
    /// The constant of the domination `D_p <= max(3/2, (2^p - 1)/2) Delta_p`.
    pub fn domination_constant(&self) -> f64 {
        domination_constant(self.p)
    }
}

pub fn domination_constant(p: f64) -> f64 {
    (1.5f64).max((f64::exp2(p) - 1.0) / 2.0)
}

/// Default block truncation: smallest `m` with `H(2^{m-1}) <= 1e-6`, capped.
pub fn default_m_max(reference: &AnalyticMeasure, _p: f64) -> u32 {
    for m in 0..=40u32 {
        let t = pow2(m as i32 - 1);
        if reference.tail(t) <= 1e-6 {
            return m;
        }
    }
    40
}

/// Default refinement depth by dimension (cell counts `2^{dl}` bound memory).
pub fn default_level_max(dim: usize) -> u32 {
    match dim {
        1 | 2 => 10,
        3 => 6,
        _ => 4,
    }
}

/// `Delta_p` (and everything else in the profile) for a sample against a
/// catalog reference. Supplying `cube = Some(M)` also fills the
/// `A_{p,M}`/`B_{p,M}` split.
pub fn delta_profile(
    sample: &EmpiricalMeasure,
    reference: &AnalyticMeasure,
    p: f64,
    m_max: u32,
    level_max: u32,
    cube: Option<f64>,
) -> Result<MultiscaleProfile, MultiscaleError> {
    profile_impl(sample, &Reference::Analytic(reference), p, m_max, level_max, cube)
}

/// Two-sample form: both sides empirical, everything exact.
pub fn delta_profile_two_sample(
    sample: &EmpiricalMeasure,
    other: &EmpiricalMeasure,
    p: f64,
    m_max: u32,
    level_max: u32,
    cube: Option<f64>,
) -> Result<MultiscaleProfile, MultiscaleError> {
    profile_impl(sample, &Reference::Empirical(other), p, m_max, level_max, cube)
}

/// The two-level functional `D_p` with the slack implied by its domination
/// through `Delta_p`: returns `(d_p, domination_constant * tail_bound)`.
pub fn d_p_functional(
    sample: &EmpiricalMeasure,
    reference: &AnalyticMeasure,
    p: f64,
    m_max: u32,
    level_max: u32,
) -> Result<(f64, f64), MultiscaleError> {
    let profile = delta_profile(sample, reference, p, m_max, level_max, None)?;
    Ok((profile.d_p, profile.domination_constant() * profile.tail_bound))
}

// ----------------------------------------------------------------------
// Sparse per-level histograms
// ----------------------------------------------------------------------

/// Packed cell indices: `level_max` bits per coordinate in a `u128`.
fn pack(cell: &[u64], bits: u32) -> u128 {
    let mut key = 0u128;
    for (i, &c) in cell.iter().enumerate() {
        key |= (c as u128) << (i as u32 * bits);
    }
    key
}

fn unpack(key: u128, bits: u32, dim: usize) -> Vec<u64> {
    let mask = (1u128 << bits) - 1;
    (0..dim)
        .map(|i| ((key >> (i as u32 * bits)) & mask) as u64)
        .collect()
}

/// Coarsen a packed finest-level key by `shift` levels.
fn coarsen(key: u128, bits: u32, dim: usize, shift: u32) -> u128 {
    let mask = (1u128 << bits) - 1;
    let mut out = 0u128;
    for i in 0..dim {
        let c = (key >> (i as u32 * bits)) & mask;
        out |= (c >> shift) << (i as u32 * bits);
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct CellMass {
    count: u64,
    weight: f64,
}

/// One measure bucketed into dyadic cells, finest level only; coarser levels
/// are derived by shifting, never recounted.
struct Histogram {
    /// block -> (finest-level cells, block totals)
    blocks: BTreeMap<u32, BTreeMap<u128, CellMass>>,
    totals: BTreeMap<u32, CellMass>,
    /// mass in blocks beyond `m_max`
    overflow: BTreeMap<u32, CellMass>,
}

fn bucket(
    measure: &EmpiricalMeasure,
    m_max: u32,
    level_max: u32,
    bits: u32,
    filter: Option<(f64, bool)>,
) -> Histogram {
    let mut hist = Histogram {
        blocks: BTreeMap::new(),
        totals: BTreeMap::new(),
        overflow: BTreeMap::new(),
    };
    for (i, point) in measure.points_iter().enumerate() {
        if let Some((cube, inside)) = filter {
            let in_cube = point.iter().all(|c| c.abs() <= cube);
            if in_cube != inside {
                continue;
            }
        }
        let w = measure.weight(i);
        let m = block_index(point);
        if m > m_max {
            let e = hist.overflow.entry(m).or_default();
            e.count += 1;
            e.weight += w;
            continue;
        }
        let key = pack(&cell_key(point, m, level_max).cell, bits);
        let cells = hist.blocks.entry(m).or_default();
        let e = cells.entry(key).or_default();
        e.count += 1;
        e.weight += w;
        let t = hist.totals.entry(m).or_default();
        t.count += 1;
        t.weight += w;
    }
    hist
}

impl Histogram {
    /// Cells of block `m` aggregated to `level` (sums of finest weights).
    fn at_level(&self, m: u32, level: u32, level_max: u32, bits: u32, dim: usize) -> BTreeMap<u128, f64> {
        let mut out = BTreeMap::new();
        if let Some(cells) = self.blocks.get(&m) {
            let shift = level_max - level;
            for (&key, mass) in cells {
                *out.entry(coarsen(key, bits, dim, shift)).or_insert(0.0) += mass.weight;
            }
        }
        out
    }

    fn block_weight(&self, m: u32) -> f64 {
        self.totals.get(&m).map_or(0.0, |c| c.weight)
    }

    fn block_count(&self, m: u32) -> u64 {
        self.totals.get(&m).map_or(0, |c| c.count)
    }
}

// ----------------------------------------------------------------------
// Reference-side cell masses
// ----------------------------------------------------------------------

/// Uniform interface over the two reference kinds for one filter mode.
enum RefMasses<'a> {
    Analytic {
        measure: &'a AnalyticMeasure,
        filter: Option<(f64, bool)>,
    },
    Empirical(Histogram),
}

impl RefMasses<'_> {
    fn cell(&self, m: u32, level: u32, key: u128, bits: u32, dim: usize, level_max: u32) -> f64 {
        match self {
            RefMasses::Analytic { measure, filter } => {
                let cell = unpack(key, bits, dim);
                match filter {
                    None => measure.cell_mass(m, level, &cell),
                    Some((cube, inside)) => {
                        measure.cell_mass_truncated(m, level, &cell, *cube, *inside)
                    }
                }
            }
            RefMasses::Empirical(h) => {
                let _ = level_max;
                *h.at_level(m, level, level_max, bits, dim).get(&key).unwrap_or(&0.0)
            }
        }
    }

    fn at_level(
        &self,
        m: u32,
        level: u32,
        level_max: u32,
        bits: u32,
        dim: usize,
    ) -> Option<BTreeMap<u128, f64>> {
        match self {
            RefMasses::Analytic { .. } => None,
            RefMasses::Empirical(h) => Some(h.at_level(m, level, level_max, bits, dim)),
        }
    }

    fn block(&self, m: u32, dim: usize) -> f64 {
        match self {
            RefMasses::Analytic { measure, filter } => {
                let zero = vec![0u64; dim];
                match filter {
                    None => measure.cell_mass(m, 0, &zero),
                    Some((cube, inside)) => measure.cell_mass_truncated(m, 0, &zero, *cube, *inside),
                }
            }
            RefMasses::Empirical(h) => h.block_weight(m),
        }
    }
}

// ----------------------------------------------------------------------
// Core evaluation
// ----------------------------------------------------------------------

/// Sum of `|sample - reference|` over all cells of block `m` at `level`.
///
/// Only cells occupied on either side are enumerated; the reference mass of
/// the remaining cells (where the sample is zero) is `block - occupied`.
fn level_discrepancy(
    sample_cells: &BTreeMap<u128, f64>,
    refs: &RefMasses<'_>,
    ref_block: f64,
    m: u32,
    level: u32,
    level_max: u32,
    bits: u32,
    dim: usize,
) -> f64 {
    let ref_cells = refs.at_level(m, level, level_max, bits, dim);
    let mut terms: Vec<f64> = Vec::new();
    let mut ref_seen = 0.0;
    match &ref_cells {
        Some(rc) => {
            // Union of both supports; everything else is zero on both sides.
            let mut keys: Vec<u128> = sample_cells.keys().copied().collect();
            keys.extend(rc.keys().copied());
            keys.sort_unstable();
            keys.dedup();
            for key in keys {
                let s = sample_cells.get(&key).copied().unwrap_or(0.0);
                let r = rc.get(&key).copied().unwrap_or(0.0);
                terms.push((s - r).abs());
                ref_seen += r;
            }
        }
        None => {
            for (&key, &s) in sample_cells {
                let r = refs.cell(m, level, key, bits, dim, level_max);
                terms.push((s - r).abs());
                ref_seen += r;
            }
        }
    }
    pairwise_sum(&terms) + (ref_block - ref_seen).max(0.0)
}

/// Normalized discrepancy `sum_F |s/S - r/R|` used by the inner `D_p` term.
fn level_discrepancy_normalized(
    sample_cells: &BTreeMap<u128, f64>,
    sample_block: f64,
    refs: &RefMasses<'_>,
    ref_block: f64,
    m: u32,
    level: u32,
    level_max: u32,
    bits: u32,
    dim: usize,
) -> f64 {
    let ref_cells = refs.at_level(m, level, level_max, bits, dim);
    let mut terms: Vec<f64> = Vec::new();
    let mut ref_seen = 0.0;
    match &ref_cells {
        Some(rc) => {
            let mut keys: Vec<u128> = sample_cells.keys().copied().collect();
            keys.extend(rc.keys().copied());
            keys.sort_unstable();
            keys.dedup();
            for key in keys {
                let s = sample_cells.get(&key).copied().unwrap_or(0.0);
                let r = rc.get(&key).copied().unwrap_or(0.0);
                terms.push((s / sample_block - r / ref_block).abs());
                ref_seen += r;
            }
        }
        None => {
            for (&key, &s) in sample_cells {
                let r = refs.cell(m, level, key, bits, dim, level_max);
                terms.push((s / sample_block - r / ref_block).abs());
                ref_seen += r;
            }
        }
    }
    pairwise_sum(&terms) + ((ref_block - ref_seen) / ref_block).max(0.0)
}

fn profile_impl(
    sample: &EmpiricalMeasure,
    reference: &Reference<'_>,
    p: f64,
    m_max: u32,
    level_max: u32,
    cube: Option<f64>,
) -> Result<MultiscaleProfile, MultiscaleError> {
    let dim = sample.dim();
    if reference.dim() != dim {
        return Err(MultiscaleError::DimMismatch {
            sample: dim,
            reference: reference.dim(),
        });
    }
    let bits = (level_max + 1).max(1);
    if dim as u32 * bits > 120 {
        return Err(MultiscaleError::LevelCapacity { dim, level_max });
    }

    let sample_hist = bucket(sample, m_max, level_max, bits, None);
    let refs = match reference {
        Reference::Analytic(m) => RefMasses::Analytic {
            measure: m,
            filter: None,
        },
        Reference::Empirical(m) => RefMasses::Empirical(bucket(m, m_max, level_max, bits, None)),
    };

    let two_pow = |e: f64| f64::exp2(e);
    let mut per_block = Vec::with_capacity(m_max as usize + 1);
    let mut delta_terms = Vec::new();
    let mut block_terms = Vec::new();
    let mut inner_terms = Vec::new();
    for m in 0..=m_max {
        let sample_block = sample_hist.block_weight(m);
        let ref_block = refs.block(m, dim);
        let mut level_sums = Vec::with_capacity(level_max as usize + 1);
        let mut inner_sum_terms = Vec::new();
        for level in 0..=level_max {
            let cells = sample_hist.at_level(m, level, level_max, bits, dim);
            let s = level_discrepancy(&cells, &refs, ref_block, m, level, level_max, bits, dim);
            level_sums.push(s);
            if level >= 1 && sample_block > 0.0 && ref_block > 0.0 {
                let t = level_discrepancy_normalized(
                    &cells,
                    sample_block,
                    &refs,
                    ref_block,
                    m,
                    level,
                    level_max,
                    bits,
                    dim,
                );
                inner_sum_terms.push(two_pow(-p * level as f64) * t);
            }
        }
        let scale = two_pow(p * m as f64);
        delta_terms.extend(
            level_sums
                .iter()
                .enumerate()
                .map(|(l, s)| scale * two_pow(-p * l as f64) * s),
        );
        block_terms.push(scale * level_sums[0]);
        let min_block = sample_block.min(ref_block);
        if min_block > 0.0 && !inner_sum_terms.is_empty() {
            let inner = (f64::exp2(p) - 1.0) / 2.0 * pairwise_sum(&inner_sum_terms);
            inner_terms.push(scale * min_block * inner);
        }
        per_block.push(BlockProfile {
            m,
            block_discrepancy: level_sums[0],
            sample_mass: sample_block,
            reference_mass: ref_block,
            sample_count: sample_hist.block_count(m),
            level_sums,
        });
    }
    let delta_p = pairwise_sum(&delta_terms);
    let d_p = pairwise_sum(&block_terms) + pairwise_sum(&inner_terms);

    // Truncated split A_{p,M} + B_{p,M}.
    let split = match cube {
        None => None,
        Some(cube) => {
            let mut parts = [0.0f64; 2];
            for (slot, inside) in [(0usize, true), (1usize, false)] {
                let hist = bucket(sample, m_max, level_max, bits, Some((cube, inside)));
                let refs_part = match reference {
                    Reference::Analytic(m) => RefMasses::Analytic {
                        measure: m,
                        filter: Some((cube, inside)),
                    },
                    Reference::Empirical(m) => {
                        RefMasses::Empirical(bucket(m, m_max, level_max, bits, Some((cube, inside))))
                    }
                };
                let mut terms = Vec::new();
                for m in 0..=m_max {
                    let ref_block = refs_part.block(m, dim);
                    let scale = two_pow(p * m as f64);
                    for level in 0..=level_max {
                        let cells = hist.at_level(m, level, level_max, bits, dim);
                        let s = level_discrepancy(
                            &cells, &refs_part, ref_block, m, level, level_max, bits, dim,
                        );
                        terms.push(scale * two_pow(-p * level as f64) * s);
                    }
                }
                parts[slot] = pairwise_sum(&terms);
            }
            Some(TruncatedSplit {
                cube,
                a_pm: parts[0],
                b_pm: parts[1],
            })
        }
    };

    let tail_bound = truncation_tail_bound(&sample_hist, reference, p, m_max, level_max, &per_block);

    Ok(MultiscaleProfile {
        p,
        m_max,
        level_max,
        per_block,
        delta_p,
        d_p,
        split,
        tail_bound,
    })
}

/// Upper bound on the `Delta_p` mass omitted by the `(m_max, level_max)`
/// truncation.
///
/// Per kept block, levels beyond `level_max` contribute at most
/// `2^{-p level_max} / (2^p - 1)` times the combined block mass; blocks
/// beyond `m_max` contribute at most `2^{pm} (mu_n + mu)(B_m) 2^p/(2^p - 1)`,
/// with the empirical part exact and the reference part summed from the
/// analytic tail until it is negligible.
fn truncation_tail_bound(
    sample_hist: &Histogram,
    reference: &Reference<'_>,
    p: f64,
    m_max: u32,
    level_max: u32,
    per_block: &[BlockProfile],
) -> f64 {
    let geom = 1.0 / (f64::exp2(p) - 1.0);
    let level_tail: f64 = per_block
        .iter()
        .map(|b| {
            f64::exp2(p * b.m as f64)
                * (b.sample_mass + b.reference_mass)
                * f64::exp2(-p * level_max as f64)
                * geom
        })
        .sum();

    // Blocks beyond m_max: empirical overflow is known exactly.
    let mut block_tail = 0.0;
    for (&m, mass) in &sample_hist.overflow {
        block_tail += f64::exp2(p * m as f64) * mass.weight;
    }
    match reference {
        Reference::Empirical(other) => {
            for (i, point) in other.points_iter().enumerate() {
                let m = block_index(point);
                if m > m_max {
                    block_tail += f64::exp2(p * m as f64) * other.weight(i);
                }
            }
        }
        Reference::Analytic(measure) => {
            if let Some(beta) = measure.tail_exponent() {
                if p >= beta {
                    return f64::INFINITY;
                }
            }
            let mut m = m_max + 1;
            loop {
                let mass = measure.block_mass(m);
                let term = f64::exp2(p * m as f64) * mass;
                block_tail += term;
                if let Some(radius) = measure.support_radius() {
                    if pow2(m as i32 - 1) >= radius {
                        break;
                    }
                }
                if mass > 0.0 && term < 1e-18 * block_tail.max(1e-300) {
                    break;
                }
                m += 1;
                if m > 1100 {
                    break;
                }
            }
        }
    }
    level_tail + block_tail * f64::exp2(p) * geom
}
