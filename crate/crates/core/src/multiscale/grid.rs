//! Dyadic block and cell geometry.
//!
//! Space is carved into max-norm annuli `B_0 = (-1,1]^d` and
//! `B_m = (-2^m, 2^m]^d \ (-2^{m-1}, 2^{m-1}]^d` for `m >= 1`. Inside each
//! block, level-`l` cells are the `2^{dl}` translates of `(-2^{-l}, 2^{-l}]^d`
//! tiling `(-1,1]^d`, rescaled by `2^m`. All faces are lower-open/upper-closed
//! in every coordinate; a point exactly on a shared face belongs to the cell
//! for which the coordinate is the upper bound.

use serde::{Deserialize, Serialize};

/// Identifies one dyadic cell: block `m`, refinement level `level`, and the
/// per-coordinate cell indices in `[0, 2^level)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCellKey {
    pub m: u32,
    pub level: u32,
    pub cell: Vec<u64>,
}

impl DyadicCellKey {
    pub fn new(m: u32, level: u32, cell: Vec<u64>) -> Self {
        debug_assert!(cell.iter().all(|&c| c < (1u64 << level)));
        DyadicCellKey { m, level, cell }
    }
}

/// Exact power of two as f64 (`exp` may be negative).
#[inline]
pub fn pow2(exp: i32) -> f64 {
    f64::powi(2.0, exp)
}

/// Block index of a point: the unique `m >= 0` with `x` in `B_m`.
///
/// `m = 0` iff every coordinate lies in `(-1, 1]`; otherwise the smallest `m`
/// with every coordinate in `(-2^m, 2^m]`. Upper faces are included, lower
/// faces excluded, so e.g. the coordinate value `2` sits in block 1 while
/// `-2` sits in block 2.
pub fn block_index(x: &[f64]) -> u32 {
    let mut m = 0u32;
    loop {
        let hi = pow2(m as i32);
        let lo = -hi;
        if x.iter().all(|&c| lo < c && c <= hi) {
            return m;
        }
        m += 1;
        // Finite f64 always fits in (-2^1025, 2^1025]; at m = 1025 `hi` is
        // +inf and the condition holds for any finite input.
    }
}

/// Cell index of `x` within block `m` at refinement level `level`.
///
/// Rescales by `2^{-m}` into `(-1,1]^d` and indexes per coordinate via
/// `ceil((y + 1) * 2^{level-1}) - 1`, clamped to `[0, 2^level)`.
///
/// Panics in debug builds if `x` is not in `B_m`.
pub fn cell_key(x: &[f64], m: u32, level: u32) -> DyadicCellKey {
    debug_assert_eq!(block_index(x), m, "point not in requested block");
    let scale = pow2(-(m as i32));
    let cells = 1u64 << level;
    let factor = pow2(level as i32 - 1);
    let cell = x
        .iter()
        .map(|&c| {
            let y = c * scale; // exact: division by a power of two
            let idx = ((y + 1.0) * factor).ceil() - 1.0;
            (idx.max(0.0) as u64).min(cells - 1)
        })
        .collect();
    DyadicCellKey::new(m, level, cell)
}

/// Half-open bounds `(lo, hi]` of the rescaled cell `2^m F` for cell indices
/// `cell` at `(m, level)`, before intersecting with the block annulus.
pub fn cell_bounds(m: u32, level: u32, cell: &[u64]) -> (Vec<f64>, Vec<f64>) {
    let width = pow2(m as i32 + 1 - level as i32);
    let base = pow2(m as i32);
    let lo: Vec<f64> = cell.iter().map(|&c| c as f64 * width - base).collect();
    let hi: Vec<f64> = lo.iter().map(|&l| l + width).collect();
    (lo, hi)
}

/// Inner cube bound for block `m`: points with all coordinates in
/// `(-inner, inner]` belong to blocks below `m`. Zero for `m = 0`.
pub fn inner_radius(m: u32) -> f64 {
    if m == 0 {
        0.0
    } else {
        pow2(m as i32 - 1)
    }
}

/// Parent cell indices one level up.
pub fn parent_cell(cell: &[u64]) -> Vec<u64> {
    cell.iter().map(|&c| c >> 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_index_matches_half_open_convention() {
        assert_eq!(block_index(&[0.5, -0.25]), 0);
        assert_eq!(block_index(&[2.0, 0.0]), 1);
        assert_eq!(block_index(&[2.0001, 0.0]), 2);
        assert_eq!(block_index(&[1.0]), 0);
        assert_eq!(block_index(&[-1.0]), 1);
        assert_eq!(block_index(&[-2.0]), 2);
    }

    #[test]
    fn cell_key_examples() {
        assert_eq!(cell_key(&[0.5], 0, 1).cell, vec![1]);
        assert_eq!(cell_key(&[-0.5], 0, 2).cell, vec![0]);
        assert_eq!(cell_key(&[2.0, 2.0], 1, 0).cell, vec![0, 0]);
    }

    #[test]
    fn cell_upper_face_owns_boundary() {
        // -0.5 is the upper bound of cell 0 at level 2 over (-1, -0.5].
        let k = cell_key(&[-0.5], 0, 2);
        assert_eq!(k.cell, vec![0]);
        // Just above the face belongs to the next cell.
        let k = cell_key(&[-0.5 + 1e-12], 0, 2);
        assert_eq!(k.cell, vec![1]);
    }

    #[test]
    fn bounds_roundtrip_with_key() {
        for &(x, m, level) in &[(0.3, 0u32, 4u32), (-0.77, 0, 5), (3.5, 2, 3), (1.5, 1, 6)] {
            let key = cell_key(&[x], m, level);
            let (lo, hi) = cell_bounds(m, level, &key.cell);
            assert!(lo[0] < x && x <= hi[0], "x={x} not in ({},{}]", lo[0], hi[0]);
        }
    }

    #[test]
    fn parent_contains_child() {
        let key = cell_key(&[0.31, -0.42], 0, 6);
        let parent = parent_cell(&key.cell);
        let up = cell_key(&[0.31, -0.42], 0, 5);
        assert_eq!(up.cell, parent);
    }
}
