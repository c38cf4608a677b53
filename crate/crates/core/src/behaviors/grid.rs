use rand::Rng;

use crate::geom::Point2;
use crate::gis::{CellIndex, RasterGrid};
use crate::scalar::Scalar;

/// 8-connected neighbor offset whose center bearing is closest to `angle`.
pub fn neighbor_offset<T: Scalar>(angle: T) -> (i64, i64) {
    const OFFSETS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let octant = (angle / T::FRAC_PI_4()).round().to_i64().unwrap_or(0);
    OFFSETS[octant.rem_euclid(8) as usize]
}

pub(crate) fn offset_cell<T: Scalar>(grid: &RasterGrid<T>, c: CellIndex, (dc, dr): (i64, i64)) -> Option<CellIndex> {
    let col = c.col as i64 + dc;
    let row = c.row as i64 + dr;
    if col < 0 || row < 0 {
        return None;
    }
    let n = CellIndex::new(col as usize, row as usize);
    grid.contains(n).then_some(n)
}

/// Neighbor toward `angle`, turning ±90° (equal odds, then the other side,
/// then back) when the preferred cell lies off the grid. Returns the chosen
/// cell and the heading actually taken.
pub fn step_toward<T: Scalar, R: Rng + ?Sized>(
    grid: &RasterGrid<T>,
    from: CellIndex,
    angle: T,
    rng: &mut R,
) -> (CellIndex, T) {
    if let Some(c) = offset_cell(grid, from, neighbor_offset(angle)) {
        return (c, angle);
    }
    turn_aside(grid, from, angle, rng)
}

/// Rotates `angle` by ±90° with equal probability; falls back to the opposite
/// turn and then to reversing if the rotated neighbor is off the grid.
pub(crate) fn turn_aside<T: Scalar, R: Rng + ?Sized>(
    grid: &RasterGrid<T>,
    from: CellIndex,
    angle: T,
    rng: &mut R,
) -> (CellIndex, T) {
    let quarter = T::FRAC_PI_2();
    let first = if rng.random::<bool>() { quarter } else { -quarter };
    for turn in [first, -first, T::PI()] {
        let a = wrap_angle(angle + turn);
        if let Some(c) = offset_cell(grid, from, neighbor_offset(a)) {
            return (c, a);
        }
    }
    // a 1x1 grid has no neighbors at all
    (from, angle)
}

/// Maps an angle into (-π, π].
pub(crate) fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = a % two_pi;
    if r <= -T::PI() {
        r = r + two_pi;
    } else if r > T::PI() {
        r = r - two_pi;
    }
    r
}

pub(crate) fn cell_center<T: Scalar>(grid: &RasterGrid<T>, c: CellIndex) -> Point2<T> {
    grid.cell_to_world(c)
}
