//! Structured kernel interpolation: covariances interpolated from a regular
//! lattice of inducing points with cubic convolution weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice points added beyond the data range on every side so each query
/// has a full 4-point stencil.
pub const LATTICE_PADDING: usize = 2;

/// Regular 2-D lattice, flattened x-fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducingLattice {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub shape: [usize; 2],
}

impl InducingLattice {
    /// Lattice whose unpadded part has `interior` points spanning `[lo, hi]`.
    pub fn covering(lo: [f64; 2], hi: [f64; 2], interior: [usize; 2]) -> Result<Self> {
        let mut origin = [0.0; 2];
        let mut spacing = [0.0; 2];
        let mut shape = [0; 2];
        for d in 0..2 {
            if interior[d] < 2 || !(hi[d] > lo[d]) {
                return Err(Error::InvalidParameter(format!(
                    "inducing lattice needs at least 2 points over a non-empty range in dimension {d}"
                )));
            }
            spacing[d] = (hi[d] - lo[d]) / (interior[d] - 1) as f64;
            origin[d] = lo[d] - LATTICE_PADDING as f64 * spacing[d];
            shape[d] = interior[d] + 2 * LATTICE_PADDING;
        }
        Ok(Self { origin, spacing, shape })
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, index: usize) -> [f64; 2] {
        let (ix, iy) = (index % self.shape[0], index / self.shape[0]);
        [
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
        ]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Keys cubic convolution kernel with `a = -0.5`.
fn cubic_convolution(s: f64) -> f64 {
    const A: f64 = -0.5;
    let s = s.abs();
    if s <= 1.0 {
        (A + 2.0) * s * s * s - (A + 3.0) * s * s + 1.0
    } else if s < 2.0 {
        A * s * s * s - 5.0 * A * s * s + 8.0 * A * s - 4.0 * A
    } else {
        0.0
    }
}

fn axis_weights(q: f64, origin: f64, spacing: f64, n: usize) -> Option<(usize, [f64; 4])> {
    let mut t = (q - origin) / spacing;
    // snap queries that sit on a lattice line up to rounding
    if (t - t.round()).abs() < 1e-9 {
        t = t.round();
    }
    let i0 = t.floor();
    if !(i0 >= 1.0 && i0 + 2.0 <= (n - 1) as f64) {
        return None;
    }
    let f = t - i0;
    let w = [
        cubic_convolution(1.0 + f),
        cubic_convolution(f),
        cubic_convolution(1.0 - f),
        cubic_convolution(2.0 - f),
    ];
    Some((i0 as usize - 1, w))
}

/// Sparse interpolation weights `(lattice index, weight)` for one query;
/// at most 16 nonzeros, summing to 1.
pub fn kiss_interp_weights(query: [f64; 2], lattice: &InducingLattice) -> Result<Vec<(usize, f64)>> {
    let outside = || Error::OutOfBounds {
        x: query[0],
        y: query[1],
    };
    let (sx, wx) = axis_weights(query[0], lattice.origin[0], lattice.spacing[0], lattice.shape[0]).ok_or_else(outside)?;
    let (sy, wy) = axis_weights(query[1], lattice.origin[1], lattice.spacing[1], lattice.shape[1]).ok_or_else(outside)?;
    let mut out = Vec::with_capacity(16);
    for (j, wyj) in wy.iter().enumerate() {
        for (i, wxi) in wx.iter().enumerate() {
            let w = wxi * wyj;
            if w != 0.0 {
                out.push(((sy + j) * lattice.shape[0] + sx + i, w));
            }
        }
    }
    Ok(out)
}
