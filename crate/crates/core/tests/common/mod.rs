//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use lostpath::geom::Point2;
use lostpath::gis::{CellIndex, LandCover, RasterGrid, TerrainStack};
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn p(x: f64, y: f64) -> Point2<f64> {
    Point2::new(x, y)
}

/// Rolling random terrain: a few Gaussian hills and pits plus per-cell noise,
/// with an optional sprinkling of nodata cells.
pub fn random_dem<R: Rng>(n: usize, cs: f64, nodata_frac: f64, rng: &mut R) -> RasterGrid<f64> {
    let size = n as f64 * cs;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..8)
        .map(|_| {
            (
                rng.random_range(0.0..size),
                rng.random_range(0.0..size),
                rng.random_range(0.05 * size..0.25 * size),
                rng.random_range(-25.0..40.0),
            )
        })
        .collect();
    let mut values = Vec::with_capacity(n * n);
    // file order: north row first
    for row in (0..n).rev() {
        for col in 0..n {
            let x = (col as f64 + 0.5) * cs;
            let y = (row as f64 + 0.5) * cs;
            let mut h: f64 = bumps
                .iter()
                .map(|&(bx, by, w, a)| a * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * w * w)).exp())
                .sum();
            h += rng.random_range(0.0..1.5);
            if rng.random::<f64>() < nodata_frac {
                h = -9999.0;
            }
            values.push(h);
        }
    }
    RasterGrid::new(n, n, cs, p(0.0, 0.0), -9999.0, values).unwrap()
}

/// Plain row-major copy of a DEM, row 0 south, `None` for nodata.
pub struct HeightTable {
    pub h: Vec<Vec<Option<f64>>>,
    pub cs: f64,
    pub x0: f64,
    pub y0: f64,
}

impl HeightTable {
    pub fn from_grid(g: &RasterGrid<f64>) -> Self {
        let h = (0..g.n_rows())
            .map(|row| (0..g.n_cols()).map(|col| g.valid(CellIndex::new(col, row))).collect())
            .collect();
        Self {
            h,
            cs: g.cell_size(),
            x0: g.origin().x,
            y0: g.origin().y,
        }
    }

    fn rows(&self) -> usize {
        self.h.len()
    }

    fn cols(&self) -> usize {
        self.h[0].len()
    }

    pub fn center(&self, col: usize, row: usize) -> (f64, f64) {
        (self.x0 + (col as f64 + 0.5) * self.cs, self.y0 + (row as f64 + 0.5) * self.cs)
    }

    /// Bilinear height between cell centers, clamped at the border; nodata
    /// corners drop out and the remaining weights are renormalized.
    pub fn interp(&self, x: f64, y: f64) -> Option<f64> {
        let gx = ((x - self.x0) / self.cs - 0.5).max(0.0).min((self.cols() - 1) as f64);
        let gy = ((y - self.y0) / self.cs - 0.5).max(0.0).min((self.rows() - 1) as f64);
        let c0 = gx.floor() as usize;
        let r0 = gy.floor() as usize;
        let c1 = (c0 + 1).min(self.cols() - 1);
        let r1 = (r0 + 1).min(self.rows() - 1);
        let tx = gx - c0 as f64;
        let ty = gy - r0 as f64;
        let corners = [
            (c0, r0, (1.0 - tx) * (1.0 - ty)),
            (c1, r0, tx * (1.0 - ty)),
            (c0, r1, (1.0 - tx) * ty),
            (c1, r1, tx * ty),
        ];
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for &(c, r, w) in &corners {
            if let Some(v) = self.h[r][c] {
                acc += w * v;
                wsum += w;
            }
        }
        if wsum <= 0.0 {
            return corners.iter().find_map(|&(c, r, _)| self.h[r][c]);
        }
        Some(acc / wsum)
    }
}

/// Brute-force line of sight: every cell of the grid is tested on its own by
/// walking the sightline in half-cell steps.
pub fn los_oracle(t: &HeightTable, obs: (usize, usize), radius: f64, eye: f64) -> Vec<Vec<bool>> {
    let (oc, or) = obs;
    let eye_z = t.h[or][oc].expect("observer on data") + eye;
    let (ox, oy) = t.center(oc, or);
    let step = t.cs * 0.5;
    let mut out = vec![vec![false; t.cols()]; t.rows()];
    for row in 0..t.rows() {
        for col in 0..t.cols() {
            if (col, row) == obs {
                out[row][col] = true;
                continue;
            }
            let (tx, ty) = t.center(col, row);
            let dist = (tx - ox).hypot(ty - oy);
            let Some(tz) = t.h[row][col] else { continue };
            if dist > radius {
                continue;
            }
            let mut clear = true;
            let mut j = 1usize;
            loop {
                let s = step * j as f64;
                if s >= dist {
                    break;
                }
                let f = s / dist;
                let sx = ox + (tx - ox) * f;
                let sy = oy + (ty - oy) * f;
                let line = eye_z + (tz - eye_z) * f;
                if t.interp(sx, sy).is_some_and(|h| h > line) {
                    clear = false;
                    break;
                }
                j += 1;
            }
            out[row][col] = clear;
        }
    }
    out
}

/// Modified Bessel function of the second kind by trapezoidal quadrature of
/// `K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let h: f64 = 1e-3;
    let mut sum = 0.5 * (-x).exp();
    let mut t = h;
    loop {
        let term = (-x * t.cosh()).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-300 || t > 40.0 {
            break;
        }
        t += h;
    }
    sum * h
}

/// General Matern covariance at ν = 5/2 written through the Bessel function.
pub fn matern_bessel(r: f64, output_scale: f64) -> f64 {
    if r == 0.0 {
        return output_scale;
    }
    let nu: f64 = 2.5;
    let gamma_nu = 0.75 * std::f64::consts::PI.sqrt();
    let z = (2.0 * nu).sqrt() * r;
    output_scale * 2f64.powf(1.0 - nu) / gamma_nu * z.powf(nu) * bessel_k(nu, z)
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at α = 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Pearson chi-square statistic for observed counts against probabilities.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &q)| {
            let e = q * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Flat terrain of one land cover, all rasters aligned.
pub fn flat_terrain(n: usize, cs: f64, cover: LandCover) -> TerrainStack<f64> {
    let base = RasterGrid::filled(n, n, cs, p(0.0, 0.0), -9999.0, 0.0).unwrap();
    TerrainStack::new(
        base.clone(),
        base.like(f64::from(cover.id())),
        base.like(1.0),
        base.clone(),
        base.like(0.0),
    )
    .unwrap()
}

/// 16x16 sparse count heatmap at 100 m: two clusters of reports on a field of
/// zeros.
pub fn sparse_heatmap_16() -> RasterGrid<f64> {
    let n = 16;
    let mut g = RasterGrid::filled(n, n, 100.0, p(0.0, 0.0), -9999.0, 0.0).unwrap();
    for (col, row, v) in [
        (4, 4, 6.0),
        (5, 4, 4.0),
        (4, 5, 3.0),
        (5, 5, 5.0),
        (3, 4, 1.0),
        (11, 10, 2.0),
        (12, 10, 3.0),
        (11, 11, 1.0),
        (8, 13, 1.0),
        (2, 12, 1.0),
    ] {
        g.set(CellIndex::new(col, row), v);
    }
    g
}
