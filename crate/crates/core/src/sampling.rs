//! Log-normal mobility-time model, found-location sampling along simulated
//! paths, and the probability distribution map (PDM).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::GrayImage;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behaviors::BehaviorKind;
use crate::error::{Error, Result};
use crate::geom::{point_along, Point2};
use crate::gis::RasterGrid;
use crate::metrics::skl_weights;
use crate::rng::{stream, Domain};
use crate::scalar::Scalar;
use crate::simulation::SimulatedPath;

/// Preferred hiker walking speed, km/h.
pub const DEFAULT_SPEED_KMH: f64 = 3.87;
/// Reported mean and standard deviation of solo-hiker mobility time, hours.
pub const REPORTED_MEAN_H: f64 = 1.06;
pub const REPORTED_SD_H: f64 = 1.01;
/// Time draws per path.
pub const DEFAULT_SAMPLES_PER_PATH: usize = 820;

/// Three-parameter log-normal over mobility time in hours:
/// `f(x) = exp(−ln²y / 2s²) / (s y √(2π) λ)` with `y = (x − μ)/λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel {
    pub s: f64,
    pub mu_loc: f64,
    pub lambda_scale: f64,
    /// km/h
    pub speed: f64,
}

impl Default for MobilityModel {
    /// Moment match to the reported mean and spread with `μ = 0`.
    fn default() -> Self {
        Self::from_moments(REPORTED_MEAN_H, REPORTED_SD_H, DEFAULT_SPEED_KMH).expect("positive constants")
    }
}

impl MobilityModel {
    pub fn new(s: f64, mu_loc: f64, lambda_scale: f64, speed: f64) -> Result<Self> {
        let m = Self {
            s,
            mu_loc,
            lambda_scale,
            speed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.lambda_scale > 0.0 && self.speed > 0.0 && self.mu_loc >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mobility model needs s > 0, lambda > 0, speed > 0, mu >= 0; got s={} lambda={} speed={} mu={}",
                self.s, self.lambda_scale, self.speed, self.mu_loc
            )));
        }
        Ok(())
    }

    /// Log-normal with `μ = 0` matching a mean and standard deviation.
    pub fn from_moments(mean: f64, sd: f64, speed: f64) -> Result<Self> {
        if !(mean > 0.0 && sd > 0.0) {
            return Err(Error::InvalidParameter("mean and sd must be positive".into()));
        }
        let s2 = (1.0 + (sd / mean).powi(2)).ln();
        Self::new(s2.sqrt(), 0.0, mean * (-0.5 * s2).exp(), speed)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let y = (x - self.mu_loc) / self.lambda_scale;
        if y <= 0.0 {
            return 0.0;
        }
        let l = y.ln();
        (-l * l / (2.0 * self.s * self.s)).exp() / (self.s * y * (2.0 * std::f64::consts::PI).sqrt() * self.lambda_scale)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let y = (x - self.mu_loc) / self.lambda_scale;
        if y <= 0.0 {
            return 0.0;
        }
        0.5 * (1.0 + libm::erf(y.ln() / (self.s * std::f64::consts::SQRT_2)))
    }

    pub fn mean(&self) -> f64 {
        self.mu_loc + self.lambda_scale * (0.5 * self.s * self.s).exp()
    }

    pub fn variance(&self) -> f64 {
        let e = (self.s * self.s).exp();
        self.lambda_scale * self.lambda_scale * (e - 1.0) * e
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let d = LogNormal::new(self.lambda_scale.ln(), self.s).expect("validated parameters");
        self.mu_loc + d.sample(rng)
    }

    /// Distance walked in `hours`, meters.
    pub fn distance_m(&self, hours: f64) -> f64 {
        hours * self.speed * 1000.0
    }
}

/// Bin edges from bin centers: midpoints between neighbors, half a gap past
/// the ends.
fn bin_edges(centers: &[f64]) -> Vec<f64> {
    let n = centers.len();
    let mut e = Vec::with_capacity(n + 1);
    e.push(centers[0] - 0.5 * (centers[1] - centers[0]));
    for w in centers.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(centers[n - 1] + 0.5 * (centers[n - 1] - centers[n - 2]));
    e
}

fn check_histogram(hist: &[(f64, f64)]) -> Result<()> {
    let nonzero = hist.iter().filter(|h| h.1 > 0.0).count();
    if nonzero < 3 {
        return Err(Error::InvalidParameter(format!(
            "histogram needs at least 3 nonzero bins, found {nonzero}"
        )));
    }
    if hist.windows(2).any(|w| !(w[1].0 > w[0].0)) || hist.iter().any(|h| h.1 < 0.0 || !h.1.is_finite()) {
        return Err(Error::InvalidParameter("histogram centers must increase and counts be non-negative".into()));
    }
    Ok(())
}

/// SKL between a histogram and a model's probability mass in the same bins.
pub fn histogram_skl(hist: &[(f64, f64)], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    check_histogram(hist)?;
    let centers: Vec<f64> = hist.iter().map(|h| h.0).collect();
    let edges = bin_edges(&centers);
    let q: Vec<f64> = edges.windows(2).map(|e| (cdf(e[1]) - cdf(e[0])).max(0.0)).collect();
    let p: Vec<f64> = hist.iter().map(|h| h.1).collect();
    if !(q.iter().sum::<f64>() > 0.0) {
        return Ok(f64::INFINITY);
    }
    skl_weights(&p, &q)
}

/// Golden-section minimization of `f` over `[a, b]`.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Coarse grid plus alternating golden-section refinement in log space of a
/// two-parameter objective. Deterministic.
fn minimize_2d(f: &(dyn Fn(f64, f64) -> f64 + Sync), a_grid: &[f64], b_grid: &[f64]) -> (f64, f64, f64) {
    let (mut a, mut b, mut best) = a_grid
        .par_iter()
        .map(|&a| {
            b_grid
                .iter()
                .map(|&b| (a, b, f(a, b)))
                .fold((a, b_grid[0], f64::INFINITY), |m, x| if x.2 < m.2 { x } else { m })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0, f64::INFINITY), |m, x| if x.2 < m.2 { x } else { m });
    let step_a = (a_grid[1] / a_grid[0]).ln();
    let step_b = (b_grid[1] / b_grid[0]).ln();
    for _ in 0..6 {
        let la = golden(|x| f(x.exp(), b), a.ln() - step_a, a.ln() + step_a, 60);
        if f(la.exp(), b) <= best {
            a = la.exp();
            best = f(a, b);
        }
        let lb = golden(|x| f(a, x.exp()), b.ln() - step_b, b.ln() + step_b, 60);
        if f(a, lb.exp()) <= best {
            b = lb.exp();
            best = f(a, b);
        }
    }
    (a, b, best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityFit {
    pub model: MobilityModel,
    pub skl: f64,
}

/// Fits `(s, λ)` with `μ = 0` by minimizing the SKL between the normalized
/// histogram (bin center in hours, count) and bin-integrated model mass.
pub fn fit_mobility(hist: &[(f64, f64)], speed: f64) -> Result<MobilityFit> {
    check_histogram(hist)?;
    let top = hist.last().map(|h| h.0).unwrap_or(1.0).max(1e-6);
    let obj = |s: f64, l: f64| {
        let m = MobilityModel {
            s,
            mu_loc: 0.0,
            lambda_scale: l,
            speed,
        };
        histogram_skl(hist, |x| m.cdf(x)).unwrap_or(f64::INFINITY)
    };
    let (s, l, skl) = minimize_2d(&obj, &log_grid(0.05, 4.0, 48), &log_grid(top * 1e-3, top * 10.0, 64));
    Ok(MobilityFit {
        model: MobilityModel::new(s, 0.0, l, speed)?,
        skl,
    })
}

/// Best normal (Gaussian) fit under the same criterion; returns `(mean, sd, skl)`.
pub fn fit_normal(hist: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    check_histogram(hist)?;
    let top = hist.last().map(|h| h.0).unwrap_or(1.0).max(1e-6);
    let obj = |mean: f64, sd: f64| {
        histogram_skl(hist, |x| 0.5 * (1.0 + libm::erf((x - mean) / (sd * std::f64::consts::SQRT_2))))
            .unwrap_or(f64::INFINITY)
    };
    // the mean is searched on a shifted log grid so it may sit anywhere in the range
    let shift = top;
    let shifted = |m: f64, sd: f64| obj(m - shift, sd);
    let (m, sd, skl) = minimize_2d(&shifted, &log_grid(shift * 0.5, shift * 3.0, 64), &log_grid(top * 1e-3, top * 5.0, 64));
    Ok((m - shift, sd, skl))
}

/// Parses `center,count` rows (header and `#` comments skipped).
pub fn parse_histogram_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let (a, b) = (it.next().unwrap_or(""), it.next().unwrap_or(""));
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => out.push((x, y)),
            _ if out.is_empty() && !seen_header => seen_header = true,
            _ => return Err(Error::format(format!("line {}", n + 1), format!("expected `center,count`, got `{line}`"))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoundSample<T> {
    pub position: Point2<T>,
    /// hours
    pub time: f64,
    pub path_index: usize,
    pub behavior: BehaviorKind,
}

/// Found location at mobility time `t`, or `None` past the end of the path.
pub fn found_at_time<T: Scalar>(path: &SimulatedPath<T>, model: &MobilityModel, t: f64) -> Option<FoundSample<T>> {
    let d = model.distance_m(t);
    if d > path.length().as_f64() {
        return None;
    }
    Some(FoundSample {
        position: point_along(&path.vertices, &path.cumulative_lengths, T::lit(d)),
        time: t,
        path_index: path.index,
        behavior: path.behavior,
    })
}

/// Draws `m` mobility times and keeps those whose walking distance fits on
/// the path.
pub fn sample_found<T: Scalar, R: Rng + ?Sized>(
    path: &SimulatedPath<T>,
    model: &MobilityModel,
    m: usize,
    rng: &mut R,
) -> Vec<FoundSample<T>> {
    (0..m).filter_map(|_| found_at_time(path, model, model.sample(rng))).collect()
}

/// Samples every path on its own stream; output is in path order.
pub fn sample_all<T: Scalar>(
    paths: &[SimulatedPath<T>],
    model: &MobilityModel,
    m: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<FoundSample<T>>> {
    model.validate()?;
    if m == 0 {
        return Err(Error::InvalidParameter("samples per path must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let per_path: Vec<Vec<FoundSample<T>>> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| sample_found(p, model, m, &mut stream(seed, Domain::Sampling, p.index as u64)))
            .collect()
    });
    Ok(per_path.into_iter().flatten().collect())
}

pub fn write_samples<T: Scalar>(path: impl AsRef<Path>, samples: &[FoundSample<T>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "x,y,t,behavior,path_index")?;
        for s in samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.position.x,
                s.position.y,
                s.time,
                s.behavior.name(),
                s.path_index
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_samples<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<FoundSample<T>>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::format(format!("{}:{}", path.display(), n + 1), format!("malformed sample row `{line}`"));
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        out.push(FoundSample {
            position: Point2::new(T::lit(num(f[0])?), T::lit(num(f[1])?)),
            time: num(f[2])?,
            behavior: f[3].trim().parse().map_err(|_| bad())?,
            path_index: f[4].trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Probability per cell; cells sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdm<T> {
    pub grid: RasterGrid<T>,
    /// Samples that landed on valid output cells.
    pub n_samples: usize,
}

/// Bins samples onto a grid spanning `template` at `out_cell_size`. Cells
/// whose center is nodata in the template hold 0 and absorb no samples.
pub fn build_pdm<T: Scalar>(samples: &[FoundSample<T>], template: &RasterGrid<T>, out_cell_size: T) -> Result<Pdm<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no found samples to bin".into()));
    }
    if !(out_cell_size > T::zero()) {
        return Err(Error::InvalidParameter(format!("PDM cell size must be positive, got {out_cell_size}")));
    }
    let cols = (template.width() / out_cell_size).round().to_usize().unwrap_or(0).max(1);
    let rows = (template.height() / out_cell_size).round().to_usize().unwrap_or(0).max(1);
    let mut grid = RasterGrid::filled(cols, rows, out_cell_size, template.origin(), template.nodata(), T::zero())?;
    let blocked: Vec<bool> = grid
        .cells()
        .map(|c| {
            template
                .world_to_cell(grid.cell_to_world(c))
                .is_none_or(|tc| template.is_nodata(tc))
        })
        .collect();
    let mut counts = vec![0u64; grid.len()];
    let mut n = 0usize;
    for s in samples {
        if let Some(c) = grid.world_to_cell(s.position) {
            let i = grid.linear_index(c);
            if !blocked[i] {
                counts[i] += 1;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("every found sample lies outside the PDM grid".into()));
    }
    for (v, &k) in grid.values_mut().iter_mut().zip(&counts) {
        *v = T::lit(k as f64 / n as f64);
    }
    Ok(Pdm { grid, n_samples: n })
}

/// Natural log of each positive cell; empty cells become nodata.
pub fn log_view<T: Scalar>(pdm: &RasterGrid<T>) -> RasterGrid<T> {
    let nodata = T::lit(-9999.0);
    let mut out = RasterGrid::filled(pdm.n_cols(), pdm.n_rows(), pdm.cell_size(), pdm.origin(), nodata, nodata)
        .expect("dimensions come from a valid grid");
    for (o, &v) in out.values_mut().iter_mut().zip(pdm.values()) {
        if v > T::zero() && !pdm.is_nodata_value(v) {
            *o = v.ln();
        }
    }
    out
}

/// Inverse of [`log_view`], renormalized to sum to 1.
pub fn from_log_view<T: Scalar>(log: &RasterGrid<T>) -> RasterGrid<T> {
    let mut out = log.map(|v| if log.is_nodata_value(v) { T::zero() } else { v.exp() });
    let total: f64 = out.values().iter().map(|v| v.as_f64()).sum();
    if total > 0.0 {
        for v in out.values_mut() {
            *v = T::lit(v.as_f64() / total);
        }
    }
    out
}

/// Grayscale rendering, min→black and max→white; nodata is black.
pub fn save_png<T: Scalar>(grid: &RasterGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let valid: Vec<f64> = grid.cells().filter_map(|c| grid.valid(c)).map(|v| v.as_f64()).collect();
    let lo = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (grid.n_cols() as u32, grid.n_rows() as u32);
    let img = GrayImage::from_fn(w, h, |x, y| {
        let c = crate::gis::CellIndex::new(x as usize, (h - 1 - y) as usize);
        let v = grid.valid(c).map(|v| ((v.as_f64() - lo) / span * 255.0).round() as u8).unwrap_or(0);
        image::Luma([v])
    });
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Serde(other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::polyline_length;
    use crate::gis::CellIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn straight(len: f64) -> SimulatedPath<f64> {
        let vertices = vec![Point2::new(0.0, 0.0), Point2::new(len, 0.0)];
        SimulatedPath {
            index: 0,
            behavior: BehaviorKind::HeadToWater,
            start: vertices[0],
            cumulative_lengths: vec![0.0, len],
            vertices,
            terminated_early: false,
        }
    }

    #[test]
    fn standard_pdf_at_one() {
        let m = MobilityModel::new(1.0, 0.0, 1.0, DEFAULT_SPEED_KMH).unwrap();
        assert!((m.pdf(1.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(m.pdf(0.0), 0.0);
        assert_eq!(m.pdf(-1.0), 0.0);
    }

    #[test]
    fn default_matches_reported_moments() {
        let m = MobilityModel::default();
        assert!((m.mean() - REPORTED_MEAN_H).abs() < 1e-12);
        assert!((m.variance().sqrt() - REPORTED_SD_H).abs() < 1e-12);
    }

    #[test]
    fn ten_km_is_just_over_the_time() {
        let m = MobilityModel::default();
        assert!((m.distance_m(2.584) - 10_000.08).abs() < 1e-6);
        assert!(found_at_time(&straight(10_000.0), &m, 2.584).is_none());
        assert!(found_at_time(&straight(10_000.0), &m, 2.58).is_some());
    }

    #[test]
    fn zero_time_is_the_start() {
        let s = found_at_time(&straight(500.0), &MobilityModel::default(), 0.0).unwrap();
        assert_eq!(s.position, Point2::new(0.0, 0.0));
    }

    #[test]
    fn samples_stay_on_path() {
        let vertices = vec![Point2::new(0.0, 0.0), Point2::new(3000.0, 0.0), Point2::new(3000.0, 4000.0)];
        let p = SimulatedPath {
            index: 3,
            behavior: BehaviorKind::HeadToTrees,
            start: vertices[0],
            cumulative_lengths: vec![0.0, 3000.0, 7000.0],
            vertices,
            terminated_early: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = MobilityModel::default();
        for s in sample_found(&p, &m, 2000, &mut rng) {
            assert!(m.distance_m(s.time) <= polyline_length(&p.vertices));
            let on_first = s.position.y.abs() < 1e-6 && (0.0..=3000.0).contains(&s.position.x);
            let on_second = (s.position.x - 3000.0).abs() < 1e-6 && (0.0..=4000.0).contains(&s.position.y);
            assert!(on_first || on_second);
            assert_eq!(s.path_index, 3);
        }
    }

    #[test]
    fn single_cell_pdm() {
        let template = RasterGrid::filled(4, 4, 10.0, Point2::new(0.0, 0.0), -9999.0, 0.0).unwrap();
        let p = Point2::new(15.0, 25.0);
        let samples: Vec<_> = (0..7)
            .map(|i| FoundSample {
                position: p,
                time: 0.1,
                path_index: i,
                behavior: BehaviorKind::HeadToPaths,
            })
            .collect();
        let pdm = build_pdm(&samples, &template, 10.0).unwrap();
        assert_eq!(pdm.grid.at(CellIndex::new(1, 2)), 1.0);
        assert_eq!(pdm.grid.values().iter().sum::<f64>(), 1.0);
        let outside = FoundSample {
            position: Point2::new(-5.0, 0.0),
            ..samples[0]
        };
        assert!(build_pdm(&[outside], &template, 10.0).is_err());
    }

    #[test]
    fn log_view_round_trip() {
        let mut g: RasterGrid<f64> = RasterGrid::filled(3, 1, 10.0, Point2::new(0.0, 0.0), -9999.0, 0.0).unwrap();
        g.values_mut().copy_from_slice(&[0.25, 0.0, 0.75]);
        let back = from_log_view(&log_view(&g));
        for (a, b) in back.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn histogram_csv_with_header() {
        let h = parse_histogram_csv("hours,count\n0.5,3\n1.5,7\n").unwrap();
        assert_eq!(h, vec![(0.5, 3.0), (1.5, 7.0)]);
        assert!(parse_histogram_csv("0.5,3\nx,y\n").is_err());
    }

    #[test]
    fn degenerate_histogram_rejected() {
        assert!(fit_mobility(&[(0.5, 10.0), (1.0, 0.0), (1.5, 0.0)], 3.87).is_err());
    }
}
