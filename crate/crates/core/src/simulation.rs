//! Monte Carlo path generation: start sampling, behavior selection, running
//! agents to termination, and the line-delimited path store.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behaviors::{
    select_behavior, step_paths, step_viewshed, step_water, AgentState, HeadingCache, BehaviorKind, BehaviorMix, BehaviorParams,
    StepOutcome, Trace,
};
use crate::error::{Error, Result};
use crate::geom::{cumulative_lengths, Point2};
use crate::gis::{PathGraph, RasterGrid, TerrainStack, WaterSurface};
use crate::gp::sample_pls;
use crate::rng::{stream, Domain};
use crate::scalar::Scalar;

/// Consecutive rejected start draws before the start model is declared off-map.
pub const MAX_START_REJECTIONS: usize = 10_000;

/// Bivariate normal uncertainty around a place last seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartModel<T> {
    pub mu: Point2<T>,
    /// `[[σxx, σxy], [σyx, σyy]]`, square meters.
    pub sigma: [[T; 2]; 2],
}

impl<T: Scalar> StartModel<T> {
    pub fn new(mu: Point2<T>, sigma: [[T; 2]; 2]) -> Result<Self> {
        let m = Self { mu, sigma };
        m.cholesky()?;
        Ok(m)
    }

    pub fn isotropic(mu: Point2<T>, variance: T) -> Self {
        Self {
            mu,
            sigma: [[variance, T::zero()], [T::zero(), variance]],
        }
    }

    /// Lower-triangular factor `[l11, l21, l22]` of a symmetric PSD sigma.
    fn cholesky(&self) -> Result<[T; 3]> {
        let [[sxx, sxy], [syx, syy]] = self.sigma;
        let tol = T::lit(1e-9) * (sxx.abs() + syy.abs() + T::one());
        if (sxy - syx).abs() > tol {
            return Err(Error::InvalidParameter("start covariance is not symmetric".into()));
        }
        if sxx < T::zero() || syy < T::zero() || sxx * syy - sxy * syx < -tol {
            return Err(Error::InvalidParameter("start covariance is not positive semi-definite".into()));
        }
        let l11 = sxx.sqrt();
        let l21 = if l11 > T::zero() { sxy / l11 } else { T::zero() };
        let l22 = (syy - l21 * l21).max(T::zero()).sqrt();
        Ok([l11, l21, l22])
    }

    /// One unconstrained draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2<T> {
        let [l11, l21, l22] = self.cholesky().expect("validated on construction");
        let z1 = T::lit(rng.sample::<f64, _>(StandardNormal));
        let z2 = T::lit(rng.sample::<f64, _>(StandardNormal));
        Point2::new(self.mu.x + l11 * z1, self.mu.y + l21 * z1 + l22 * z2)
    }
}

/// True for points on the grid, on valid DEM data and not at sea.
pub fn is_valid_start<T: Scalar>(terrain: &TerrainStack<T>, p: Point2<T>) -> bool {
    match terrain.grid().world_to_cell(p) {
        Some(c) => terrain.dem.valid(c).is_some() && terrain.water_at(c) != WaterSurface::Sea,
        None => false,
    }
}

/// Draws from the start model, redrawing points off the map, on nodata or at sea.
pub fn sample_start<T: Scalar, R: Rng + ?Sized>(
    model: &StartModel<T>,
    terrain: &TerrainStack<T>,
    rng: &mut R,
) -> Result<Point2<T>> {
    for _ in 0..MAX_START_REJECTIONS {
        let p = model.draw(rng);
        if is_valid_start(terrain, p) {
            return Ok(p);
        }
    }
    Err(Error::Config(format!(
        "{MAX_START_REJECTIONS} consecutive start draws around ({}, {}) fell off the usable map",
        model.mu.x, model.mu.y
    )))
}

#[derive(Debug, Clone)]
pub struct SimConfig<T> {
    /// Termination distance, meters.
    pub d_max: T,
    pub n_gen: usize,
    pub seed: u64,
    /// Paths generated around each sampled place last seen.
    pub paths_per_start: usize,
    /// Covariance of the start jitter around each place last seen.
    pub start_sigma: [[T; 2]; 2],
    pub mix: BehaviorMix,
    pub behavior: BehaviorParams<T>,
    /// Hard cap on agent steps per path.
    pub max_steps: usize,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        let var = T::lit(10_000.0);
        Self {
            d_max: T::lit(10_000.0),
            n_gen: 1000,
            seed: 0,
            paths_per_start: 200,
            start_sigma: [[var, T::zero()], [T::zero(), var]],
            mix: BehaviorMix::default(),
            behavior: BehaviorParams::default(),
            max_steps: 5_000_000,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max >= T::zero()) {
            return Err(Error::Config("d_max must be non-negative".into()));
        }
        if self.n_gen == 0 {
            return Err(Error::Config("n_gen must be at least 1".into()));
        }
        if self.paths_per_start == 0 {
            return Err(Error::Config("paths_per_start must be at least 1".into()));
        }
        self.mix.validate()?;
        self.behavior.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath<T> {
    pub index: usize,
    pub behavior: BehaviorKind,
    pub start: Point2<T>,
    pub vertices: Vec<Point2<T>>,
    /// Running path length at each vertex.
    pub cumulative_lengths: Vec<T>,
    pub terminated_early: bool,
}

impl<T: Scalar> SimulatedPath<T> {
    pub fn length(&self) -> T {
        self.cumulative_lengths.last().copied().unwrap_or(T::zero())
    }
}

/// Runs one agent from `start` until a distance check finds the path at or
/// beyond `d_max`, or the behavior reaches its goal.
pub fn run_path<T: Scalar, R: Rng + ?Sized>(
    start: Point2<T>,
    behavior: BehaviorKind,
    config: &SimConfig<T>,
    terrain: &TerrainStack<T>,
    graph: &PathGraph<T>,
    rng: &mut R,
) -> Result<SimulatedPath<T>> {
    run_path_cached(start, behavior, config, terrain, graph, None, rng)
}

/// [`run_path`] sharing viewshed headings through `cache`, which must have
/// been built for this terrain and `config.behavior`.
pub fn run_path_cached<T: Scalar, R: Rng + ?Sized>(
    start: Point2<T>,
    behavior: BehaviorKind,
    config: &SimConfig<T>,
    terrain: &TerrainStack<T>,
    graph: &PathGraph<T>,
    cache: Option<&HeadingCache<T>>,
    rng: &mut R,
) -> Result<SimulatedPath<T>> {
    let heading = T::lit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
    let mut state = AgentState::new(start, behavior, heading);
    let mut trace = Trace::starting_at(start);
    // only the paths behavior mutates the network, and only its own copy
    let mut private_graph = (behavior == BehaviorKind::HeadToPaths).then(|| graph.clone());
    let mut terminated_early = false;
    let mut steps = 0usize;

    while state.distance_traveled < config.d_max {
        if steps >= config.max_steps {
            warn!("path from ({}, {}) hit the {} step cap", start.x, start.y, config.max_steps);
            break;
        }
        let outcome = match behavior {
            BehaviorKind::HeadToWater => step_water(&mut state, terrain, &config.behavior.water, rng, &mut trace)?,
            BehaviorKind::HeadToBuildings | BehaviorKind::HeadToTrees => {
                step_viewshed(&mut state, terrain, &config.behavior, cache, rng, &mut trace)?
            }
            BehaviorKind::HeadToPaths => step_paths(
                &mut state,
                terrain,
                private_graph.as_mut().expect("paths behavior owns a graph copy"),
                &config.behavior,
                rng,
                &mut trace,
            )?,
        };
        steps += 1;
        if outcome == StepOutcome::Terminated {
            terminated_early = true;
            break;
        }
    }

    Ok(SimulatedPath {
        index: 0,
        behavior,
        start,
        vertices: trace.vertices,
        cumulative_lengths: trace.cumulative,
        terminated_early,
    })
}

/// Where places last seen come from.
#[derive(Debug, Clone)]
pub enum StartSource<T> {
    /// One known place last seen.
    Fixed(Point2<T>),
    /// Non-negative density raster (typically an up-sampled posterior);
    /// a place last seen is drawn per group of `paths_per_start` paths.
    Density(RasterGrid<T>),
}

/// Generates `config.n_gen` paths. Path `i` draws from its own random stream
/// so the output is a pure function of the inputs and seed, whatever the
/// worker count.
pub fn run_monte_carlo<T: Scalar>(
    config: &SimConfig<T>,
    source: &StartSource<T>,
    terrain: &TerrainStack<T>,
    graph: &PathGraph<T>,
    workers: usize,
) -> Result<Vec<SimulatedPath<T>>> {
    config.validate()?;
    if config.mix.paths > 0.0 && graph.is_empty() {
        return Err(Error::Config("the paths behavior needs a non-empty path network".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let n_starts = config.n_gen.div_ceil(config.paths_per_start);
    let places: Vec<Point2<T>> = match source {
        StartSource::Fixed(p) => vec![*p; n_starts],
        StartSource::Density(grid) => (0..n_starts)
            .map(|g| {
                let mut rng = stream(config.seed, Domain::PlaceLastSeen, g as u64);
                sample_pls(grid, 1, &mut rng).map(|v| v[0])
            })
            .collect::<Result<_>>()?,
    };

    let cache = HeadingCache::new();
    pool.install(|| {
        (0..config.n_gen)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(config.seed, Domain::Path, i as u64);
                let pls = places[i / config.paths_per_start];
                let model = StartModel::new(pls, config.start_sigma)?;
                let start = sample_start(&model, terrain, &mut rng)?;
                let behavior = select_behavior(&config.mix, &mut rng);
                let mut path = run_path_cached(start, behavior, config, terrain, graph, Some(&cache), &mut rng)?;
                path.index = i;
                Ok(path)
            })
            .collect()
    })
}

/// One line of the path store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: usize,
    pub behavior: BehaviorKind,
    pub start: [f64; 2],
    pub terminated_early: bool,
    /// Path length accumulated while stepping.
    pub length: f64,
    pub vertices: Vec<[f64; 2]>,
}

impl PathRecord {
    pub fn from_path<T: Scalar>(p: &SimulatedPath<T>) -> Self {
        Self {
            index: p.index,
            behavior: p.behavior,
            start: [p.start.x.as_f64(), p.start.y.as_f64()],
            terminated_early: p.terminated_early,
            length: p.length().as_f64(),
            vertices: p.vertices.iter().map(|v| [v.x.as_f64(), v.y.as_f64()]).collect(),
        }
    }

    /// Rebuilds the path; cumulative lengths are recomputed from the vertices.
    pub fn to_path<T: Scalar>(&self) -> SimulatedPath<T> {
        let vertices: Vec<Point2<T>> = self.vertices.iter().map(|v| Point2::new(T::lit(v[0]), T::lit(v[1]))).collect();
        let cumulative_lengths = cumulative_lengths(&vertices);
        SimulatedPath {
            index: self.index,
            behavior: self.behavior,
            start: Point2::new(T::lit(self.start[0]), T::lit(self.start[1])),
            vertices,
            cumulative_lengths,
            terminated_early: self.terminated_early,
        }
    }
}

pub fn write_paths<T: Scalar>(path: impl AsRef<Path>, paths: &[SimulatedPath<T>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for p in paths {
        serde_json::to_writer(&mut out, &PathRecord::from_path(p)).map_err(|e| Error::Serde(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_path_records(path: impl AsRef<Path>) -> Result<Vec<PathRecord>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PathRecord =
            serde_json::from_str(&line).map_err(|e| Error::Serde(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_paths<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<SimulatedPath<T>>> {
    Ok(read_path_records(path)?.iter().map(PathRecord::to_path).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::polyline_length;
    use crate::gis::CellIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_terrain(n: usize) -> TerrainStack<f64> {
        let base = RasterGrid::filled(n, n, 5.0, Point2::new(0.0, 0.0), -9999.0, 0.0).unwrap();
        TerrainStack::new(base.clone(), base.like(1.0), base.clone(), base.clone(), base.clone()).unwrap()
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let t = open_terrain(20);
        let m = StartModel::new(Point2::new(33.0, 41.0), [[0.0; 2]; 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample_start(&m, &t, &mut rng).unwrap(), Point2::new(33.0, 41.0));
        }
    }

    #[test]
    fn non_psd_sigma_is_rejected() {
        assert!(StartModel::new(Point2::new(0.0, 0.0), [[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(StartModel::new(Point2::new(0.0, 0.0), [[1.0, 0.5], [0.2, 1.0]]).is_err());
    }

    #[test]
    fn sea_starts_are_redrawn() {
        let mut t = open_terrain(40);
        for c in t.grid().cells().collect::<Vec<_>>() {
            if c.col < 30 {
                t.water_surface.set(c, f64::from(WaterSurface::Sea.code()));
            }
        }
        let m = StartModel::isotropic(Point2::new(100.0, 100.0), 10_000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let p = sample_start(&m, &t, &mut rng).unwrap();
            assert!(t.grid().world_to_cell(p).unwrap().col >= 30);
        }
    }

    #[test]
    fn all_sea_exhausts_rejections() {
        let mut t = open_terrain(10);
        t.water_surface = t.water_surface.like(2.0);
        let m = StartModel::isotropic(Point2::new(25.0, 25.0), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(sample_start(&m, &t, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn zero_d_max_gives_single_vertex() {
        let t = open_terrain(10);
        let cfg = SimConfig { d_max: 0.0, ..SimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = run_path(Point2::new(20.0, 20.0), BehaviorKind::HeadToWater, &cfg, &t, &PathGraph::new(), &mut rng).unwrap();
        assert_eq!(p.vertices.len(), 1);
        assert_eq!(p.length(), 0.0);
    }

    #[test]
    fn long_road_overshoots_only_by_whole_edge() {
        let t = open_terrain(20);
        let mut g = PathGraph::new();
        let a = g.add_node(Point2::new(50.0, 50.0));
        let b = g.add_node(Point2::new(12_050.0, 50.0));
        g.add_edge(a, b, vec![Point2::new(50.0, 50.0), Point2::new(12_050.0, 50.0)], "Major road").unwrap();
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = run_path(Point2::new(50.0, 50.0), BehaviorKind::HeadToPaths, &cfg, &t, &g, &mut rng).unwrap();
        assert!(p.length() >= 10_000.0 && p.length() <= 12_000.0 + 1e-6, "{}", p.length());
        assert!(!p.terminated_early);
        assert!((polyline_length(&p.vertices) - p.length()).abs() < 1e-6);
    }

    #[test]
    fn water_paths_reach_d_max_with_consistent_bookkeeping() {
        let t = open_terrain(30);
        let cfg = SimConfig { d_max: 2_000.0, ..SimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start = t.grid().cell_to_world(CellIndex::new(15, 15));
        let p = run_path(start, BehaviorKind::HeadToWater, &cfg, &t, &PathGraph::new(), &mut rng).unwrap();
        assert!(p.length() >= 2_000.0);
        assert!((polyline_length(&p.vertices) - p.length()).abs() < 1e-6);
        assert!(p.cumulative_lengths.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn monte_carlo_is_independent_of_worker_count() {
        let t = open_terrain(30);
        let cfg = SimConfig {
            d_max: 500.0,
            n_gen: 40,
            seed: 17,
            paths_per_start: 7,
            mix: BehaviorMix { paths: 0.0, ..BehaviorMix::default() },
            ..SimConfig::default()
        };
        let src = StartSource::Fixed(Point2::new(75.0, 75.0));
        let a = run_monte_carlo(&cfg, &src, &t, &PathGraph::new(), 1).unwrap();
        let b = run_monte_carlo(&cfg, &src, &t, &PathGraph::new(), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert!(a.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn path_store_round_trips() {
        let t = open_terrain(30);
        let cfg = SimConfig {
            d_max: 300.0,
            n_gen: 5,
            mix: BehaviorMix::only(BehaviorKind::HeadToWater),
            ..SimConfig::default()
        };
        let paths = run_monte_carlo(&cfg, &StartSource::Fixed(Point2::new(75.0, 75.0)), &t, &PathGraph::new(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("paths.jsonl");
        write_paths(&f, &paths).unwrap();
        let back: Vec<SimulatedPath<f64>> = read_paths(&f).unwrap();
        assert_eq!(back.len(), paths.len());
        for (a, b) in paths.iter().zip(&back) {
            assert_eq!(a.vertices, b.vertices);
            assert!((a.length() - b.length()).abs() < 1e-6);
        }
    }
}
