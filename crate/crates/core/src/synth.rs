//! Deterministic synthetic island used for fixtures, demos and end-to-end
//! tests: 1 km square at 5 m, with hills, a lake, a river, a village,
//! woodland and a small road and trail network.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{polyline_length, project_on_polyline, Point2};
use crate::gis::{
    save_path_network, save_raster, CellIndex, LandCover, PathGraph, RasterGrid, TerrainStack, WaterSurface,
    CATCHMENT_FILE, DEM_FILE, LAND_COVER_FILE, NETWORK_FILE, OUTFLOW_FILE, WATER_SURFACE_FILE,
};

pub const ISLAND_CELLS: usize = 200;
pub const ISLAND_CELL_SIZE: f64 = 5.0;
pub const NODATA: f64 = -9999.0;

const CENTER: (f64, f64) = (500.0, 500.0);
const RIVER: [(f64, f64); 4] = [(600.0, 450.0), (700.0, 480.0), (800.0, 470.0), (960.0, 500.0)];
const LAKE: ((f64, f64), f64) = ((300.0, 350.0), 40.0);

fn p(x: f64, y: f64) -> Point2<f64> {
    Point2::new(x, y)
}

fn coast_radius(x: f64, y: f64) -> f64 {
    let th = (y - CENTER.1).atan2(x - CENTER.0);
    420.0 + 30.0 * (3.0 * th).sin() + 15.0 * (5.0 * th).cos()
}

fn radius(x: f64, y: f64) -> f64 {
    ((x - CENTER.0).powi(2) + (y - CENTER.1).powi(2)).sqrt()
}

fn bump(x: f64, y: f64, cx: f64, cy: f64, h: f64, s: f64) -> f64 {
    h * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
}

/// Ground height; 0 at sea.
pub fn island_elevation(x: f64, y: f64) -> f64 {
    let r = radius(x, y) / coast_radius(x, y);
    if r >= 1.0 {
        return 0.0;
    }
    let base = 30.0 * (1.0 - r * r);
    let hills = bump(x, y, 380.0, 600.0, 45.0, 110.0) + bump(x, y, 650.0, 380.0, 28.0, 80.0);
    let ripple = 2.0 * (x / 37.0).sin() * (y / 53.0).cos();
    (base + hills + ripple).max(0.5)
}

fn in_rect(x: f64, y: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
    (x0..=x1).contains(&x) && (y0..=y1).contains(&y)
}

/// Catchment assigned to the sea so that no agent attempts to cross it.
pub const SEA_CATCHMENT: f64 = 1.0e6;

/// Builds the terrain rasters and the path network.
pub fn island() -> Result<(TerrainStack<f64>, PathGraph<f64>)> {
    let n = ISLAND_CELLS;
    let base = RasterGrid::filled(n, n, ISLAND_CELL_SIZE, p(0.0, 0.0), NODATA, 0.0)?;
    let mut dem = base.clone();
    let mut cover = base.clone();
    let mut catchment = base.like(1.0);
    let mut water = base.clone();
    let mut outflow = base.clone();
    let river: Vec<Point2<f64>> = RIVER.iter().map(|&(x, y)| p(x, y)).collect();
    let river_len = polyline_length(&river);
    let cells: Vec<CellIndex> = base.cells().collect();

    for &c in &cells {
        let q = base.cell_to_world(c);
        let (x, y) = (q.x, q.y);
        let h = island_elevation(x, y);
        dem.set(c, h);
        let sea = radius(x, y) >= coast_radius(x, y);
        let lake = radius_from(x, y, LAKE.0) <= LAKE.1;
        let proj = project_on_polyline(q, &river);
        let on_river = !sea && proj.distance <= 6.0;
        let surface = if sea {
            WaterSurface::Sea
        } else if lake {
            WaterSurface::Lake
        } else if on_river {
            WaterSurface::River
        } else {
            WaterSurface::None
        };
        water.set(c, f64::from(surface.code()));
        if sea {
            catchment.set(c, SEA_CATCHMENT);
        } else if lake {
            catchment.set(c, 9000.0);
        } else if on_river {
            let along = polyline_length(&river[..=proj.segment]) + river[proj.segment].distance(proj.point);
            let frac = (along / river_len).clamp(0.0, 1.0);
            catchment.set(c, (500.0 + 11_500.0 * frac).round());
        }
        let lc = if surface.is_water() {
            LandCover::Water
        } else if in_rect(x, y, 540.0, 560.0, 650.0, 630.0) || in_rect(x, y, 240.0, 690.0, 275.0, 720.0) {
            LandCover::Urban
        } else if radius_from(x, y, (430.0, 680.0)) <= 70.0 || radius_from(x, y, (720.0, 300.0)) <= 50.0 {
            LandCover::Woodland
        } else if radius(x, y) >= coast_radius(x, y) - 20.0 {
            LandCover::Saltmarsh
        } else if radius_from(x, y, (250.0, 450.0)) <= 45.0 {
            LandCover::Bog
        } else if h < 15.0 {
            LandCover::ImprovedGrassland
        } else if h < 35.0 {
            LandCover::NeutralGrassland
        } else if h < 55.0 {
            LandCover::Heather
        } else {
            LandCover::Rock
        };
        cover.set(c, f64::from(lc.id()));
    }

    // downhill direction from central differences; radially outward at sea
    for &c in &cells {
        let q = base.cell_to_world(c);
        let s = ISLAND_CELL_SIZE;
        let gx = island_elevation(q.x + s, q.y) - island_elevation(q.x - s, q.y);
        let gy = island_elevation(q.x, q.y + s) - island_elevation(q.x, q.y - s);
        let dir = if gx.abs() + gy.abs() < 1e-12 {
            (q.y - CENTER.1).atan2(q.x - CENTER.0)
        } else {
            (-gy).atan2(-gx)
        };
        outflow.set(c, dir);
    }

    let terrain = TerrainStack::new(dem, cover, catchment, water, outflow)?;
    Ok((terrain, island_network()?))
}

fn radius_from(x: f64, y: f64, c: (f64, f64)) -> f64 {
    ((x - c.0).powi(2) + (y - c.1).powi(2)).sqrt()
}

fn island_network() -> Result<PathGraph<f64>> {
    let mut g = PathGraph::new();
    let node = |g: &mut PathGraph<f64>, x: f64, y: f64| g.add_node(p(x, y));
    let west = node(&mut g, 100.0, 500.0);
    let junction_w = node(&mut g, 300.0, 520.0);
    let village = node(&mut g, 560.0, 590.0);
    let east = node(&mut g, 900.0, 560.0);
    let north = node(&mut g, 560.0, 860.0);
    let summit = node(&mut g, 380.0, 640.0);
    let hamlet = node(&mut g, 255.0, 705.0);
    let wood_se = node(&mut g, 700.0, 300.0);
    let south = node(&mut g, 520.0, 150.0);

    let mut edge = |a, b, pts: &[(f64, f64)], kind: &str| -> Result<()> {
        let line: Vec<_> = pts.iter().map(|&(x, y)| p(x, y)).collect();
        g.add_edge(a, b, line, kind).map(|_| ())
    };
    edge(west, junction_w, &[(100.0, 500.0), (200.0, 505.0), (300.0, 520.0)], "Major road")?;
    edge(junction_w, village, &[(300.0, 520.0), (430.0, 560.0), (560.0, 590.0)], "Major road")?;
    edge(village, east, &[(560.0, 590.0), (700.0, 575.0), (900.0, 560.0)], "Major road")?;
    edge(village, north, &[(560.0, 590.0), (600.0, 720.0), (560.0, 860.0)], "Trunk road")?;
    edge(junction_w, summit, &[(300.0, 520.0), (340.0, 600.0), (380.0, 640.0)], "Path")?;
    edge(summit, hamlet, &[(380.0, 640.0), (320.0, 690.0), (255.0, 705.0)], "Path")?;
    edge(hamlet, junction_w, &[(255.0, 705.0), (230.0, 610.0), (300.0, 520.0)], "Path")?;
    edge(village, wood_se, &[(560.0, 590.0), (640.0, 430.0), (700.0, 300.0)], "Path")?;
    edge(wood_se, south, &[(700.0, 300.0), (600.0, 200.0), (520.0, 150.0)], "Path")?;
    edge(south, junction_w, &[(520.0, 150.0), (380.0, 300.0), (300.0, 520.0)], "Track")?;
    Ok(g)
}

/// Place-last-seen counts on a 10×10 grid of 100 m cells over the island.
pub fn pls_heatmap() -> RasterGrid<f64> {
    let mut g = RasterGrid::filled(10, 10, 100.0, p(0.0, 0.0), NODATA, 0.0).expect("static dimensions");
    for (col, row, v) in [
        (5, 5, 6.0),
        (5, 6, 4.0),
        (6, 5, 2.0),
        (3, 5, 3.0),
        (2, 7, 2.0),
        (4, 6, 1.0),
        (6, 7, 1.0),
        (7, 3, 1.0),
        (1, 5, 1.0),
        (5, 8, 1.0),
    ] {
        g.set(CellIndex::new(col, row), v);
    }
    g
}

/// Four-node network where an agent arriving at node 2 backtracks with
/// probability 0.1/2.1.
pub fn junction_network() -> Result<PathGraph<f64>> {
    let mut g = PathGraph::new();
    let n: Vec<_> = [p(0.0, 0.0), p(100.0, 100.0), p(100.0, 0.0), p(200.0, 0.0)]
        .into_iter()
        .map(|q| g.add_node(q))
        .collect();
    for (a, b) in [(0, 1), (0, 2), (2, 1), (2, 3)] {
        let line = vec![g.node(n[a]).position, g.node(n[b]).position];
        g.add_edge(n[a], n[b], line, "Path")?;
    }
    Ok(g)
}

/// Stand-in for published mobility-time bars: a right-skewed histogram in
/// hours (distance bins of 0.25 km divided by walking speed), shaped by a
/// log-normal plus a fixed wobble. Not digitized from any figure.
pub fn approximate_mobility_histogram(speed_kmh: f64) -> Vec<(f64, f64)> {
    let m = crate::sampling::MobilityModel::new(0.9, 0.0, 0.8, speed_kmh).expect("constant parameters");
    let width_km = 0.25;
    (0..40)
        .map(|i| {
            let lo = i as f64 * width_km / speed_kmh;
            let hi = (i + 1) as f64 * width_km / speed_kmh;
            let mass = m.cdf(hi) - m.cdf(lo);
            let wobble = 1.0 + 0.08 * (i as f64 * 1.7).sin();
            (0.5 * (lo + hi), (2000.0 * mass * wobble).round())
        })
        .collect()
}

pub fn write_histogram_csv(path: &Path, hist: &[(f64, f64)], note: &str) -> Result<()> {
    let mut s = format!("# {note}\nhours,count\n");
    for (h, c) in hist {
        s.push_str(&format!("{h},{c}\n"));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes the island terrain directory (rasters plus network).
pub fn write_island(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (t, g) = island()?;
    save_raster(&t.dem, dir.join(DEM_FILE))?;
    save_raster(&t.land_cover, dir.join(LAND_COVER_FILE))?;
    save_raster(&t.catchment, dir.join(CATCHMENT_FILE))?;
    save_raster(&t.water_surface, dir.join(WATER_SURFACE_FILE))?;
    save_raster(&t.outflow_dir, dir.join(OUTFLOW_FILE))?;
    save_path_network(&g, dir.join(NETWORK_FILE))
}
