//! Line-of-sight visibility over a DEM and the steering targets derived from it.
//!
//! A target cell is visible when the straight sightline from the observer's
//! eye (cell center, ground + eye height) to the target's ground elevation
//! stays on or above the terrain at every sample taken every half cell along
//! the horizontal distance. Terrain between cell centers is bilinearly
//! interpolated.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gis::{CellIndex, LandCover, RasterGrid};
use crate::geom::Point2;
use crate::scalar::Scalar;

pub const DEFAULT_RADIUS_M: f64 = 300.0;
pub const DEFAULT_EYE_HEIGHT_M: f64 = 1.6;

/// Visible cells inside a square window around the observer.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewshedMask<T> {
    pub center: CellIndex,
    pub radius: T,
    col0: usize,
    row0: usize,
    cols: usize,
    rows: usize,
    visible: Vec<bool>,
}

impl<T: Scalar> ViewshedMask<T> {
    pub fn is_visible(&self, c: CellIndex) -> bool {
        if c.col < self.col0 || c.row < self.row0 {
            return false;
        }
        let (dc, dr) = (c.col - self.col0, c.row - self.row0);
        dc < self.cols && dr < self.rows && self.visible[dr * self.cols + dc]
    }

    pub fn visible_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.visible.iter().enumerate().filter(|(_, &v)| v).map(move |(i, _)| {
            CellIndex::new(self.col0 + i % self.cols, self.row0 + i / self.cols)
        })
    }

    pub fn count(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }
}

/// Computes the visibility mask of `observer` out to `radius` meters.
pub fn compute_viewshed<T: Scalar>(
    dem: &RasterGrid<T>,
    observer: CellIndex,
    radius: T,
    eye_height: T,
) -> Result<ViewshedMask<T>> {
    if !dem.contains(observer) {
        let p = dem.cell_to_world(observer);
        return Err(Error::OutOfBounds { x: p.x.as_f64(), y: p.y.as_f64() });
    }
    if !(radius > T::zero()) {
        return Err(Error::InvalidParameter("viewshed radius must be positive".into()));
    }
    let ground = dem.valid(observer).ok_or(Error::NodataObserver {
        col: observer.col,
        row: observer.row,
    })?;
    let eye_z = ground + eye_height;
    let origin = dem.cell_to_world(observer);
    let step = dem.cell_size() * T::lit(0.5);

    let reach = (radius / dem.cell_size()).ceil().to_usize().unwrap_or(0);
    let col0 = observer.col.saturating_sub(reach);
    let row0 = observer.row.saturating_sub(reach);
    let col1 = (observer.col + reach).min(dem.n_cols() - 1);
    let row1 = (observer.row + reach).min(dem.n_rows() - 1);
    let cols = col1 - col0 + 1;
    let rows = row1 - row0 + 1;
    let mut visible = vec![false; cols * rows];

    for row in row0..=row1 {
        for col in col0..=col1 {
            let c = CellIndex::new(col, row);
            let slot = (row - row0) * cols + (col - col0);
            if c == observer {
                visible[slot] = true;
                continue;
            }
            let target = dem.cell_to_world(c);
            let dist = origin.distance(target);
            if dist > radius {
                continue;
            }
            let Some(target_z) = dem.valid(c) else { continue };
            visible[slot] = sightline_clear(dem, origin, eye_z, target, target_z, dist, step);
        }
    }

    Ok(ViewshedMask {
        center: observer,
        radius,
        col0,
        row0,
        cols,
        rows,
        visible,
    })
}

#[inline]
fn sightline_clear<T: Scalar>(
    dem: &RasterGrid<T>,
    origin: Point2<T>,
    eye_z: T,
    target: Point2<T>,
    target_z: T,
    dist: T,
    step: T,
) -> bool {
    let mut j = 1usize;
    loop {
        let t = step * T::from_usize_lossy(j);
        if t >= dist {
            return true;
        }
        let f = t / dist;
        let sample = origin.lerp(target, f);
        let line_z = eye_z + (target_z - eye_z) * f;
        if let Some(h) = dem.bilinear(sample) {
            if h > line_z {
                return false;
            }
        }
        j += 1;
    }
}

/// Per-land-cover attraction weights for one viewshed behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewshedWeights<T> {
    weights: [Option<T>; 14],
}

impl<T: Scalar> ViewshedWeights<T> {
    pub fn from_pairs(pairs: &[(LandCover, f64)]) -> Result<Self> {
        let mut weights = [None; 14];
        for &(cover, w) in pairs {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "weight for {} must be in (0, 1], got {w}",
                    cover.name()
                )));
            }
            weights[cover.id() as usize - 1] = Some(T::lit(w));
        }
        Ok(Self { weights })
    }

    pub fn get(&self, cover: LandCover) -> Option<T> {
        self.weights[cover.id() as usize - 1]
    }

    pub fn covers_legend(&self) -> bool {
        self.weights.iter().all(Option::is_some)
    }

    /// Weights favoring buildings.
    pub fn head_to_buildings() -> Self {
        Self::from_pairs(&table(0.40, 0.20, 0.20)).unwrap()
    }

    /// Weights favoring woodland.
    pub fn head_to_trees() -> Self {
        Self::from_pairs(&table(0.20, 0.20, 0.40)).unwrap()
    }

    /// Weights favoring water, for terrain without hydrology layers.
    pub fn head_to_water() -> Self {
        Self::from_pairs(&table(0.20, 0.40, 0.20)).unwrap()
    }

    /// Parses `name = weight` lines; `#` starts a comment. Names may be the
    /// land cover display name or its numeric ID.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("weights line {}: expected `name = weight`", n + 1)))?;
            let cover = LandCover::parse(k)
                .ok_or_else(|| Error::Config(format!("weights line {}: unknown land cover `{}`", n + 1, k.trim())))?;
            let w: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("weights line {}: bad weight `{}`", n + 1, v.trim())))?;
            pairs.push((cover, w));
        }
        Self::from_pairs(&pairs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_text(&self) -> String {
        LandCover::ALL
            .iter()
            .filter_map(|&c| self.get(c).map(|w| format!("{} = {}\n", c.name(), w)))
            .collect()
    }
}

fn table(urban: f64, water: f64, woodland: f64) -> Vec<(LandCover, f64)> {
    use LandCover::*;
    vec![
        (AcidGrassland, 0.05),
        (ArableHorticulture, 0.25),
        (Bog, 0.01),
        (CalcareousGrassland, 0.05),
        (FenMarshSwamp, 0.03),
        (Heather, 0.06),
        (HeatherGrassland, 0.05),
        (ImprovedGrassland, 0.05),
        (NeutralGrassland, 0.10),
        (Rock, 0.05),
        (Saltmarsh, 0.05),
        (Urban, urban),
        (Water, water),
        (Woodland, woodland),
    ]
}

/// Visible cells whose land cover carries the highest weight among all
/// visible weighted cells.
pub fn max_weight_visible_cells<T: Scalar>(
    mask: &ViewshedMask<T>,
    land_cover: &RasterGrid<T>,
    weights: &ViewshedWeights<T>,
) -> Vec<CellIndex> {
    let weight_of = |c: CellIndex| {
        land_cover
            .valid(c)
            .and_then(|v| v.round().to_i64())
            .and_then(LandCover::from_id)
            .and_then(|lc| weights.get(lc))
    };
    let mut best: Option<T> = None;
    let mut out = Vec::new();
    for c in mask.visible_cells() {
        let Some(w) = weight_of(c) else { continue };
        match best {
            Some(b) if w < b => {}
            Some(b) if w == b => out.push(c),
            _ => {
                best = Some(w);
                out.clear();
                out.push(c);
            }
        }
    }
    out
}

/// Arithmetic mean of the bearings from `p` to each target, east = 0,
/// counter-clockwise. `None` when there are no targets.
///
/// Angles are averaged directly, so target sets straddling the ±π cut
/// average toward zero.
pub fn mean_angle<T: Scalar>(p: Point2<T>, cells: &[Point2<T>]) -> Option<T> {
    if cells.is_empty() {
        return None;
    }
    let sum: T = cells.iter().map(|c| (c.y - p.y).atan2(c.x - p.x)).sum();
    Some(sum / T::from_usize_lossy(cells.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn flat(n: usize) -> RasterGrid<f64> {
        RasterGrid::filled(n, n, 5.0, Point2::new(0.0, 0.0), -9999.0, 0.0).unwrap()
    }

    #[test]
    fn flat_ground_sees_whole_disc() {
        let dem = flat(41);
        let obs = CellIndex::new(20, 20);
        let m = compute_viewshed(&dem, obs, 50.0, 1.6).unwrap();
        for c in dem.cells() {
            let d = dem.cell_to_world(c).distance(dem.cell_to_world(obs));
            assert_eq!(m.is_visible(c), d <= 50.0, "{c:?}");
        }
    }

    #[test]
    fn wall_shadows_cells_behind_it() {
        let mut dem = flat(41);
        for row in 0..41 {
            dem.set(CellIndex::new(21, row), 100.0);
        }
        let obs = CellIndex::new(20, 20);
        let m = compute_viewshed(&dem, obs, 80.0, 1.6).unwrap();
        for col in 22..=36 {
            assert!(!m.is_visible(CellIndex::new(col, 20)));
        }
        assert!(m.is_visible(CellIndex::new(21, 20)));
        assert!(m.is_visible(CellIndex::new(10, 20)));
    }

    #[test]
    fn nodata_observer_is_an_error() {
        let mut dem = flat(5);
        dem.set(CellIndex::new(2, 2), -9999.0);
        assert!(matches!(
            compute_viewshed(&dem, CellIndex::new(2, 2), 10.0, 1.6),
            Err(Error::NodataObserver { .. })
        ));
    }

    #[test]
    fn urban_wins_under_building_weights() {
        let dem = flat(11);
        let mut lc = dem.like(f64::from(LandCover::Woodland.id()));
        lc.set(CellIndex::new(8, 5), f64::from(LandCover::Urban.id()));
        lc.set(CellIndex::new(2, 1), f64::from(LandCover::Urban.id()));
        let m = compute_viewshed(&dem, CellIndex::new(5, 5), 100.0, 1.6).unwrap();
        let cells = max_weight_visible_cells(&m, &lc, &ViewshedWeights::head_to_buildings());
        assert_eq!(cells, vec![CellIndex::new(2, 1), CellIndex::new(8, 5)]);
        let all = max_weight_visible_cells(&m, &dem.like(1.0), &ViewshedWeights::head_to_buildings());
        assert_eq!(all.len(), m.count());
    }

    #[test]
    fn unweighted_cover_yields_no_targets() {
        let dem = flat(5);
        let m = compute_viewshed(&dem, CellIndex::new(2, 2), 10.0, 1.6).unwrap();
        assert!(max_weight_visible_cells(&m, &dem.like(-9999.0), &ViewshedWeights::head_to_trees()).is_empty());
    }

    #[test]
    fn mean_angle_examples() {
        let p = Point2::new(10.0, 10.0);
        assert!((mean_angle(p, &[Point2::new(10.0, 30.0)]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let sym = [Point2::new(20.0, 20.0), Point2::new(20.0, 0.0)];
        assert!(mean_angle(p, &sym).unwrap().abs() < 1e-15);
        assert_eq!(mean_angle::<f64>(p, &[]), None);
    }

    #[test]
    fn table_is_complete_and_parses_back() {
        for w in [
            ViewshedWeights::<f64>::head_to_buildings(),
            ViewshedWeights::head_to_trees(),
            ViewshedWeights::head_to_water(),
        ] {
            assert!(w.covers_legend());
            assert_eq!(ViewshedWeights::parse(&w.to_text()).unwrap(), w);
        }
        assert_eq!(ViewshedWeights::<f64>::head_to_buildings().get(LandCover::Urban), Some(0.40));
        assert_eq!(ViewshedWeights::<f64>::head_to_trees().get(LandCover::Woodland), Some(0.40));
        assert!(ViewshedWeights::<f64>::parse("Urban = 1.5").is_err());
    }
}
