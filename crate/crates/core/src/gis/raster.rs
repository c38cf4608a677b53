//! Square-cell georeferenced rasters and the plain-text ASCII grid format.
//!
//! File layout (keys are case-insensitive):
//!
//! ```text
//! ncols        <n>
//! nrows        <n>
//! xllcorner    <meters>
//! yllcorner    <meters>
//! cellsize     <meters>
//! nodata_value <value>
//! <nrows lines of ncols whitespace-separated values, northernmost row first>
//! ```
//!
//! Cell indices count columns from the west and rows from the south, so that
//! `(0, 0)` is the lower-left cell touching the origin.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid<T> {
    n_cols: usize,
    n_rows: usize,
    cell_size: T,
    origin: Point2<T>,
    nodata: T,
    /// Row-major, northernmost row first (file order).
    values: Vec<T>,
}

impl<T: Scalar> RasterGrid<T> {
    pub fn new(
        n_cols: usize,
        n_rows: usize,
        cell_size: T,
        origin: Point2<T>,
        nodata: T,
        values: Vec<T>,
    ) -> Result<Self> {
        if n_cols == 0 {
            return Err(Error::format("ncols", "must be positive"));
        }
        if n_rows == 0 {
            return Err(Error::format("nrows", "must be positive"));
        }
        if !(cell_size > T::zero()) || !cell_size.is_finite() {
            return Err(Error::format("cellsize", "must be a positive finite number"));
        }
        let expected = n_cols * n_rows;
        if values.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            n_cols,
            n_rows,
            cell_size,
            origin,
            nodata,
            values,
        })
    }

    /// Grid filled with a constant.
    pub fn filled(n_cols: usize, n_rows: usize, cell_size: T, origin: Point2<T>, nodata: T, fill: T) -> Result<Self> {
        Self::new(n_cols, n_rows, cell_size, origin, nodata, vec![fill; n_cols * n_rows])
    }

    /// Grid with the same georeference as `self`, holding `fill` everywhere.
    pub fn like(&self, fill: T) -> Self {
        Self {
            values: vec![fill; self.values.len()],
            ..self.clone()
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn cell_size(&self) -> T {
        self.cell_size
    }
    pub fn origin(&self) -> Point2<T> {
        self.origin
    }
    pub fn nodata(&self) -> T {
        self.nodata
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw values in file order (northernmost row first).
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn width(&self) -> T {
        self.cell_size * T::from_usize_lossy(self.n_cols)
    }

    pub fn height(&self) -> T {
        self.cell_size * T::from_usize_lossy(self.n_rows)
    }

    #[inline]
    fn offset(&self, c: CellIndex) -> usize {
        (self.n_rows - 1 - c.row) * self.n_cols + c.col
    }

    /// Index into [`values`](Self::values) for a cell.
    pub fn linear_index(&self, c: CellIndex) -> usize {
        self.offset(c)
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.col < self.n_cols && c.row < self.n_rows
    }

    pub fn get(&self, c: CellIndex) -> Option<T> {
        self.contains(c).then(|| self.values[self.offset(c)])
    }

    /// Panics if `c` is out of bounds.
    #[inline]
    pub fn at(&self, c: CellIndex) -> T {
        assert!(self.contains(c), "cell {c:?} out of bounds");
        self.values[self.offset(c)]
    }

    pub fn set(&mut self, c: CellIndex, v: T) {
        assert!(self.contains(c), "cell {c:?} out of bounds");
        let o = self.offset(c);
        self.values[o] = v;
    }

    pub fn is_nodata_value(&self, v: T) -> bool {
        v.is_nan() || v == self.nodata
    }

    pub fn is_nodata(&self, c: CellIndex) -> bool {
        self.is_nodata_value(self.at(c))
    }

    /// Value at `c`, or `None` for nodata and out-of-bounds cells.
    pub fn valid(&self, c: CellIndex) -> Option<T> {
        self.get(c).filter(|&v| !self.is_nodata_value(v))
    }

    /// Center of a cell in world coordinates.
    pub fn cell_to_world(&self, c: CellIndex) -> Point2<T> {
        let half = T::lit(0.5);
        Point2::new(
            self.origin.x + (T::from_usize_lossy(c.col) + half) * self.cell_size,
            self.origin.y + (T::from_usize_lossy(c.row) + half) * self.cell_size,
        )
    }

    /// Floor division relative to the origin; `None` when outside the grid.
    pub fn world_to_cell(&self, p: Point2<T>) -> Option<CellIndex> {
        let fx = ((p.x - self.origin.x) / self.cell_size).floor();
        let fy = ((p.y - self.origin.y) / self.cell_size).floor();
        if !(fx >= T::zero() && fy >= T::zero()) {
            return None;
        }
        let col = fx.to_usize()?;
        let row = fy.to_usize()?;
        let c = CellIndex::new(col, row);
        self.contains(c).then_some(c)
    }

    /// Iterates all cells, south-west first.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.n_rows).flat_map(move |row| (0..self.n_cols).map(move |col| CellIndex::new(col, row)))
    }

    /// Same dimensions, cell size and origin.
    pub fn is_aligned_with<U: Scalar>(&self, other: &RasterGrid<U>) -> bool {
        self.n_cols == other.n_cols
            && self.n_rows == other.n_rows
            && self.cell_size.as_f64() == other.cell_size.as_f64()
            && self.origin.x.as_f64() == other.origin.x.as_f64()
            && self.origin.y.as_f64() == other.origin.y.as_f64()
    }

    /// Bilinear interpolation between cell centers, clamped at the grid edge.
    /// Nodata corners are excluded and the remaining weights renormalized;
    /// returns `None` when all four corners are nodata.
    pub fn bilinear(&self, p: Point2<T>) -> Option<T> {
        let half = T::lit(0.5);
        let gx = (p.x - self.origin.x) / self.cell_size - half;
        let gy = (p.y - self.origin.y) / self.cell_size - half;
        let max_c = T::from_usize_lossy(self.n_cols - 1);
        let max_r = T::from_usize_lossy(self.n_rows - 1);
        let gx = gx.max(T::zero()).min(max_c);
        let gy = gy.max(T::zero()).min(max_r);
        let c0 = gx.floor().to_usize().unwrap_or(0).min(self.n_cols - 1);
        let r0 = gy.floor().to_usize().unwrap_or(0).min(self.n_rows - 1);
        let c1 = (c0 + 1).min(self.n_cols - 1);
        let r1 = (r0 + 1).min(self.n_rows - 1);
        let tx = gx - T::from_usize_lossy(c0);
        let ty = gy - T::from_usize_lossy(r0);
        let one = T::one();
        let corners = [
            (CellIndex::new(c0, r0), (one - tx) * (one - ty)),
            (CellIndex::new(c1, r0), tx * (one - ty)),
            (CellIndex::new(c0, r1), (one - tx) * ty),
            (CellIndex::new(c1, r1), tx * ty),
        ];
        let mut acc = T::zero();
        let mut wsum = T::zero();
        for (c, w) in corners {
            let v = self.at(c);
            if !self.is_nodata_value(v) {
                acc = acc + w * v;
                wsum = wsum + w;
            }
        }
        if wsum <= T::zero() {
            // every weighted corner is nodata; fall back to any valid corner
            return corners.iter().find_map(|&(c, _)| self.valid(c));
        }
        Some(acc / wsum)
    }

    /// Serializes to the ASCII grid format. Values use the shortest
    /// round-trip decimal representation.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 8 + 128);
        let _ = writeln!(s, "ncols {}", self.n_cols);
        let _ = writeln!(s, "nrows {}", self.n_rows);
        let _ = writeln!(s, "xllcorner {}", self.origin.x);
        let _ = writeln!(s, "yllcorner {}", self.origin.y);
        let _ = writeln!(s, "cellsize {}", self.cell_size);
        let _ = writeln!(s, "nodata_value {}", self.nodata);
        for row in self.values.chunks(self.n_cols) {
            let mut first = true;
            for v in row {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_ascii(text: &str) -> Result<Self> {
        const KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];
        let mut header: [Option<&str>; 6] = [None; 6];
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                lines.next();
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let Some(slot) = KEYS.iter().position(|k| k.eq_ignore_ascii_case(key)) else {
                if key.starts_with(|c: char| c.is_ascii_alphabetic()) && !is_number_like(key) {
                    return Err(Error::format(key, "unknown header key"));
                }
                break;
            };
            let value = parts
                .next()
                .ok_or_else(|| Error::format(KEYS[slot], "missing value"))?;
            if parts.next().is_some() {
                return Err(Error::format(KEYS[slot], "trailing tokens"));
            }
            if header[slot].is_some() {
                return Err(Error::format(KEYS[slot], "duplicate key"));
            }
            header[slot] = Some(value);
            lines.next();
        }
        for (i, k) in KEYS.iter().enumerate() {
            if header[i].is_none() {
                return Err(Error::format(*k, "missing header key"));
            }
        }
        let n_cols = parse_count(KEYS[0], header[0].unwrap())?;
        let n_rows = parse_count(KEYS[1], header[1].unwrap())?;
        let xll: T = parse_scalar(KEYS[2], header[2].unwrap())?;
        let yll: T = parse_scalar(KEYS[3], header[3].unwrap())?;
        let cell_size: T = parse_scalar(KEYS[4], header[4].unwrap())?;
        let nodata: T = parse_scalar(KEYS[5], header[5].unwrap())?;
        if n_cols == 0 {
            return Err(Error::format("ncols", "must be positive"));
        }
        if n_rows == 0 {
            return Err(Error::format("nrows", "must be positive"));
        }

        let expected = n_cols * n_rows;
        let mut values = Vec::with_capacity(expected);
        for line in lines {
            for tok in line.split_whitespace() {
                let v: T = tok
                    .parse()
                    .map_err(|_| Error::format("values", format!("cannot parse `{tok}`")))?;
                values.push(v);
            }
        }
        if values.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: values.len(),
            });
        }
        Self::new(n_cols, n_rows, cell_size, Point2::new(xll, yll), nodata, values)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> RasterGrid<U> {
        RasterGrid {
            n_cols: self.n_cols,
            n_rows: self.n_rows,
            cell_size: U::lit(self.cell_size.as_f64()),
            origin: Point2::new(U::lit(self.origin.x.as_f64()), U::lit(self.origin.y.as_f64())),
            nodata: U::lit(self.nodata.as_f64()),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn is_number_like(tok: &str) -> bool {
    matches!(tok.to_ascii_lowercase().as_str(), "nan" | "inf" | "-inf" | "infinity")
}

fn parse_count(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::format(key, format!("expected a non-negative integer, found `{v}`")))
}

fn parse_scalar<T: Scalar>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::format(key, format!("expected a number, found `{v}`")))
}

pub fn load_raster<T: Scalar>(path: impl AsRef<Path>) -> Result<RasterGrid<T>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RasterGrid::from_ascii(&text)
}

pub fn save_raster<T: Scalar>(grid: &RasterGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, grid.to_ascii()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO_BY_TWO: &str = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\nnodata_value -9999\n1 2\n3 4\n";

    #[test]
    fn two_by_two_round_trip_is_bit_identical() {
        let g = RasterGrid::<f64>::from_ascii(TWO_BY_TWO).unwrap();
        assert_eq!((g.n_cols(), g.n_rows()), (2, 2));
        assert_eq!(g.to_ascii(), TWO_BY_TWO);
        // top row is northernmost
        assert_eq!(g.at(CellIndex::new(0, 1)), 1.0);
        assert_eq!(g.at(CellIndex::new(1, 0)), 4.0);
    }

    #[test]
    fn zero_columns_is_a_format_error() {
        let err = RasterGrid::<f64>::from_ascii(&TWO_BY_TWO.replace("ncols 2", "ncols 0")).unwrap_err();
        assert!(matches!(err, Error::Format { ref key, .. } if key == "ncols"), "{err}");
    }

    #[test]
    fn bad_header_value_names_its_key() {
        let err = RasterGrid::<f64>::from_ascii(&TWO_BY_TWO.replace("cellsize 5", "cellsize five")).unwrap_err();
        assert!(matches!(err, Error::Format { ref key, .. } if key == "cellsize"));
        let err = RasterGrid::<f64>::from_ascii(&TWO_BY_TWO.replace("yllcorner 0\n", "")).unwrap_err();
        assert!(matches!(err, Error::Format { ref key, .. } if key == "yllcorner"));
    }

    #[test]
    fn short_value_list_is_truncation() {
        let err = RasterGrid::<f64>::from_ascii(&TWO_BY_TWO.replace("3 4", "3")).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 4, found: 3 }));
    }

    #[test]
    fn world_to_cell_examples() {
        let g = RasterGrid::<f64>::filled(10, 10, 5.0, Point2::new(0.0, 0.0), -9999.0, 0.0).unwrap();
        assert_eq!(g.world_to_cell(Point2::new(0.0, 0.0)), Some(CellIndex::new(0, 0)));
        assert_eq!(g.world_to_cell(Point2::new(12.4, 3.0)), Some(CellIndex::new(2, 0)));
        assert_eq!(g.world_to_cell(Point2::new(-1.0, 0.0)), None);
        assert_eq!(g.world_to_cell(Point2::new(50.0, 1.0)), None);
    }

    #[test]
    fn nodata_is_distinct_from_out_of_bounds() {
        let mut g = RasterGrid::<f64>::filled(3, 3, 1.0, Point2::new(0.0, 0.0), -1.0, 2.0).unwrap();
        g.set(CellIndex::new(1, 1), -1.0);
        assert_eq!(g.get(CellIndex::new(1, 1)), Some(-1.0));
        assert_eq!(g.valid(CellIndex::new(1, 1)), None);
        assert_eq!(g.get(CellIndex::new(3, 1)), None);
    }

    #[test]
    fn bilinear_reproduces_cell_centers_and_midpoints() {
        let vals = vec![0.0, 10.0, 20.0, 30.0];
        let g = RasterGrid::<f64>::new(2, 2, 1.0, Point2::new(0.0, 0.0), -9999.0, vals).unwrap();
        assert_eq!(g.bilinear(Point2::new(0.5, 1.5)), Some(0.0));
        assert_eq!(g.bilinear(Point2::new(1.5, 0.5)), Some(30.0));
        assert_eq!(g.bilinear(Point2::new(1.0, 1.0)), Some(15.0));
    }

    proptest! {
        #[test]
        fn cell_round_trip(n_cols in 1usize..40, n_rows in 1usize..40, cs in 0.5f64..50.0,
                           ox in -1e5f64..1e5, oy in -1e5f64..1e5, fc in 0.0f64..1.0, fr in 0.0f64..1.0) {
            let g = RasterGrid::<f64>::filled(n_cols, n_rows, cs, Point2::new(ox, oy), -9999.0, 0.0).unwrap();
            let c = CellIndex::new(((n_cols as f64) * fc) as usize % n_cols, ((n_rows as f64) * fr) as usize % n_rows);
            prop_assert_eq!(g.world_to_cell(g.cell_to_world(c)), Some(c));
        }

        #[test]
        fn ascii_round_trip(vals in proptest::collection::vec(-1e6f64..1e6, 12), cs in 0.1f64..100.0) {
            let g = RasterGrid::<f64>::new(4, 3, cs, Point2::new(1.25, -7.5), -9999.0, vals).unwrap();
            let back = RasterGrid::<f64>::from_ascii(&g.to_ascii()).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(back.to_ascii(), g.to_ascii());
        }
    }
}
