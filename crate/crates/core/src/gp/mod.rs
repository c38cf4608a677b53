//! Gaussian-process up-sampling of a sparse place-last-seen heatmap and a
//! start-location sampler over the resulting surface.

mod kernel;
mod kiss;
mod train;

pub use kernel::{matern25, matern25_of_r, max_slope_unit, Matern52};
pub use kiss::{kiss_interp_weights, InducingLattice, LATTICE_PADDING};
pub use train::{Fit, GpHyper, InferenceMethod, TrainConfig, GRAM_JITTER, LATTICE_JITTER, MAX_NONFINITE};

use log::warn;
use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::gis::{CellIndex, RasterGrid};
use crate::scalar::Scalar;
use train::{adam_ascent, multi_start, ExactObjective, KissObjective, Objective};

/// Affine maps between raw heatmap values/coordinates and the unit range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub z_min: f64,
    pub z_max: f64,
    pub x_min: f64,
    pub x_span: f64,
    pub y_min: f64,
    pub y_span: f64,
    /// Every valid cell had the same value; normalized values are all 0.5.
    pub constant: bool,
}

impl Normalization {
    pub fn value(&self, z: f64) -> f64 {
        if self.constant {
            0.5
        } else {
            (z - self.z_min) / (self.z_max - self.z_min)
        }
    }

    pub fn value_back(&self, z: f64) -> f64 {
        if self.constant {
            self.z_min
        } else {
            z * (self.z_max - self.z_min) + self.z_min
        }
    }

    pub fn point(&self, x: f64, y: f64) -> [f64; 2] {
        [(x - self.x_min) / self.x_span, (y - self.y_min) / self.y_span]
    }
}

/// Heatmap with values and cell-center coordinates mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedHeatmap<T> {
    pub grid: RasterGrid<T>,
    pub record: Normalization,
}

pub fn normalize_heatmap<T: Scalar>(raw: &RasterGrid<T>) -> Result<NormalizedHeatmap<T>> {
    let valid: Vec<f64> = raw.cells().filter_map(|c| raw.valid(c)).map(|v| v.as_f64()).collect();
    if valid.is_empty() {
        return Err(Error::EmptyInput("heatmap has no valid cells".into()));
    }
    let z_min = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let z_max = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let constant = z_max == z_min;
    if constant {
        warn!("heatmap is constant ({z_min}); normalizing every cell to 0.5");
    }
    let cs = raw.cell_size().as_f64();
    let o = raw.origin();
    let span = |n: usize| if n > 1 { (n - 1) as f64 * cs } else { cs };
    let record = Normalization {
        z_min,
        z_max,
        x_min: o.x.as_f64() + 0.5 * cs,
        x_span: span(raw.n_cols()),
        y_min: o.y.as_f64() + 0.5 * cs,
        y_span: span(raw.n_rows()),
        constant,
    };
    let nodata = raw.nodata();
    let grid = raw.map(|v| {
        if raw.is_nodata_value(v) {
            nodata
        } else {
            T::lit(record.value(v.as_f64()))
        }
    });
    Ok(NormalizedHeatmap { grid, record })
}

impl<T: Scalar> NormalizedHeatmap<T> {
    pub fn denormalize(&self) -> RasterGrid<T> {
        self.grid.map(|v| {
            if self.grid.is_nodata_value(v) {
                v
            } else {
                T::lit(self.record.value_back(v.as_f64()))
            }
        })
    }

    /// Valid cells in row-major file order (north row first).
    pub fn training_cells(&self) -> Vec<CellIndex> {
        let g = &self.grid;
        (0..g.n_rows())
            .rev()
            .flat_map(|row| (0..g.n_cols()).map(move |col| CellIndex::new(col, row)))
            .filter(|&c| !g.is_nodata(c))
            .collect()
    }

    /// Normalized coordinates and targets of the training set.
    pub fn training_set(&self) -> (Vec<[f64; 2]>, Vec<f64>) {
        self.training_cells()
            .into_iter()
            .map(|c| {
                let p = self.grid.cell_to_world(c);
                (self.record.point(p.x.as_f64(), p.y.as_f64()), self.grid.at(c).as_f64())
            })
            .unzip()
    }
}

/// A Matern-5/2 GP conditioned on a normalized heatmap.
#[derive(Debug, Clone)]
pub struct GpModel<T> {
    pub hyper: GpHyper,
    pub method: InferenceMethod,
    pub lattice: Option<InducingLattice>,
    pub data: NormalizedHeatmap<T>,
    /// MLL after each accepted optimizer step of the winning start.
    pub mll_history: Vec<f64>,
    pub final_mll: Option<f64>,
    points: Vec<[f64; 2]>,
    /// Exact: `(K + σ²I)⁻¹ y` per training point. Lattice: `K_UU Wᵀα` per inducing point.
    weights: Vec<f64>,
    trained: bool,
}

fn lattice_for<T: Scalar>(data: &NormalizedHeatmap<T>, config: &TrainConfig) -> Result<InducingLattice> {
    // reach half a training cell past the outer centers so posterior grids
    // covering the full extent stay inside the stencil
    let hx = 0.5 * data.grid.cell_size().as_f64() / data.record.x_span;
    let hy = 0.5 * data.grid.cell_size().as_f64() / data.record.y_span;
    InducingLattice::covering([-hx, -hy], [1.0 + hx, 1.0 + hy], config.lattice_points)
}

impl<T: Scalar> GpModel<T> {
    /// Model holding data and hyperparameters but no posterior yet.
    pub fn untrained(data: NormalizedHeatmap<T>, hyper: GpHyper) -> Self {
        Self {
            hyper,
            method: InferenceMethod::Exact,
            lattice: None,
            data,
            mll_history: Vec::new(),
            final_mll: None,
            points: Vec::new(),
            weights: Vec::new(),
            trained: false,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Conditions on the data at fixed hyperparameters, without optimizing.
    pub fn condition(data: NormalizedHeatmap<T>, hyper: GpHyper, config: &TrainConfig) -> Result<Self> {
        hyper.validate()?;
        let (points, y) = data.training_set();
        if points.len() < 2 {
            return Err(Error::EmptyInput(format!("need at least 2 training points, found {}", points.len())));
        }
        let mut model = Self::untrained(data, hyper);
        if points.len() <= config.exact_max_points {
            let yv = DVector::from_column_slice(&y);
            let obj = ExactObjective { points: &points, y: &yv };
            model.weights = obj.alpha(&hyper)?.iter().copied().collect();
            model.final_mll = obj.eval(hyper.to_log()).map(|r| r.0);
            model.points = points;
        } else {
            let lattice = lattice_for(&model.data, config)?;
            let obj = KissObjective::new(&points, &y, &lattice)?;
            let s = obj
                .solve(&hyper)
                .ok_or_else(|| Error::Numerical("lattice solve failed at the given hyperparameters".into()))?;
            model.weights = (&s.k_uu * &s.a).iter().copied().collect();
            model.final_mll = Some(s.mll);
            model.points = obj.lattice_points;
            model.method = InferenceMethod::Kiss;
            model.lattice = Some(lattice);
        }
        model.trained = true;
        Ok(model)
    }

    /// Posterior mean in normalized units at a normalized coordinate.
    pub fn mean_normalized(&self, q: [f64; 2]) -> Result<f64> {
        if !self.trained {
            return Err(Error::InvalidParameter("GP model has not been trained".into()));
        }
        let k = self.hyper.kernel()?;
        match &self.lattice {
            None => Ok(self.points.iter().zip(&self.weights).map(|(&p, w)| k.eval(q, p) * w).sum()),
            Some(l) => Ok(kiss_interp_weights(q, l)?.iter().map(|&(i, w)| w * self.weights[i]).sum()),
        }
    }

    /// Posterior mean in raw units at a world position (not floored).
    pub fn mean_at(&self, p: Point2<T>) -> Result<f64> {
        let q = self.data.record.point(p.x.as_f64(), p.y.as_f64());
        Ok(self.data.record.value_back(self.mean_normalized(q)?))
    }

    pub fn noise_std(&self) -> f64 {
        self.hyper.noise.sqrt()
    }
}

/// Fits hyperparameters by maximizing the marginal likelihood, then conditions.
pub fn train<T: Scalar>(data: NormalizedHeatmap<T>, config: &TrainConfig) -> Result<GpModel<T>> {
    config.validate()?;
    let (points, y) = data.training_set();
    if points.len() < 2 {
        return Err(Error::EmptyInput(format!("need at least 2 training points, found {}", points.len())));
    }
    let fit = if points.len() <= config.exact_max_points {
        let yv = DVector::from_column_slice(&y);
        multi_start(&ExactObjective { points: &points, y: &yv }, &y, config)?
    } else {
        let obj = KissObjective::new(&points, &y, &lattice_for(&data, config)?)?;
        multi_start(&obj, &y, config)?
    };
    let mut model = GpModel::condition(data, fit.hyper, config)?;
    model.mll_history = fit.history;
    model.final_mll = Some(fit.mll);
    Ok(model)
}

/// Runs a single optimizer pass from explicit hyperparameters on the exact
/// objective; exposed for diagnostics and tests.
pub fn fit_exact_from<T: Scalar>(data: &NormalizedHeatmap<T>, init: GpHyper, config: &TrainConfig) -> Result<Fit> {
    init.validate()?;
    let (points, y) = data.training_set();
    let yv = DVector::from_column_slice(&y);
    adam_ascent(&ExactObjective { points: &points, y: &yv }, init.to_log(), config.iterations, config.learning_rate)
}

/// Exact log marginal likelihood of the data under fixed hyperparameters.
pub fn exact_mll<T: Scalar>(data: &NormalizedHeatmap<T>, hyper: GpHyper) -> Result<f64> {
    hyper.validate()?;
    let (points, y) = data.training_set();
    let yv = DVector::from_column_slice(&y);
    ExactObjective { points: &points, y: &yv }
        .eval(hyper.to_log())
        .map(|r| r.0)
        .ok_or_else(|| Error::Numerical("marginal likelihood is not finite".into()))
}

/// Lattice-approximated log marginal likelihood under fixed hyperparameters.
pub fn kiss_mll<T: Scalar>(data: &NormalizedHeatmap<T>, hyper: GpHyper, lattice_points: [usize; 2]) -> Result<f64> {
    hyper.validate()?;
    let cfg = TrainConfig {
        lattice_points,
        ..TrainConfig::default()
    };
    let (points, y) = data.training_set();
    KissObjective::new(&points, &y, &lattice_for(data, &cfg)?)?
        .solve(&hyper)
        .map(|s| s.mll)
        .ok_or_else(|| Error::Numerical("marginal likelihood is not finite".into()))
}

/// Posterior mean over the training extent at `out_cell_size`, in raw units,
/// floored at 0.
pub fn posterior_grid<T: Scalar>(model: &GpModel<T>, out_cell_size: T) -> Result<RasterGrid<T>> {
    if !model.is_trained() {
        return Err(Error::InvalidParameter("GP model has not been trained".into()));
    }
    if !(out_cell_size > T::zero()) {
        return Err(Error::InvalidParameter(format!("output cell size must be positive, got {out_cell_size}")));
    }
    let src = &model.data.grid;
    let cols = (src.width() / out_cell_size).round().to_usize().unwrap_or(0).max(1);
    let rows = (src.height() / out_cell_size).round().to_usize().unwrap_or(0).max(1);
    let mut out = RasterGrid::filled(cols, rows, out_cell_size, src.origin(), src.nodata(), T::zero())?;
    for c in out.cells().collect::<Vec<_>>() {
        let v = model.mean_at(out.cell_to_world(c))?;
        out.set(c, T::lit(v.max(0.0)));
    }
    Ok(out)
}

/// Draws `n` cell centers with probability proportional to the (non-negative,
/// non-nodata) cell values.
pub fn sample_pls<T: Scalar, R: Rng + ?Sized>(grid: &RasterGrid<T>, n: usize, rng: &mut R) -> Result<Vec<Point2<T>>> {
    let cells: Vec<CellIndex> = grid.cells().collect();
    let weights: Vec<f64> = cells
        .iter()
        .map(|&c| grid.valid(c).map(|v| v.as_f64()).filter(|v| *v > 0.0 && v.is_finite()).unwrap_or(0.0))
        .collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|_| Error::EmptyInput("start-location surface has no positive mass".into()))?;
    Ok((0..n).map(|_| grid.cell_to_world(cells[dist.sample(rng)])).collect())
}

/// Plain-text record of a trained model: hyperparameters plus a reference to
/// the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: InferenceMethod,
    pub length_scale: [f64; 2],
    pub output_scale: f64,
    pub noise: f64,
    pub final_mll: Option<f64>,
    pub lattice_points: Option<[usize; 2]>,
    pub normalization: Normalization,
    pub training_data: String,
    pub training_sha256: String,
}

impl ModelFile {
    pub fn describe<T: Scalar>(model: &GpModel<T>, training_data: String, training_sha256: String) -> Self {
        Self {
            method: model.method,
            length_scale: model.hyper.length_scale,
            output_scale: model.hyper.output_scale,
            noise: model.hyper.noise,
            final_mll: model.final_mll,
            lattice_points: model.lattice.as_ref().map(|l| [l.shape[0] - 2 * LATTICE_PADDING, l.shape[1] - 2 * LATTICE_PADDING]),
            normalization: model.data.record,
            training_data,
            training_sha256,
        }
    }

    pub fn hyper(&self) -> GpHyper {
        GpHyper {
            length_scale: self.length_scale,
            output_scale: self.output_scale,
            noise: self.noise,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(vals: &[f64], cols: usize) -> RasterGrid<f64> {
        let rows = vals.len() / cols;
        let mut g = RasterGrid::filled(cols, rows, 100.0, Point2::new(0.0, 0.0), -9999.0, 0.0).unwrap();
        g.values_mut().copy_from_slice(vals);
        g
    }

    #[test]
    fn normalizes_affinely() {
        let n = normalize_heatmap(&grid(&[0.0, 5.0, 10.0], 3)).unwrap();
        assert_eq!(n.grid.values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalization_is_idempotent() {
        let g = grid(&[0.0, 0.25, 1.0, 0.5], 2);
        assert_eq!(normalize_heatmap(&g).unwrap().grid, g);
    }

    #[test]
    fn constant_heatmap_goes_to_midpoint() {
        let n = normalize_heatmap(&grid(&[3.0; 4], 2)).unwrap();
        assert!(n.grid.values().iter().all(|&v| v == 0.5));
        assert_eq!(n.denormalize().values(), &[3.0; 4]);
    }

    #[test]
    fn all_nodata_is_empty_input() {
        assert!(matches!(normalize_heatmap(&grid(&[-9999.0; 4], 2)), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn single_cell_sampling() {
        let g = grid(&[0.0, 0.0, 2.0, 0.0], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = g.cell_to_world(CellIndex::new(0, 0));
        assert!(sample_pls(&g, 50, &mut rng).unwrap().iter().all(|&p| p == target));
    }

    #[test]
    fn zero_mass_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_pls(&grid(&[0.0, -1.0], 2), 1, &mut rng).is_err());
    }

    #[test]
    fn untrained_model_has_no_posterior() {
        let data = normalize_heatmap(&grid(&[0.0, 1.0, 2.0, 3.0], 2)).unwrap();
        let hyper = GpHyper {
            length_scale: [0.5, 0.5],
            output_scale: 1.0,
            noise: 0.01,
        };
        let m = GpModel::untrained(data, hyper);
        assert!(posterior_grid(&m, 20.0).is_err());
    }

    #[test]
    fn model_file_round_trips() {
        let data = normalize_heatmap(&grid(&[0.0, 1.0, 2.0, 3.0], 2)).unwrap();
        let hyper = GpHyper {
            length_scale: [0.5, 0.4],
            output_scale: 1.3,
            noise: 0.01,
        };
        let m = GpModel::condition(data, hyper, &TrainConfig::default()).unwrap();
        let f = ModelFile::describe(&m, "heat.asc".into(), "ab".into());
        assert_eq!(ModelFile::from_toml(&f.to_toml().unwrap()).unwrap(), f);
    }
}
