//! Run configuration: one TOML file, every field optional, defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::behaviors::{BehaviorKind, BehaviorMix, BehaviorParams, WaterCrossingRule};
use crate::error::{Error, Result};
use crate::gp::TrainConfig;
use crate::sampling::{MobilityModel, DEFAULT_SAMPLES_PER_PATH};
use crate::simulation::SimConfig;
use crate::viewshed::{ViewshedWeights, DEFAULT_EYE_HEIGHT_M, DEFAULT_RADIUS_M};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub simulation: SimulationSection,
    pub behavior: BehaviorSection,
    pub gp: GpSection,
    pub sampling: SamplingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub d_max: f64,
    pub n_gen: usize,
    pub paths_per_start: usize,
    /// Start jitter covariance around each place last seen, m².
    pub start_sigma: [[f64; 2]; 2],
    pub max_steps: usize,
    /// Run every path with this behavior instead of drawing from the mix.
    pub behavior_override: Option<BehaviorKind>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimConfig::<f64>::default();
        Self {
            d_max: d.d_max,
            n_gen: d.n_gen,
            paths_per_start: d.paths_per_start,
            start_sigma: d.start_sigma,
            max_steps: d.max_steps,
            behavior_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorSection {
    pub mix: BehaviorMix,
    pub lambda_max: usize,
    pub k_nearest: usize,
    pub viewshed_radius: f64,
    pub viewshed_cadence: usize,
    pub eye_height: f64,
    /// Catchment value at which water crossing becomes impossible.
    pub water_b: f64,
    /// Optional `name = weight` tables replacing the built-in ones.
    pub buildings_weights: Option<PathBuf>,
    pub trees_weights: Option<PathBuf>,
}

impl Default for BehaviorSection {
    fn default() -> Self {
        let p = BehaviorParams::<f64>::default();
        Self {
            mix: BehaviorMix::default(),
            lambda_max: p.lambda_max,
            k_nearest: p.k_nearest,
            viewshed_radius: DEFAULT_RADIUS_M,
            viewshed_cadence: p.viewshed_cadence,
            eye_height: DEFAULT_EYE_HEIGHT_M,
            water_b: p.water.b,
            buildings_weights: None,
            trees_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSection {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Cell size of the up-sampled surface, meters.
    pub out_cell_size: f64,
}

impl Default for GpSection {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            out_cell_size: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub samples_per_path: usize,
    /// PDM cell size; the terrain cell size when unset.
    pub pdm_cell_size: Option<f64>,
    pub mobility: MobilityModel,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            samples_per_path: DEFAULT_SAMPLES_PER_PATH,
            pdm_cell_size: None,
            mobility: MobilityModel::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Reads a TOML config, or the config snapshot inside a run manifest
    /// (`.json`), so a manifest can be replayed directly.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let cfg = v
                .get("config")
                .ok_or_else(|| Error::Config(format!("{} has no `config` entry", path.display())))?;
            let c: Self = serde_json::from_value(cfg.clone()).map_err(|e| Error::Config(e.to_string()))?;
            c.validate()?;
            return Ok(c);
        }
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config()?.validate()?;
        self.gp.train.validate()?;
        if !(self.gp.out_cell_size > 0.0) {
            return Err(Error::Config("gp.out_cell_size must be positive".into()));
        }
        if self.sampling.samples_per_path == 0 {
            return Err(Error::Config("sampling.samples_per_path must be at least 1".into()));
        }
        if self.sampling.pdm_cell_size.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("sampling.pdm_cell_size must be positive".into()));
        }
        self.sampling.mobility.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn behavior_params(&self) -> Result<BehaviorParams<f64>> {
        let b = &self.behavior;
        let load = |p: &Option<PathBuf>, default: ViewshedWeights<f64>| match p {
            Some(p) => ViewshedWeights::load(p),
            None => Ok(default),
        };
        Ok(BehaviorParams {
            water: WaterCrossingRule { b: b.water_b },
            lambda_max: b.lambda_max,
            k_nearest: b.k_nearest,
            viewshed_radius: b.viewshed_radius,
            viewshed_cadence: b.viewshed_cadence,
            eye_height: b.eye_height,
            buildings_weights: load(&b.buildings_weights, ViewshedWeights::head_to_buildings())?,
            trees_weights: load(&b.trees_weights, ViewshedWeights::head_to_trees())?,
        })
    }

    pub fn sim_config(&self) -> Result<SimConfig<f64>> {
        let s = &self.simulation;
        Ok(SimConfig {
            d_max: s.d_max,
            n_gen: s.n_gen,
            seed: self.seed,
            paths_per_start: s.paths_per_start,
            start_sigma: s.start_sigma,
            mix: s.behavior_override.map(BehaviorMix::only).unwrap_or(self.behavior.mix),
            behavior: self.behavior_params()?,
            max_steps: s.max_steps,
        })
    }
}
