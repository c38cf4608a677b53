//! Agent-based Monte Carlo simulation of lost-person movement over terrain.
//!
//! Simulated paths are sampled with a log-normal mobility-time model into a
//! probability distribution map; sparse place-last-seen data is up-sampled
//! with a Matern-5/2 Gaussian process; found-location categories are scored
//! against reference data with symmetric KL divergence.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the pipeline uses.

pub mod behaviors;
pub mod config;
pub mod error;
pub mod geom;
pub mod gis;
pub mod gp;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod simulation;
pub mod synth;
pub mod viewshed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geom::Point2<f64>;
pub type Raster = gis::RasterGrid<f64>;
pub type Raster32 = gis::RasterGrid<f32>;
pub type Terrain = gis::TerrainStack<f64>;
pub type Network = gis::PathGraph<f64>;
pub type Agent = behaviors::AgentState<f64>;
