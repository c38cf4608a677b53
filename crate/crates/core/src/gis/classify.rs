//! Found-location land cover categories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::network::{PathGraph, SegmentIndex};
use super::terrain::{LandCover, TerrainStack};
use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandCoverCategory {
    OpenGround,
    Road,
    Building,
    Trees,
    Water,
}

impl LandCoverCategory {
    pub const ALL: [LandCoverCategory; 5] = [
        LandCoverCategory::OpenGround,
        LandCoverCategory::Road,
        LandCoverCategory::Building,
        LandCoverCategory::Trees,
        LandCoverCategory::Water,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LandCoverCategory::OpenGround => "open_ground",
            LandCoverCategory::Road => "road",
            LandCoverCategory::Building => "building",
            LandCoverCategory::Trees => "trees",
            LandCoverCategory::Water => "water",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LandCoverCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LandCoverCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::CategoryMismatch(format!("unknown category `{s}`")))
    }
}

/// Classifies points against a terrain stack and path network.
///
/// A point within one cell size of any path polyline is `road`; otherwise
/// water surface or water land cover gives `water`, Urban gives `building`,
/// Woodland gives `trees`, and everything else is `open_ground`.
pub struct FoundClassifier<'a, T> {
    terrain: &'a TerrainStack<T>,
    roads: SegmentIndex<T>,
    road_radius: T,
}

impl<'a, T: Scalar> FoundClassifier<'a, T> {
    pub fn new(terrain: &'a TerrainStack<T>, graph: &PathGraph<T>) -> Self {
        let cs = terrain.cell_size();
        Self {
            terrain,
            roads: SegmentIndex::new(graph, cs * T::lit(8.0)),
            road_radius: cs,
        }
    }

    pub fn classify(&self, p: Point2<T>) -> Result<LandCoverCategory> {
        let cell = self.terrain.grid().world_to_cell(p).ok_or(Error::OutOfBounds {
            x: p.x.as_f64(),
            y: p.y.as_f64(),
        })?;
        if self.roads.any_within(p, self.road_radius) {
            return Ok(LandCoverCategory::Road);
        }
        let cover = self.terrain.land_cover_at(cell);
        if self.terrain.water_at(cell).is_water() || cover == Some(LandCover::Water) {
            return Ok(LandCoverCategory::Water);
        }
        Ok(match cover {
            Some(LandCover::Urban) => LandCoverCategory::Building,
            Some(LandCover::Woodland) => LandCoverCategory::Trees,
            _ => LandCoverCategory::OpenGround,
        })
    }
}

/// One-off classification; build a [`FoundClassifier`] for many points.
pub fn classify_found<T: Scalar>(p: Point2<T>, terrain: &TerrainStack<T>, graph: &PathGraph<T>) -> Result<LandCoverCategory> {
    FoundClassifier::new(terrain, graph).classify(p)
}
