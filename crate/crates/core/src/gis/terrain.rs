//! The five co-registered rasters the agents move over.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::raster::{load_raster, CellIndex, RasterGrid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Land cover legend. Raster values hold the numeric ID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum LandCover {
    AcidGrassland = 1,
    ArableHorticulture = 2,
    Bog = 3,
    CalcareousGrassland = 4,
    FenMarshSwamp = 5,
    Heather = 6,
    HeatherGrassland = 7,
    ImprovedGrassland = 8,
    NeutralGrassland = 9,
    Rock = 10,
    Saltmarsh = 11,
    Urban = 12,
    Water = 13,
    Woodland = 14,
}

impl LandCover {
    pub const ALL: [LandCover; 14] = [
        LandCover::AcidGrassland,
        LandCover::ArableHorticulture,
        LandCover::Bog,
        LandCover::CalcareousGrassland,
        LandCover::FenMarshSwamp,
        LandCover::Heather,
        LandCover::HeatherGrassland,
        LandCover::ImprovedGrassland,
        LandCover::NeutralGrassland,
        LandCover::Rock,
        LandCover::Saltmarsh,
        LandCover::Urban,
        LandCover::Water,
        LandCover::Woodland,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: i64) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| i64::from(c.id()) == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            LandCover::AcidGrassland => "Acid grassland",
            LandCover::ArableHorticulture => "Arable and horticulture",
            LandCover::Bog => "Bog",
            LandCover::CalcareousGrassland => "Calcareous grassland",
            LandCover::FenMarshSwamp => "Fen, Marsh, Swamp",
            LandCover::Heather => "Heather",
            LandCover::HeatherGrassland => "Heather grassland",
            LandCover::ImprovedGrassland => "Improved grassland",
            LandCover::NeutralGrassland => "Neutral grassland",
            LandCover::Rock => "Rock",
            LandCover::Saltmarsh => "Saltmarsh",
            LandCover::Urban => "Urban",
            LandCover::Water => "Water",
            LandCover::Woodland => "Woodland",
        }
    }

    /// Accepts the display name (case-insensitive) or the numeric ID.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(id) = s.parse::<i64>() {
            return Self::from_id(id);
        }
        Self::ALL.iter().copied().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

/// Water surface raster codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaterSurface {
    None = 0,
    Lake = 1,
    Sea = 2,
    River = 3,
}

impl WaterSurface {
    pub fn from_code(code: i64) -> Self {
        match code {
            1 => WaterSurface::Lake,
            2 => WaterSurface::Sea,
            3 => WaterSurface::River,
            _ => WaterSurface::None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_water(self) -> bool {
        !matches!(self, WaterSurface::None)
    }
}

/// DEM, land cover, catchment, water surface type and outflow direction on a
/// single shared grid.
#[derive(Debug, Clone)]
pub struct TerrainStack<T> {
    pub dem: RasterGrid<T>,
    pub land_cover: RasterGrid<T>,
    pub catchment: RasterGrid<T>,
    pub water_surface: RasterGrid<T>,
    /// Overland flow direction in radians, east = 0, counter-clockwise.
    pub outflow_dir: RasterGrid<T>,
}

pub const DEM_FILE: &str = "dem.asc";
pub const LAND_COVER_FILE: &str = "land_cover.asc";
pub const CATCHMENT_FILE: &str = "catchment.asc";
pub const WATER_SURFACE_FILE: &str = "water_surface.asc";
pub const OUTFLOW_FILE: &str = "outflow_dir.asc";
pub const NETWORK_FILE: &str = "network.geojson";

impl<T: Scalar> TerrainStack<T> {
    pub fn new(
        dem: RasterGrid<T>,
        land_cover: RasterGrid<T>,
        catchment: RasterGrid<T>,
        water_surface: RasterGrid<T>,
        outflow_dir: RasterGrid<T>,
    ) -> Result<Self> {
        for (name, g) in [
            ("land_cover", &land_cover),
            ("catchment", &catchment),
            ("water_surface", &water_surface),
            ("outflow_dir", &outflow_dir),
        ] {
            if !dem.is_aligned_with(g) {
                return Err(Error::Misaligned(format!(
                    "{name} is {}x{} @ {} from ({}, {}), dem is {}x{} @ {} from ({}, {})",
                    g.n_cols(),
                    g.n_rows(),
                    g.cell_size(),
                    g.origin().x,
                    g.origin().y,
                    dem.n_cols(),
                    dem.n_rows(),
                    dem.cell_size(),
                    dem.origin().x,
                    dem.origin().y
                )));
            }
        }
        if let Some(bad) = catchment
            .values()
            .iter()
            .find(|&&v| !catchment.is_nodata_value(v) && v < T::zero())
        {
            return Err(Error::InvalidParameter(format!("negative catchment value {bad}")));
        }
        Ok(Self {
            dem,
            land_cover,
            catchment,
            water_surface,
            outflow_dir,
        })
    }

    /// Loads the five rasters from a directory using the standard file names.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::new(
            load_raster(dir.join(DEM_FILE))?,
            load_raster(dir.join(LAND_COVER_FILE))?,
            load_raster(dir.join(CATCHMENT_FILE))?,
            load_raster(dir.join(WATER_SURFACE_FILE))?,
            load_raster(dir.join(OUTFLOW_FILE))?,
        )
    }

    pub fn grid(&self) -> &RasterGrid<T> {
        &self.dem
    }

    pub fn cell_size(&self) -> T {
        self.dem.cell_size()
    }

    pub fn land_cover_at(&self, c: CellIndex) -> Option<LandCover> {
        self.land_cover
            .valid(c)
            .and_then(|v| v.round().to_i64())
            .and_then(LandCover::from_id)
    }

    pub fn water_at(&self, c: CellIndex) -> WaterSurface {
        self.water_surface
            .valid(c)
            .and_then(|v| v.round().to_i64())
            .map(WaterSurface::from_code)
            .unwrap_or(WaterSurface::None)
    }

    pub fn catchment_at(&self, c: CellIndex) -> T {
        self.catchment.valid(c).unwrap_or(T::zero())
    }
}
