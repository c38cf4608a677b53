//! Raster and vector inputs: grids, terrain stacks, path networks and
//! found-location classification.

mod classify;
mod network;
mod raster;
mod terrain;

pub use classify::{classify_found, FoundClassifier, LandCoverCategory};
pub use network::{
    distance_to_edge, load_path_network, save_path_network, score_of_type, Edge, EdgeId, Node, NodeId, PathGraph,
    SegmentIndex, SNAP_TOLERANCE_M,
};
pub use raster::{load_raster, save_raster, CellIndex, RasterGrid};
pub use terrain::{
    LandCover, TerrainStack, WaterSurface, CATCHMENT_FILE, DEM_FILE, LAND_COVER_FILE, NETWORK_FILE, OUTFLOW_FILE,
    WATER_SURFACE_FILE,
};
