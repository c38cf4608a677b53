//! Buildings and trees behaviors: steer toward the most attractive visible
//! land cover, stop on reaching the goal cover.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::Rng;

use super::grid::{cell_center, step_toward};
use super::{AgentState, Trace, BehaviorKind, BehaviorParams, StepOutcome};
use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::gis::{CellIndex, LandCover, TerrainStack};
use crate::scalar::Scalar;
use crate::viewshed::{compute_viewshed, max_weight_visible_cells, mean_angle};

fn goal_cover(kind: BehaviorKind) -> Result<LandCover> {
    match kind {
        BehaviorKind::HeadToBuildings => Ok(LandCover::Urban),
        BehaviorKind::HeadToTrees => Ok(LandCover::Woodland),
        other => Err(Error::InvalidParameter(format!("{other} is not a viewshed behavior"))),
    }
}

/// Headings toward the best visible cover as seen from each cell center,
/// shared by all agents on one terrain with one parameter set. The value is
/// a pure function of the cell, so sharing it cannot change any path.
#[derive(Debug, Default)]
pub struct HeadingCache<T> {
    map: RwLock<HashMap<(CellIndex, BehaviorKind), Option<T>>>,
}

impl<T: Scalar> HeadingCache<T> {
    pub fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn viewshed_heading<T: Scalar>(
    position: Point2<T>,
    cell: CellIndex,
    terrain: &TerrainStack<T>,
    params: &BehaviorParams<T>,
    kind: BehaviorKind,
) -> Result<Option<T>> {
    let weights = match kind {
        BehaviorKind::HeadToBuildings => &params.buildings_weights,
        _ => &params.trees_weights,
    };
    let grid = terrain.grid();
    let mask = compute_viewshed(&terrain.dem, cell, params.viewshed_radius, params.eye_height)?;
    let targets: Vec<Point2<T>> = max_weight_visible_cells(&mask, &terrain.land_cover, weights)
        .into_iter()
        .filter(|&c| c != cell)
        .map(|c| cell_center(grid, c))
        .collect();
    Ok(mean_angle(position, &targets))
}

/// One grid step of a viewshed behavior. Pass a [`HeadingCache`] built for
/// this terrain and `params` to skip recomputing viewsheds from cells that
/// have been seen before.
pub fn step_viewshed<T: Scalar, R: Rng + ?Sized>(
    state: &mut AgentState<T>,
    terrain: &TerrainStack<T>,
    params: &BehaviorParams<T>,
    cache: Option<&HeadingCache<T>>,
    rng: &mut R,
    trace: &mut Trace<T>,
) -> Result<StepOutcome> {
    let goal = goal_cover(state.behavior)?;
    let grid = terrain.grid();
    let cell = grid.world_to_cell(state.position).ok_or(Error::OutOfBounds {
        x: state.position.x.as_f64(),
        y: state.position.y.as_f64(),
    })?;
    if terrain.land_cover_at(cell) == Some(goal) {
        return Ok(StepOutcome::Terminated);
    }

    if state.steps.is_multiple_of(params.viewshed_cadence) && terrain.dem.valid(cell).is_some() {
        let kind = state.behavior;
        // bearings are taken from the agent, so only cell-center positions share results
        let cacheable = cache.filter(|_| state.position == cell_center(grid, cell));
        let cached = cacheable.and_then(|c| c.map.read().ok().and_then(|m| m.get(&(cell, kind)).copied()));
        let angle = match cached {
            Some(a) => a,
            None => {
                let a = viewshed_heading(state.position, cell, terrain, params, kind)?;
                if let Some(c) = cacheable {
                    if let Ok(mut m) = c.map.write() {
                        m.insert((cell, kind), a);
                    }
                }
                a
            }
        };
        if let Some(angle) = angle {
            state.heading = angle;
        }
    }

    let (next, heading) = step_toward(grid, cell, state.heading, rng);
    state.heading = heading;
    state.advance(&[cell_center(grid, next)], trace);
    state.steps += 1;
    Ok(StepOutcome::Moved)
}
