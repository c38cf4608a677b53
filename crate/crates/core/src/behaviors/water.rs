//! Vector-field following along the overland outflow direction, with
//! probabilistic rejection of steps into sizeable water bodies.

use rand::Rng;

use super::grid::{cell_center, offset_cell, neighbor_offset, turn_aside};
use super::{AgentState, Trace, StepOutcome};
use crate::error::{Error, Result};
use crate::gis::{TerrainStack, WaterSurface};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterCrossingRule<T> {
    /// Catchment value at and above which crossing never happens.
    pub b: T,
}

impl<T: Scalar> Default for WaterCrossingRule<T> {
    fn default() -> Self {
        Self { b: T::lit(8000.0) }
    }
}

impl<T: Scalar> WaterCrossingRule<T> {
    pub fn blocks(&self, surface: WaterSurface) -> bool {
        matches!(surface, WaterSurface::Lake | WaterSurface::Sea | WaterSurface::River)
    }
}

/// Chance of stepping into water whose cumulative catchment is `a`:
/// `1 - min(a / b, 1)`.
pub fn crossing_probability<T: Scalar>(a: T, rule: &WaterCrossingRule<T>) -> Result<T> {
    if a < T::zero() || a.is_nan() {
        return Err(Error::InvalidParameter(format!("catchment must be non-negative, got {a}")));
    }
    Ok(T::one() - (a / rule.b).min(T::one()))
}

/// One grid step of the water behavior. Appends the new vertex to `trace`.
pub fn step_water<T: Scalar, R: Rng + ?Sized>(
    state: &mut AgentState<T>,
    terrain: &TerrainStack<T>,
    rule: &WaterCrossingRule<T>,
    rng: &mut R,
    trace: &mut Trace<T>,
) -> Result<StepOutcome> {
    let grid = terrain.grid();
    let cell = grid.world_to_cell(state.position).ok_or(Error::OutOfBounds {
        x: state.position.x.as_f64(),
        y: state.position.y.as_f64(),
    })?;
    if let Some(dir) = terrain.outflow_dir.valid(cell) {
        state.heading = dir;
    }
    let candidate = offset_cell(grid, cell, neighbor_offset(state.heading));
    let accepted = match candidate {
        None => None,
        Some(next) => {
            let surface = terrain.water_at(next);
            if rule.blocks(surface) {
                let p = crossing_probability(terrain.catchment_at(next), rule)?;
                (rng.random::<f64>() < p.as_f64()).then_some(next)
            } else {
                Some(next)
            }
        }
    };
    let next = match accepted {
        Some(next) => next,
        None => {
            let (next, heading) = turn_aside(grid, cell, state.heading, rng);
            state.heading = heading;
            next
        }
    };
    state.advance(&[cell_center(grid, next)], trace);
    state.steps += 1;
    Ok(StepOutcome::Moved)
}
