//! The four lost-person behaviors and the agent state they advance.

mod grid;
mod paths;
mod viewshed_seek;
mod water;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::gis::{EdgeId, NodeId};
use crate::scalar::Scalar;
use crate::viewshed::ViewshedWeights;

pub use grid::{neighbor_offset, step_toward};
pub use paths::{
    attach_to_network, edge_choice_probabilities, nearest_k_edges, step_paths, traverse_network_step,
    weighted_path_angle, NearestEdge,
};
pub use viewshed_seek::{step_viewshed, HeadingCache};
pub use water::{crossing_probability, step_water, WaterCrossingRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    HeadToWater,
    HeadToBuildings,
    HeadToTrees,
    HeadToPaths,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 4] = [
        BehaviorKind::HeadToPaths,
        BehaviorKind::HeadToBuildings,
        BehaviorKind::HeadToTrees,
        BehaviorKind::HeadToWater,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BehaviorKind::HeadToWater => "head_to_water",
            BehaviorKind::HeadToBuildings => "head_to_buildings",
            BehaviorKind::HeadToTrees => "head_to_trees",
            BehaviorKind::HeadToPaths => "head_to_paths",
        }
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BehaviorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|b| b.name().eq_ignore_ascii_case(s) || b.name()["head_to_".len()..].eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown behavior `{s}`")))
    }
}

/// Selection weights over the behaviors, in [`BehaviorKind::ALL`] order
/// (paths, buildings, trees, water). Need not be normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorMix {
    pub paths: f64,
    pub buildings: f64,
    pub trees: f64,
    pub water: f64,
}

impl Default for BehaviorMix {
    /// Solo-hiker found-location counts per behavior (travel aid and linear
    /// feature merged into paths; open ground carries no behavior).
    fn default() -> Self {
        Self {
            paths: 42.0,
            buildings: 30.0,
            trees: 4.0,
            water: 1.0,
        }
    }
}

impl BehaviorMix {
    pub fn only(kind: BehaviorKind) -> Self {
        let mut m = Self {
            paths: 0.0,
            buildings: 0.0,
            trees: 0.0,
            water: 0.0,
        };
        *m.weight_mut(kind) = 1.0;
        m
    }

    pub fn weight(&self, kind: BehaviorKind) -> f64 {
        match kind {
            BehaviorKind::HeadToPaths => self.paths,
            BehaviorKind::HeadToBuildings => self.buildings,
            BehaviorKind::HeadToTrees => self.trees,
            BehaviorKind::HeadToWater => self.water,
        }
    }

    fn weight_mut(&mut self, kind: BehaviorKind) -> &mut f64 {
        match kind {
            BehaviorKind::HeadToPaths => &mut self.paths,
            BehaviorKind::HeadToBuildings => &mut self.buildings,
            BehaviorKind::HeadToTrees => &mut self.trees,
            BehaviorKind::HeadToWater => &mut self.water,
        }
    }

    /// Normalized selection probabilities in [`BehaviorKind::ALL`] order.
    pub fn probabilities(&self) -> [f64; 4] {
        let w = BehaviorKind::ALL.map(|k| self.weight(k));
        let total: f64 = w.iter().sum();
        w.map(|x| x / total)
    }

    pub fn validate(&self) -> Result<()> {
        let w = BehaviorKind::ALL.map(|k| self.weight(k));
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!("invalid behavior mix {self:?}")));
        }
        Ok(())
    }
}

pub fn select_behavior<R: Rng + ?Sized>(mix: &BehaviorMix, rng: &mut R) -> BehaviorKind {
    let w = BehaviorKind::ALL.map(|k| mix.weight(k));
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = BehaviorKind::ALL[0];
    for (kind, wi) in BehaviorKind::ALL.into_iter().zip(w) {
        if wi <= 0.0 {
            continue;
        }
        acc += wi;
        last = kind;
        if u < acc {
            return kind;
        }
    }
    last
}

/// Tunable behavior parameters.
#[derive(Debug, Clone)]
pub struct BehaviorParams<T> {
    pub water: WaterCrossingRule<T>,
    /// Traversal steps an edge stays "recently visited".
    pub lambda_max: usize,
    /// Edges considered while seeking the network.
    pub k_nearest: usize,
    pub viewshed_radius: T,
    /// Grid steps between viewshed recomputations.
    pub viewshed_cadence: usize,
    pub eye_height: T,
    pub buildings_weights: ViewshedWeights<T>,
    pub trees_weights: ViewshedWeights<T>,
}

impl<T: Scalar> Default for BehaviorParams<T> {
    fn default() -> Self {
        Self {
            water: WaterCrossingRule::default(),
            lambda_max: 5,
            k_nearest: 3,
            viewshed_radius: T::lit(crate::viewshed::DEFAULT_RADIUS_M),
            viewshed_cadence: 10,
            eye_height: T::lit(crate::viewshed::DEFAULT_EYE_HEIGHT_M),
            buildings_weights: ViewshedWeights::head_to_buildings(),
            trees_weights: ViewshedWeights::head_to_trees(),
        }
    }
}

impl<T: Scalar> BehaviorParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.water.b > T::zero()) {
            return Err(Error::Config("water crossing bound b must be positive".into()));
        }
        if self.k_nearest == 0 {
            return Err(Error::Config("k_nearest must be at least 1".into()));
        }
        if self.viewshed_cadence == 0 {
            return Err(Error::Config("viewshed_cadence must be at least 1".into()));
        }
        if !(self.viewshed_radius > T::zero()) {
            return Err(Error::Config("viewshed_radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Seeking,
    OnNetwork { node: NodeId },
}

#[derive(Debug, Clone)]
pub struct AgentState<T> {
    pub position: Point2<T>,
    /// Commanded direction, radians, east = 0, counter-clockwise.
    pub heading: T,
    pub distance_traveled: T,
    pub behavior: BehaviorKind,
    pub phase: Phase,
    /// Edges traversed recently, tagged with their traversal step.
    pub recent_edges: VecDeque<(EdgeId, usize)>,
    /// Completed network traversals.
    pub traversals: usize,
    /// Completed grid steps.
    pub steps: usize,
    pub arrival_edge: Option<EdgeId>,
}

impl<T: Scalar> AgentState<T> {
    pub fn new(position: Point2<T>, behavior: BehaviorKind, heading: T) -> Self {
        Self {
            position,
            heading,
            distance_traveled: T::zero(),
            behavior,
            phase: Phase::Seeking,
            recent_edges: VecDeque::new(),
            traversals: 0,
            steps: 0,
            arrival_edge: None,
        }
    }

    /// Moves through `vertices` in order, accumulating their length.
    pub(crate) fn advance(&mut self, vertices: &[Point2<T>], trace: &mut Trace<T>) {
        for &v in vertices {
            self.distance_traveled = self.distance_traveled + self.position.distance(v);
            self.position = v;
            trace.vertices.push(v);
            trace.cumulative.push(self.distance_traveled);
        }
    }
}

/// Vertices emitted by an agent with the running distance at each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace<T> {
    pub vertices: Vec<Point2<T>>,
    pub cumulative: Vec<T>,
}

impl<T: Scalar> Trace<T> {
    pub fn starting_at(p: Point2<T>) -> Self {
        Self {
            vertices: vec![p],
            cumulative: vec![T::zero()],
        }
    }

    pub fn clear(&mut self) {
        self.vertices.clear();
        self.cumulative.clear();
    }
}

/// Result of one behavior step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Moved,
    /// The behavior reached its goal and the path ends here.
    Terminated,
}
