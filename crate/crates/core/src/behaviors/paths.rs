//! Paths behavior: hierarchical nearest-path seeking on the grid, then
//! exploration of the path network with a short memory of visited edges.

use rand::Rng;

use super::grid::{cell_center, step_toward};
use super::{AgentState, Trace, BehaviorParams, Phase, StepOutcome};
use crate::error::{Error, Result};
use crate::geom::{project_on_polyline, Point2};
use crate::gis::{EdgeId, NodeId, PathGraph, TerrainStack};
use crate::scalar::Scalar;

/// Score multiplier of an edge traversed within the memory window.
pub const RECENT_EDGE_SCORE: f64 = 0.1;
pub const FRESH_EDGE_SCORE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestEdge<T> {
    pub edge: EdgeId,
    pub score: u32,
    pub point: Point2<T>,
    pub distance: T,
    pub(crate) segment: usize,
    pub(crate) t: T,
}

/// The `k` edges closest to `m`, nearest first; ties go to the lower edge id.
pub fn nearest_k_edges<T: Scalar>(m: Point2<T>, graph: &PathGraph<T>, k: usize) -> Result<Vec<NearestEdge<T>>> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut all: Vec<NearestEdge<T>> = graph
        .edges()
        .map(|e| {
            let p = project_on_polyline(m, &e.polyline);
            NearestEdge {
                edge: e.id,
                score: e.score,
                point: p.point,
                distance: p.distance,
                segment: p.segment,
                t: p.t,
            }
        })
        .collect();
    all.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.edge.cmp(&b.edge))
    });
    all.truncate(k);
    Ok(all)
}

/// Direction of `Σ (score / d) · û`, û being the unit vector from `m` toward
/// each nearest point.
pub fn weighted_path_angle<T: Scalar>(m: Point2<T>, nearest: &[NearestEdge<T>]) -> Result<T> {
    if nearest.is_empty() {
        return Err(Error::InvalidParameter("no nearest edges".into()));
    }
    let mut sx = T::zero();
    let mut sy = T::zero();
    for n in nearest {
        let d = n.distance;
        if !(d > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "agent lies on edge {}; switch to network traversal",
                n.edge.0
            )));
        }
        let c = T::from_u32(n.score).unwrap() / d;
        let u = n.point.sub(m).scale(T::one() / d);
        sx = sx + c * u.x;
        sy = sy + c * u.y;
    }
    Ok(sy.atan2(sx))
}

/// Splits the edge nearest to `x` and joins both halves at a new node at `x`.
/// Returns the new node and the two halves (toward the original first and
/// second endpoint).
pub fn attach_to_network<T: Scalar>(x: Point2<T>, graph: &mut PathGraph<T>) -> Result<(NodeId, EdgeId, EdgeId)> {
    let nearest = nearest_k_edges(x, graph, 1)?[0];
    let projection = crate::geom::PolylineProjection {
        point: nearest.point,
        distance: nearest.distance,
        segment: nearest.segment,
        t: nearest.t,
    };
    graph.split_edge(nearest.edge, x, &projection)
}

fn is_recent<T>(state: &AgentState<T>, edge: EdgeId, lambda_max: usize) -> bool {
    state
        .recent_edges
        .iter()
        .any(|&(e, step)| e == edge && state.traversals - step < lambda_max)
}

/// Selection probabilities over the edges leaving `node`. Fresh edges score
/// 1, recently traversed ones 0.1. When every incident edge is spent, the
/// arrival edge is offered again so the agent cannot deadlock.
pub fn edge_choice_probabilities<T: Scalar>(
    state: &AgentState<T>,
    graph: &PathGraph<T>,
    node: NodeId,
    lambda_max: usize,
) -> Vec<(EdgeId, f64)> {
    let mut options: Vec<EdgeId> = graph
        .adjacency(node)
        .iter()
        .copied()
        .filter(|&e| graph.edge(e).is_some_and(|e| e.traversable))
        .collect();
    if options.is_empty() {
        options = match state.arrival_edge.filter(|e| graph.adjacency(node).contains(e)) {
            Some(e) => vec![e],
            None => graph.adjacency(node).to_vec(),
        };
    }
    let scores: Vec<f64> = options
        .iter()
        .map(|&e| {
            if is_recent(state, e, lambda_max) {
                RECENT_EDGE_SCORE
            } else {
                FRESH_EDGE_SCORE
            }
        })
        .collect();
    let total: f64 = scores.iter().sum();
    options.into_iter().zip(scores).map(|(e, s)| (e, s / total)).collect()
}

/// Chooses the next edge at the current node and walks its whole polyline.
pub fn traverse_network_step<T: Scalar, R: Rng + ?Sized>(
    state: &mut AgentState<T>,
    graph: &mut PathGraph<T>,
    lambda_max: usize,
    rng: &mut R,
    trace: &mut Trace<T>,
) -> Result<StepOutcome> {
    let Phase::OnNetwork { node } = state.phase else {
        return Err(Error::InvalidParameter("agent is not on the network".into()));
    };
    let probs = edge_choice_probabilities(state, graph, node, lambda_max);
    if probs.is_empty() {
        return Err(Error::Network(format!("node {} has no incident edges", node.0)));
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = probs[probs.len() - 1].0;
    for &(e, p) in &probs {
        acc += p;
        if u < acc {
            chosen = e;
            break;
        }
    }

    let edge = graph.edge_mut(chosen).expect("chosen edge exists");
    let line = edge.polyline_from(node);
    let next = edge.other(node);
    if edge.single_use {
        edge.traversable = false;
    }
    state.advance(&line[1..], trace);
    state.traversals += 1;
    state.recent_edges.push_back((chosen, state.traversals));
    while state
        .recent_edges
        .front()
        .is_some_and(|&(_, step)| state.traversals - step >= lambda_max)
    {
        state.recent_edges.pop_front();
    }
    state.arrival_edge = Some(chosen);
    state.phase = Phase::OnNetwork { node: next };
    Ok(StepOutcome::Moved)
}

/// One step of the paths behavior in either phase.
pub fn step_paths<T: Scalar, R: Rng + ?Sized>(
    state: &mut AgentState<T>,
    terrain: &TerrainStack<T>,
    graph: &mut PathGraph<T>,
    params: &BehaviorParams<T>,
    rng: &mut R,
    trace: &mut Trace<T>,
) -> Result<StepOutcome> {
    if let Phase::OnNetwork { .. } = state.phase {
        return traverse_network_step(state, graph, params.lambda_max, rng, trace);
    }
    let nearest = nearest_k_edges(state.position, graph, params.k_nearest)?;
    if nearest[0].distance <= terrain.cell_size() {
        let (node, _, _) = attach_to_network(state.position, graph)?;
        state.phase = Phase::OnNetwork { node };
        return traverse_network_step(state, graph, params.lambda_max, rng, trace);
    }
    state.heading = weighted_path_angle(state.position, &nearest)?;
    let grid = terrain.grid();
    let cell = grid.world_to_cell(state.position).ok_or(Error::OutOfBounds {
        x: state.position.x.as_f64(),
        y: state.position.y.as_f64(),
    })?;
    let (next, heading) = step_toward(grid, cell, state.heading, rng);
    state.heading = heading;
    state.advance(&[cell_center(grid, next)], trace);
    state.steps += 1;
    Ok(StepOutcome::Moved)
}
