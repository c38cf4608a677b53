//! Undirected path/road network with physical polylines on every edge.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use log::warn;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geom::{polyline_length, project_on_polyline, Point2, PolylineProjection};
use crate::scalar::Scalar;

/// Endpoints closer than this are merged into one junction node.
pub const SNAP_TOLERANCE_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

/// Hierarchy score of a path type.
pub fn score_of_type(path_type: &str) -> u32 {
    match path_type.trim() {
        t if t.eq_ignore_ascii_case("Major road") => 10,
        t if t.eq_ignore_ascii_case("Trunk road") => 5,
        t if t.eq_ignore_ascii_case("Path") => 2,
        _ => 4,
    }
}

fn is_known_type(path_type: &str) -> bool {
    ["Major road", "Trunk road", "Path"]
        .iter()
        .any(|k| k.eq_ignore_ascii_case(path_type.trim()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub id: NodeId,
    pub position: Point2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    pub id: EdgeId,
    pub endpoints: (NodeId, NodeId),
    /// Runs from `endpoints.0` to `endpoints.1`.
    pub polyline: Vec<Point2<T>>,
    pub path_type: String,
    pub score: u32,
    pub traversable: bool,
    /// Set on the two halves of a split edge: they become non-traversable
    /// once an agent has moved along them.
    pub single_use: bool,
}

impl<T: Scalar> Edge<T> {
    pub fn length(&self) -> T {
        polyline_length(&self.polyline)
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if self.endpoints.0 == n {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }

    /// Polyline oriented to start at node `from`.
    pub fn polyline_from(&self, from: NodeId) -> Vec<Point2<T>> {
        let mut line = self.polyline.clone();
        if self.endpoints.0 != from {
            line.reverse();
        }
        line
    }
}

#[derive(Debug, Clone, Default)]
pub struct PathGraph<T> {
    nodes: Vec<Node<T>>,
    /// Indexed by `EdgeId`; removed edges leave a hole so ids stay stable.
    edges: Vec<Option<Edge<T>>>,
    adjacency: Vec<Vec<EdgeId>>,
}

impl<T: Scalar> PathGraph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            adjacency: Vec::new(),
        }
    }

    pub fn add_node(&mut self, position: Point2<T>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { id, position });
        self.adjacency.push(Vec::new());
        id
    }

    /// Adds an edge; the polyline's end vertices are pinned to the node positions.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId, mut polyline: Vec<Point2<T>>, path_type: &str) -> Result<EdgeId> {
        if a == b {
            return Err(Error::Network(format!("self-loop at node {}", a.0)));
        }
        if a.0 >= self.nodes.len() || b.0 >= self.nodes.len() {
            return Err(Error::Network("edge references an unknown node".into()));
        }
        if polyline.len() < 2 {
            return Err(Error::Network("edge polyline needs at least two vertices".into()));
        }
        polyline[0] = self.nodes[a.0].position;
        let last = polyline.len() - 1;
        polyline[last] = self.nodes[b.0].position;
        let id = EdgeId(self.edges.len());
        self.edges.push(Some(Edge {
            id,
            endpoints: (a, b),
            polyline,
            path_type: path_type.to_string(),
            score: score_of_type(path_type),
            traversable: true,
            single_use: false,
        }));
        self.adjacency[a.0].push(id);
        self.adjacency[b.0].push(id);
        Ok(id)
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Option<Edge<T>> {
        let edge = self.edges.get_mut(id.0)?.take()?;
        for n in [edge.endpoints.0, edge.endpoints.1] {
            self.adjacency[n.0].retain(|&e| e != id);
        }
        Some(edge)
    }

    pub fn node(&self, id: NodeId) -> &Node<T> {
        &self.nodes[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge<T>> {
        self.edges.get(id.0).and_then(Option::as_ref)
    }

    pub fn edge_mut(&mut self, id: EdgeId) -> Option<&mut Edge<T>> {
        self.edges.get_mut(id.0).and_then(Option::as_mut)
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    /// Live edges in ascending id order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge<T>> + '_ {
        self.edges.iter().flatten()
    }

    pub fn adjacency(&self, n: NodeId) -> &[EdgeId] {
        &self.adjacency[n.0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count() == 0
    }

    pub fn total_length(&self) -> T {
        self.edges().map(Edge::length).sum()
    }

    /// Splits `edge` at `projection` (a point on its polyline) and connects
    /// both halves to a new node at `x`. Each half starts at `x`; when `x` is
    /// off the polyline a straight connector from `x` to the cut point is
    /// prepended. Returns the new node and the two half-edges, the first
    /// leading back to the original start node.
    pub fn split_edge(
        &mut self,
        edge: EdgeId,
        x: Point2<T>,
        projection: &PolylineProjection<T>,
    ) -> Result<(NodeId, EdgeId, EdgeId)> {
        let original = self
            .edge(edge)
            .cloned()
            .ok_or_else(|| Error::Network(format!("edge {} does not exist", edge.0)))?;
        let line = &original.polyline;
        let cut = projection.point;
        let seg = projection.segment.min(line.len() - 2);
        let eps = T::lit(1e-9);

        // towards the start node, reversed so it begins at the cut point
        let mut head: Vec<Point2<T>> = vec![cut];
        for i in (0..=seg).rev() {
            if line[i].distance(*head.last().unwrap()) > eps {
                head.push(line[i]);
            }
        }
        let mut tail: Vec<Point2<T>> = vec![cut];
        for p in &line[seg + 1..] {
            if p.distance(*tail.last().unwrap()) > eps {
                tail.push(*p);
            }
        }
        if x.distance(cut) > eps {
            head.insert(0, x);
            tail.insert(0, x);
        }
        // degenerate halves (cut exactly on an end vertex) still need two vertices
        if head.len() < 2 {
            head.push(self.nodes[original.endpoints.0 .0].position);
        }
        if tail.len() < 2 {
            tail.push(self.nodes[original.endpoints.1 .0].position);
        }

        self.remove_edge(edge);
        let v = self.add_node(x);
        let minus = self.add_edge(v, original.endpoints.0, head, &original.path_type)?;
        let plus = self.add_edge(v, original.endpoints.1, tail, &original.path_type)?;
        for id in [minus, plus] {
            let e = self.edge_mut(id).unwrap();
            e.score = original.score;
            e.single_use = true;
        }
        Ok((v, minus, plus))
    }

    /// Serializes as a feature collection of LineStrings.
    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .edges()
            .map(|e| {
                let coords: Vec<Value> = e.polyline.iter().map(|p| json!([p.x.as_f64(), p.y.as_f64()])).collect();
                json!({
                    "type": "Feature",
                    "properties": { "path_type": e.path_type },
                    "geometry": { "type": "LineString", "coordinates": coords }
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }

    pub fn from_geojson(doc: &Value) -> Result<Self> {
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Network("missing `features` array".into()))?;
        let mut builder = SnapBuilder::new(T::lit(SNAP_TOLERANCE_M));
        let mut warned: BTreeSet<String> = BTreeSet::new();
        for (index, f) in features.iter().enumerate() {
            let geom = f
                .get("geometry")
                .ok_or_else(|| Error::RejectedFeature { index, reason: "no geometry".into() })?;
            let kind = geom.get("type").and_then(Value::as_str).unwrap_or_default();
            if kind != "LineString" {
                return Err(Error::RejectedFeature {
                    index,
                    reason: format!("geometry type `{kind}` is not LineString"),
                });
            }
            let coords = geom
                .get("coordinates")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::RejectedFeature { index, reason: "no coordinates".into() })?;
            let mut line = Vec::with_capacity(coords.len());
            for c in coords {
                let xy = c.as_array().filter(|a| a.len() >= 2).and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)));
                let Some((x, y)) = xy else {
                    return Err(Error::RejectedFeature { index, reason: "malformed coordinate".into() });
                };
                line.push(Point2::new(T::lit(x), T::lit(y)));
            }
            if line.len() < 2 {
                return Err(Error::RejectedFeature {
                    index,
                    reason: format!("line has {} vertices, need at least 2", line.len()),
                });
            }
            let path_type = f
                .get("properties")
                .and_then(|p| p.get("path_type"))
                .and_then(Value::as_str)
                .unwrap_or("")
                .to_string();
            if !is_known_type(&path_type) && warned.insert(path_type.clone()) {
                warn!("unknown path_type `{path_type}` scored as {}", score_of_type(&path_type));
            }
            builder.add_line(index, line, &path_type)?;
        }
        Ok(builder.graph)
    }
}

pub fn load_path_network<T: Scalar>(path: impl AsRef<Path>) -> Result<PathGraph<T>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Network(e.to_string()))?;
    PathGraph::from_geojson(&doc)
}

pub fn save_path_network<T: Scalar>(graph: &PathGraph<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&graph.to_geojson()).map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Merges line endpoints into shared nodes using a hash of tolerance-sized buckets.
struct SnapBuilder<T> {
    graph: PathGraph<T>,
    tol: T,
    buckets: HashMap<(i64, i64), Vec<NodeId>>,
}

impl<T: Scalar> SnapBuilder<T> {
    fn new(tol: T) -> Self {
        Self {
            graph: PathGraph::new(),
            tol,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: Point2<T>) -> (i64, i64) {
        (
            (p.x / self.tol).floor().to_i64().unwrap_or(i64::MAX),
            (p.y / self.tol).floor().to_i64().unwrap_or(i64::MAX),
        )
    }

    fn node_for(&mut self, p: Point2<T>) -> NodeId {
        let (kx, ky) = self.key(p);
        let mut best: Option<(T, NodeId)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        let d = self.graph.node(id).position.distance(p);
                        if d <= self.tol && best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
                            best = Some((d, id));
                        }
                    }
                }
            }
        }
        if let Some((_, id)) = best {
            return id;
        }
        let id = self.graph.add_node(p);
        self.buckets.entry((kx, ky)).or_default().push(id);
        id
    }

    fn add_line(&mut self, index: usize, line: Vec<Point2<T>>, path_type: &str) -> Result<()> {
        let a = self.node_for(line[0]);
        let b = self.node_for(*line.last().unwrap());
        if a != b {
            self.graph.add_edge(a, b, line, path_type)?;
            return Ok(());
        }
        // closed ring: split at the middle vertex so no edge is a self-loop
        if line.len() < 3 {
            return Err(Error::RejectedFeature {
                index,
                reason: "both endpoints snap to the same node".into(),
            });
        }
        let mid = line.len() / 2;
        let m = self.node_for(line[mid]);
        if m == a {
            return Err(Error::RejectedFeature {
                index,
                reason: "closed line is shorter than the snap tolerance".into(),
            });
        }
        self.graph.add_edge(a, m, line[..=mid].to_vec(), path_type)?;
        self.graph.add_edge(m, a, line[mid..].to_vec(), path_type)?;
        Ok(())
    }
}

/// Bucketed segment index for fixed-radius proximity queries.
#[derive(Debug, Clone)]
pub struct SegmentIndex<T> {
    bucket: T,
    buckets: HashMap<(i64, i64), Vec<(Point2<T>, Point2<T>)>>,
}

impl<T: Scalar> SegmentIndex<T> {
    pub fn new(graph: &PathGraph<T>, bucket: T) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<(Point2<T>, Point2<T>)>> = HashMap::new();
        let key = |v: T| (v / bucket).floor().to_i64().unwrap_or(0);
        for e in graph.edges() {
            for w in e.polyline.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (x0, x1) = (key(a.x.min(b.x)), key(a.x.max(b.x)));
                let (y0, y1) = (key(a.y.min(b.y)), key(a.y.max(b.y)));
                for bx in x0..=x1 {
                    for by in y0..=y1 {
                        buckets.entry((bx, by)).or_default().push((a, b));
                    }
                }
            }
        }
        Self { bucket, buckets }
    }

    /// True when some segment lies within `radius` of `p`.
    pub fn any_within(&self, p: Point2<T>, radius: T) -> bool {
        let key = |v: T| (v / self.bucket).floor().to_i64().unwrap_or(0);
        let (x0, x1) = (key(p.x - radius), key(p.x + radius));
        let (y0, y1) = (key(p.y - radius), key(p.y + radius));
        for bx in x0..=x1 {
            for by in y0..=y1 {
                if let Some(segs) = self.buckets.get(&(bx, by)) {
                    for &(a, b) in segs {
                        let (q, _) = crate::geom::closest_on_segment(p, a, b);
                        if q.distance(p) <= radius {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Distance from `p` to the closest point of an edge.
pub fn distance_to_edge<T: Scalar>(p: Point2<T>, edge: &Edge<T>) -> PolylineProjection<T> {
    project_on_polyline(p, &edge.polyline)
}
