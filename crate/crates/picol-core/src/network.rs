//! Directed road network with canonical edge indexing.
//!
//! Nodes are intersections, directed edges are road segments. Every edge gets
//! a stable integer index assigned by sorting the edge list lexicographically
//! by `(tail, head)`, so policies, traces and metrics line up across runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type NodeId = u32;

/// A directed road segment from `tail` to `head`. Serializes as the
/// `"tail-head"` string used throughout the CSV and config formats.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse::<Edge>().map_err(D::Error::custom)
    }
}

impl Edge {
    pub fn new(tail: NodeId, head: NodeId) -> Self {
        Edge { tail, head }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.tail, self.head)
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.tail, self.head)
    }
}

impl FromStr for Edge {
    type Err = NetworkError;

    /// Parses the `tail-head` form used in CSV headers, e.g. `"2-1"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tail, head) = s
            .split_once('-')
            .ok_or_else(|| NetworkError::BadEdgeName(s.to_string()))?;
        let parse = |p: &str| {
            p.trim()
                .parse::<NodeId>()
                .map_err(|_| NetworkError::BadEdgeName(s.to_string()))
        };
        Ok(Edge::new(parse(tail)?, parse(head)?))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("edge list is empty")]
    EmptyGraph,
    #[error("duplicate directed edge {0}")]
    DuplicateEdge(Edge),
    #[error("self-loop {0} is forbidden")]
    SelfLoop(Edge),
    #[error("unknown edge {0}")]
    UnknownEdge(Edge),
    #[error("node {0} has no incident edge")]
    IsolatedNode(NodeId),
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("cannot parse edge name {0:?} (expected tail-head)")]
    BadEdgeName(String),
    #[error("malformed graph file: {0}")]
    MalformedFile(String),
}

/// Immutable directed graph with a canonical `edge <-> index` bijection.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadGraph {
    nodes: BTreeSet<NodeId>,
    edges: Vec<Edge>,
    index: BTreeMap<Edge, usize>,
    out_edges: BTreeMap<NodeId, Vec<usize>>,
    in_edges: BTreeMap<NodeId, Vec<usize>>,
}

impl RoadGraph {
    /// Builds a graph from a list of directed `(tail, head)` pairs.
    ///
    /// Edge indices are assigned by sorted `(tail, head)` order regardless of
    /// the input order, so two permutations of the same list produce the same
    /// graph.
    pub fn build(edge_list: &[(NodeId, NodeId)]) -> Result<Self, NetworkError> {
        if edge_list.is_empty() {
            return Err(NetworkError::EmptyGraph);
        }
        let mut edges: Vec<Edge> = Vec::with_capacity(edge_list.len());
        for &(tail, head) in edge_list {
            let e = Edge::new(tail, head);
            if tail == head {
                return Err(NetworkError::SelfLoop(e));
            }
            edges.push(e);
        }
        edges.sort();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(NetworkError::DuplicateEdge(w[0]));
            }
        }

        let mut nodes = BTreeSet::new();
        let mut index = BTreeMap::new();
        let mut out_edges: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        let mut in_edges: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (k, e) in edges.iter().enumerate() {
            nodes.insert(e.tail);
            nodes.insert(e.head);
            index.insert(*e, k);
            out_edges.entry(e.tail).or_default().push(k);
            in_edges.entry(e.head).or_default().push(k);
        }
        Ok(RoadGraph { nodes, edges, index, out_edges, in_edges })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    /// Edges in canonical index order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> Edge {
        self.edges[k]
    }

    pub fn index_of(&self, e: Edge) -> Option<usize> {
        self.index.get(&e).copied()
    }

    pub fn require_index(&self, e: Edge) -> Result<usize, NetworkError> {
        self.index_of(e).ok_or(NetworkError::UnknownEdge(e))
    }

    /// Indices of edges leaving `node`, in canonical order.
    pub fn out_edges(&self, node: NodeId) -> &[usize] {
        self.out_edges.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Indices of edges entering `node`, in canonical order.
    pub fn in_edges(&self, node: NodeId) -> &[usize] {
        self.in_edges.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Nodes joined to `node` by an edge in either direction, ascending.
    pub fn neighbors(&self, node: NodeId) -> Vec<NodeId> {
        let mut out = BTreeSet::new();
        for &k in self.out_edges(node) {
            out.insert(self.edges[k].head);
        }
        for &k in self.in_edges(node) {
            out.insert(self.edges[k].tail);
        }
        out.into_iter().collect()
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.out_edges(node).len() + self.in_edges(node).len()
    }

    /// Reads a graph from CSV with header `tail,head`, one edge per row.
    pub fn from_csv(text: &str) -> Result<Self, NetworkError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| NetworkError::MalformedFile("empty file".into()))?;
        let header_norm = header.replace(' ', "");
        if header_norm.trim() != "tail,head" {
            return Err(NetworkError::MalformedFile(format!(
                "expected header 'tail,head', got {header:?}"
            )));
        }
        let mut list = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (t, h) = match (fields.next(), fields.next(), fields.next()) {
                (Some(t), Some(h), None) => (t, h),
                _ => {
                    return Err(NetworkError::MalformedFile(format!(
                        "line {}: expected two fields",
                        i + 1
                    )))
                }
            };
            let parse = |p: &str| {
                p.trim().parse::<NodeId>().map_err(|_| {
                    NetworkError::MalformedFile(format!("line {}: bad node id {p:?}", i + 1))
                })
            };
            list.push((parse(t)?, parse(h)?));
        }
        RoadGraph::build(&list)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tail,head\n");
        for e in &self.edges {
            s.push_str(&format!("{},{}\n", e.tail, e.head));
        }
        s
    }

    pub fn from_csv_file(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetworkError::MalformedFile(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }
}

/// Edge-level adjacency with self-connections: `A~(e,f) = 1` iff `f == e` or
/// `head(e) == tail(f)`.
#[derive(Clone, Debug)]
pub struct EdgeAdjacency {
    matrix: Array2<f64>,
    degrees: Vec<f64>,
}

impl EdgeAdjacency {
    pub fn new(g: &RoadGraph) -> Self {
        let n = g.edge_count();
        let mut matrix = Array2::<f64>::zeros((n, n));
        for (e, edge) in g.edges().iter().enumerate() {
            matrix[(e, e)] = 1.0;
            for &f in g.out_edges(edge.head) {
                matrix[(e, f)] = 1.0;
            }
        }
        let degrees = matrix.rows().into_iter().map(|r| r.sum()).collect();
        EdgeAdjacency { matrix, degrees }
    }

    /// The binary matrix `A~ = A + I`.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Row sums of `A~`; at least 1 everywhere thanks to the self-connection.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Row-normalized propagation matrix `D~^-1 A~` (rows sum to 1).
    pub fn normalized(&self) -> Array2<f64> {
        let mut m = self.matrix.clone();
        for (mut row, &d) in m.rows_mut().into_iter().zip(&self.degrees) {
            row.mapv_inplace(|x| x / d);
        }
        m
    }
}

/// Subset of nodes that host a tilt camera.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CameraPlacement {
    nodes: Vec<NodeId>,
}

impl CameraPlacement {
    /// Validates that every camera node exists and has an incident edge.
    pub fn new(g: &RoadGraph, mut nodes: Vec<NodeId>) -> Result<Self, NetworkError> {
        nodes.sort_unstable();
        nodes.dedup();
        for &n in &nodes {
            if !g.contains_node(n) {
                return Err(NetworkError::UnknownNode(n));
            }
            if g.degree(n) == 0 {
                return Err(NetworkError::IsolatedNode(n));
            }
        }
        Ok(CameraPlacement { nodes })
    }

    /// Default placement: the `count` highest-out-degree nodes, ties broken
    /// by smaller node id. This is a convention, not ground truth about any
    /// particular deployment.
    pub fn by_out_degree(g: &RoadGraph, count: usize) -> Self {
        let mut ranked: Vec<NodeId> = g.nodes().collect();
        ranked.sort_by_key(|&n| (std::cmp::Reverse(g.out_edges(n).len()), n));
        let mut nodes: Vec<NodeId> = ranked.into_iter().take(count).collect();
        nodes.sort_unstable();
        CameraPlacement { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reads a placement from CSV with header `node`, one node id per row.
    pub fn from_csv(g: &RoadGraph, text: &str) -> Result<Self, NetworkError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| NetworkError::MalformedFile("empty file".into()))?;
        if header.trim() != "node" {
            return Err(NetworkError::MalformedFile(format!(
                "expected header 'node', got {header:?}"
            )));
        }
        let mut nodes = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let n = line.trim().parse::<NodeId>().map_err(|_| {
                NetworkError::MalformedFile(format!("line {}: bad node id {line:?}", i + 1))
            })?;
            nodes.push(n);
        }
        CameraPlacement::new(g, nodes)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("node\n");
        for n in &self.nodes {
            s.push_str(&format!("{n}\n"));
        }
        s
    }
}

/// The bundled 19-edge demonstration network.
pub fn bundled_edge_list() -> Vec<(NodeId, NodeId)> {
    vec![
        (1, 2),
        (1, 70),
        (1, 8),
        (2, 1),
        (2, 4),
        (2, 10),
        (3, 1),
        (4, 2),
        (4, 3),
        (4, 6),
        (5, 3),
        (5, 6),
        (6, 4),
        (6, 12),
        (71, 1),
        (9, 2),
        (10, 2),
        (11, 5),
        (12, 6),
    ]
}

/// The bundled network as a built graph.
pub fn bundled_graph() -> RoadGraph {
    RoadGraph::build(&bundled_edge_list()).expect("bundled edge list is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_edge_cycle_indexing() {
        let g = RoadGraph::build(&[(1, 2), (2, 1)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.index_of(Edge::new(1, 2)), Some(0));
        assert_eq!(g.index_of(Edge::new(2, 1)), Some(1));
    }

    #[test]
    fn bundled_network_shape() {
        let g = bundled_graph();
        assert_eq!(g.edge_count(), 19);
        assert_eq!(g.node_count(), 13);
        // Node 1 touches six edges.
        assert_eq!(g.degree(1), 6);
    }

    #[test]
    fn self_loop_rejected() {
        assert_eq!(
            RoadGraph::build(&[(1, 1)]),
            Err(NetworkError::SelfLoop(Edge::new(1, 1)))
        );
    }

    #[test]
    fn duplicates_and_empty_rejected() {
        assert_eq!(
            RoadGraph::build(&[(1, 2), (1, 2)]),
            Err(NetworkError::DuplicateEdge(Edge::new(1, 2)))
        );
        assert_eq!(RoadGraph::build(&[]), Err(NetworkError::EmptyGraph));
    }

    #[test]
    fn canonical_order_is_input_order_independent() {
        let a = RoadGraph::build(&[(2, 1), (1, 2), (1, 8)]).unwrap();
        let b = RoadGraph::build(&[(1, 8), (1, 2), (2, 1)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edges(), &[Edge::new(1, 2), Edge::new(1, 8), Edge::new(2, 1)]);
    }

    #[test]
    fn adjacency_two_edge_cycle() {
        let g = RoadGraph::build(&[(1, 2), (2, 1)]).unwrap();
        let adj = EdgeAdjacency::new(&g);
        assert_eq!(adj.matrix(), &ndarray::arr2(&[[1.0, 1.0], [1.0, 1.0]]));
        assert_eq!(adj.degrees(), &[2.0, 2.0]);
    }

    #[test]
    fn adjacency_single_edge() {
        let g = RoadGraph::build(&[(1, 2)]).unwrap();
        let adj = EdgeAdjacency::new(&g);
        assert_eq!(adj.matrix(), &ndarray::arr2(&[[1.0]]));
    }

    #[test]
    fn adjacency_bundled_row_4_2() {
        let g = bundled_graph();
        let adj = EdgeAdjacency::new(&g);
        let e = g.index_of(Edge::new(4, 2)).unwrap();
        // head(4-2) = 2, so the row has ones at itself and at 2-1, 2-4, 2-10.
        let expected: Vec<usize> = [(4, 2), (2, 1), (2, 4), (2, 10)]
            .iter()
            .map(|&(t, h)| g.index_of(Edge::new(t, h)).unwrap())
            .collect();
        for f in 0..g.edge_count() {
            let want = if expected.contains(&f) { 1.0 } else { 0.0 };
            assert_eq!(adj.matrix()[(e, f)], want, "entry ({e},{f})");
        }
    }

    #[test]
    fn graph_csv_round_trip() {
        let g = bundled_graph();
        let csv = g.to_csv();
        let back = RoadGraph::from_csv(&csv).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn default_placement_by_out_degree() {
        let g = bundled_graph();
        let p = CameraPlacement::by_out_degree(&g, 6);
        // Out-degrees: 1,2,4 have 3; 5,6 have 2; the degree-1 tie goes to 3.
        assert_eq!(p.nodes(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn placement_rejects_unknown_node() {
        let g = bundled_graph();
        assert!(matches!(
            CameraPlacement::new(&g, vec![1, 99]),
            Err(NetworkError::UnknownNode(99))
        ));
    }

    #[test]
    fn placement_csv() {
        let g = bundled_graph();
        let p = CameraPlacement::from_csv(&g, "node\n1\n4\n2\n").unwrap();
        assert_eq!(p.nodes(), &[1, 2, 4]);
    }

    #[test]
    fn neighbors_sorted() {
        let g = bundled_graph();
        assert_eq!(g.neighbors(1), vec![2, 3, 8, 70, 71]);
    }
}
