//! Shortest paths on travel-time states and dynamic replanning.
//!
//! Dijkstra runs over `(cost, node-sequence)` pairs so equal-cost ties break
//! toward the lexicographically smallest node sequence, deterministically.
//! The replanner advances a vehicle along its current plan with true travel
//! times and re-solves from every intermediate node using the configured
//! state basis (prediction, fusion, or truth).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NodeId, RoadGraph};
use crate::simulator::TrafficState;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("no path from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("travel times must be nonnegative (edge index {0})")]
    NegativeTravelTime(usize),
    #[error("dimension mismatch: {0} travel times for {1} edges")]
    DimensionMismatch(usize, usize),
}

/// A simple directed path as an ordered node list plus its edge mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edge_mask: Vec<bool>,
    pub edge_indices: Vec<usize>,
}

impl Path {
    fn from_nodes(g: &RoadGraph, nodes: Vec<NodeId>) -> Self {
        let mut edge_mask = vec![false; g.edge_count()];
        let mut edge_indices = Vec::with_capacity(nodes.len().saturating_sub(1));
        for w in nodes.windows(2) {
            let k = g
                .index_of(crate::network::Edge::new(w[0], w[1]))
                .expect("consecutive nodes are connected");
            edge_mask[k] = true;
            edge_indices.push(k);
        }
        Path { nodes, edge_mask, edge_indices }
    }

    pub fn cost(&self, travel_times: &[f64]) -> f64 {
        self.edge_indices.iter().map(|&k| travel_times[k]).sum()
    }

    /// `"12-6-4-2-1-8"` style label.
    pub fn label(&self) -> String {
        self.nodes
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Heap entry ordered by (cost, node sequence); BinaryHeap is a max-heap, so
/// the ordering is reversed.
struct Frontier {
    cost: f64,
    nodes: Vec<NodeId>,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.nodes == other.nodes
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.nodes.cmp(&self.nodes))
    }
}

/// Minimal-travel-time simple path from `o` to `d`; ties break to the
/// lexicographically smallest node sequence. `o == d` gives the empty path.
pub fn shortest_path(
    g: &RoadGraph,
    travel_times: &TrafficState,
    o: NodeId,
    d: NodeId,
) -> Result<Path, RoutingError> {
    if !g.contains_node(o) {
        return Err(RoutingError::UnknownNode(o));
    }
    if !g.contains_node(d) {
        return Err(RoutingError::UnknownNode(d));
    }
    if travel_times.len() != g.edge_count() {
        return Err(RoutingError::DimensionMismatch(travel_times.len(), g.edge_count()));
    }
    if let Some(k) = travel_times.values.iter().position(|&v| v < 0.0) {
        return Err(RoutingError::NegativeTravelTime(k));
    }
    if o == d {
        return Ok(Path { nodes: vec![o], edge_mask: vec![false; g.edge_count()], edge_indices: vec![] });
    }

    let mut finalized = BTreeSet::new();
    let mut heap = BinaryHeap::new();
    heap.push(Frontier { cost: 0.0, nodes: vec![o] });
    while let Some(Frontier { cost, nodes }) = heap.pop() {
        let here = *nodes.last().unwrap();
        if here == d {
            return Ok(Path::from_nodes(g, nodes));
        }
        if !finalized.insert(here) {
            continue;
        }
        for &k in g.out_edges(here) {
            let next = g.edge(k).head;
            if finalized.contains(&next) || nodes.contains(&next) {
                continue;
            }
            let mut longer = nodes.clone();
            longer.push(next);
            heap.push(Frontier { cost: cost + travel_times.values[k], nodes: longer });
        }
    }
    Err(RoutingError::Unreachable { from: o, to: d })
}

/// Which state the replanner consults at each decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Prediction,
    Fusion,
    Truth,
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Basis::Prediction => "prediction",
            Basis::Fusion => "fusion",
            Basis::Truth => "truth",
        };
        write!(f, "{s}")
    }
}

/// One recorded route decision.
#[derive(Clone, Debug)]
pub struct RoutePlan {
    pub path: Path,
    pub eta_seconds: f64,
    pub decided_at: u32,
    pub node: NodeId,
    pub basis: Basis,
}

/// The replanning transcript of one trip.
#[derive(Clone, Debug)]
pub struct ReplanOutcome {
    pub plans: Vec<RoutePlan>,
    /// True when the vehicle reached the destination.
    pub reached: bool,
    /// Minute (fractional) of arrival when reached.
    pub arrival_min: Option<f64>,
    /// Set when a decision point had no route to the destination; the plans
    /// recorded so far are kept.
    pub stranded: bool,
}

/// Per-minute edge states the replanner can index.
pub trait StateSeries {
    fn values_at(&self, minute: u32) -> &[f64];
    fn horizon(&self) -> u32;
}

impl StateSeries for [TrafficState] {
    fn values_at(&self, minute: u32) -> &[f64] {
        &self[minute as usize].values
    }

    fn horizon(&self) -> u32 {
        self.len() as u32
    }
}

impl StateSeries for Vec<Vec<f64>> {
    fn values_at(&self, minute: u32) -> &[f64] {
        &self[minute as usize]
    }

    fn horizon(&self) -> u32 {
        self.len() as u32
    }
}

/// Simulates a trip from `o` to `d` starting at `start_min`. The clock
/// advances with true travel times; decisions use the basis series.
pub fn replan_loop<T: StateSeries + ?Sized, B: StateSeries + ?Sized>(
    g: &RoadGraph,
    truth: &T,
    basis_series: &B,
    basis: Basis,
    o: NodeId,
    d: NodeId,
    start_min: u32,
) -> Result<ReplanOutcome, RoutingError> {
    if !g.contains_node(o) {
        return Err(RoutingError::UnknownNode(o));
    }
    if !g.contains_node(d) {
        return Err(RoutingError::UnknownNode(d));
    }
    let last_minute = truth.horizon().saturating_sub(1);
    let mut clock_min = f64::from(start_min);
    let mut node = o;
    let mut plans = Vec::new();
    // A plan change at every node keeps trips finite even under adversarial
    // bases; this bound is generous for simple paths.
    let max_hops = 4 * g.edge_count() + 16;
    for _ in 0..max_hops {
        if node == d {
            return Ok(ReplanOutcome { plans, reached: true, arrival_min: Some(clock_min), stranded: false });
        }
        let minute = (clock_min.floor() as u32).min(last_minute);
        let basis_values = basis_series.values_at(minute.min(basis_series.horizon() - 1));
        let basis_state = TrafficState::new(basis_values.to_vec(), minute);
        let path = match shortest_path(g, &basis_state, node, d) {
            Ok(p) => p,
            Err(RoutingError::Unreachable { .. }) => {
                return Ok(ReplanOutcome { plans, reached: false, arrival_min: None, stranded: true });
            }
            Err(e) => return Err(e),
        };
        let eta_seconds = path.cost(basis_values);
        plans.push(RoutePlan { path: path.clone(), eta_seconds, decided_at: minute, node, basis });
        let first = path.edge_indices[0];
        let tt = truth.values_at(minute)[first];
        clock_min += tt / 60.0;
        node = g.edge(first).head;
    }
    Ok(ReplanOutcome { plans, reached: false, arrival_min: None, stranded: true })
}
