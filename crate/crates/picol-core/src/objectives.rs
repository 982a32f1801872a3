//! The three task losses and the relative-difference transform.
//!
//! - Network level: fraction of total volume on unobserved edges.
//! - Route level: total travel time along a path (inner product).
//! - Link level: fraction of the total absolute relative volume change on
//!   unobserved edges.
//!
//! Quiet networks make the two fraction losses 0/0; both return 0 with a
//! degenerate flag instead, since nothing was there to miss.

use thiserror::Error;

use crate::camera::JointAction;
use crate::network::RoadGraph;
use crate::simulator::TrafficState;

/// Default denominator floor for per-edge relative differences (veh/h).
pub const DEFAULT_DELTA_FLOOR: f64 = 1.0;
/// Default floor below which a total-change denominator counts as zero.
pub const DEFAULT_NORM_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("mask does not encode a single simple path: {0}")]
    NotAPath(String),
}

/// A loss value plus a flag marking the degenerate zero-denominator case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageLoss {
    pub value: f64,
    pub degenerate: bool,
}

/// Per-edge relative change between two consecutive states, with a floored
/// denominator so quiet edges stay finite.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeDifference {
    pub values: Vec<f64>,
    pub floor: f64,
}

/// `delta[e] = (now[e] - prev[e]) / max(prev[e], floor)`.
pub fn relative_difference(
    prev: &TrafficState,
    now: &TrafficState,
    floor: f64,
) -> Result<RelativeDifference, ObjectiveError> {
    if prev.len() != now.len() {
        return Err(ObjectiveError::DimensionMismatch(prev.len(), now.len()));
    }
    assert!(floor > 0.0, "relative-difference floor must be positive");
    let values = prev
        .values
        .iter()
        .zip(&now.values)
        .map(|(&p, &n)| (n - p) / p.max(floor))
        .collect();
    Ok(RelativeDifference { values, floor })
}

/// Fraction of total volume not captured: `||s*a - s||_1 / ||s||_1`.
///
/// An all-zero state returns 0 with the degenerate flag set.
pub fn loss_network(a: &JointAction, s: &TrafficState) -> Result<CoverageLoss, ObjectiveError> {
    if a.mask.len() != s.len() {
        return Err(ObjectiveError::DimensionMismatch(a.mask.len(), s.len()));
    }
    let total: f64 = s.values.iter().map(|v| v.abs()).sum();
    if total <= 0.0 {
        return Ok(CoverageLoss { value: 0.0, degenerate: true });
    }
    let missed: f64 = s
        .values
        .iter()
        .zip(&a.mask)
        .filter(|(_, &m)| !m)
        .map(|(v, _)| v.abs())
        .sum();
    Ok(CoverageLoss { value: missed / total, degenerate: false })
}

/// Fraction of total absolute relative change on unobserved edges.
pub fn loss_link(
    a: &JointAction,
    delta: &RelativeDifference,
    norm_floor: f64,
) -> Result<CoverageLoss, ObjectiveError> {
    if a.mask.len() != delta.values.len() {
        return Err(ObjectiveError::DimensionMismatch(a.mask.len(), delta.values.len()));
    }
    let total: f64 = delta.values.iter().map(|v| v.abs()).sum();
    if total < norm_floor {
        return Ok(CoverageLoss { value: 0.0, degenerate: true });
    }
    let missed: f64 = delta
        .values
        .iter()
        .zip(&a.mask)
        .filter(|(_, &m)| !m)
        .map(|(v, _)| v.abs())
        .sum();
    Ok(CoverageLoss { value: missed / total, degenerate: false })
}

/// Sum of the state over a coverage mask, `<a, s>`. This is the route-level
/// loss shape; no path structure is assumed here.
pub fn covered_sum(mask: &[bool], s: &TrafficState) -> Result<f64, ObjectiveError> {
    if mask.len() != s.len() {
        return Err(ObjectiveError::DimensionMismatch(mask.len(), s.len()));
    }
    Ok(s.values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v)
        .sum())
}

/// Travel time of the path encoded by `mask` on the travel-time channel.
///
/// The mask must select a single simple directed path (an empty mask is the
/// degenerate origin==destination trip and costs 0).
pub fn loss_route(
    g: &RoadGraph,
    mask: &[bool],
    travel_times: &TrafficState,
) -> Result<f64, ObjectiveError> {
    if mask.len() != g.edge_count() {
        return Err(ObjectiveError::DimensionMismatch(mask.len(), g.edge_count()));
    }
    validate_path_mask(g, mask)?;
    covered_sum(mask, travel_times)
}

fn validate_path_mask(g: &RoadGraph, mask: &[bool]) -> Result<(), ObjectiveError> {
    use std::collections::BTreeMap;
    let selected: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(k, &m)| m.then_some(k))
        .collect();
    if selected.is_empty() {
        return Ok(());
    }
    let mut out: BTreeMap<u32, usize> = BTreeMap::new();
    let mut has_in: BTreeMap<u32, usize> = BTreeMap::new();
    for &k in &selected {
        let e = g.edge(k);
        if out.insert(e.tail, k).is_some() {
            return Err(ObjectiveError::NotAPath(format!(
                "node {} has two outgoing selected edges",
                e.tail
            )));
        }
        *has_in.entry(e.head).or_insert(0) += 1;
    }
    if has_in.values().any(|&c| c > 1) {
        return Err(ObjectiveError::NotAPath("a node has two incoming selected edges".into()));
    }
    let origins: Vec<u32> = out.keys().filter(|n| !has_in.contains_key(n)).copied().collect();
    if origins.len() != 1 {
        return Err(ObjectiveError::NotAPath(format!(
            "expected exactly one origin, found {}",
            origins.len()
        )));
    }
    // Walk from the origin; every selected edge must be used exactly once
    // and no node may repeat.
    let mut visited = std::collections::BTreeSet::new();
    let mut node = origins[0];
    let mut used = 0usize;
    visited.insert(node);
    while let Some(&k) = out.get(&node) {
        node = g.edge(k).head;
        if !visited.insert(node) {
            return Err(ObjectiveError::NotAPath(format!("node {node} repeats")));
        }
        used += 1;
    }
    if used != selected.len() {
        return Err(ObjectiveError::NotAPath("selected edges are disconnected".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bundled_graph, Edge, RoadGraph};

    fn state(values: &[f64]) -> TrafficState {
        TrafficState::new(values.to_vec(), 0)
    }

    #[test]
    fn network_loss_examples() {
        let s = state(&[10.0, 30.0]);
        let a = JointAction { mask: vec![false, true] };
        assert_eq!(loss_network(&a, &s).unwrap().value, 0.25);
        let full = JointAction::all(2);
        assert_eq!(loss_network(&full, &s).unwrap().value, 0.0);
        let zero = state(&[0.0, 0.0]);
        let l = loss_network(&full, &zero).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.degenerate);
    }

    #[test]
    fn network_loss_three_of_four() {
        let s = state(&[1.0, 1.0, 1.0, 1.0]);
        // Every 3-of-4 mask misses exactly one quarter.
        for skip in 0..4 {
            let mask: Vec<bool> = (0..4).map(|k| k != skip).collect();
            let l = loss_network(&JointAction { mask }, &s).unwrap();
            assert!((l.value - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn link_loss_examples() {
        let delta = RelativeDifference { values: vec![0.5, -0.5], floor: 1.0 };
        let a = JointAction { mask: vec![true, false] };
        assert_eq!(loss_link(&a, &delta, DEFAULT_NORM_FLOOR).unwrap().value, 0.5);
        let full = JointAction::all(2);
        assert_eq!(loss_link(&full, &delta, DEFAULT_NORM_FLOOR).unwrap().value, 0.0);
        let still = RelativeDifference { values: vec![0.0, 0.0], floor: 1.0 };
        let l = loss_link(&a, &still, DEFAULT_NORM_FLOOR).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.degenerate);
    }

    #[test]
    fn relative_difference_examples() {
        let d = relative_difference(&state(&[100.0]), &state(&[50.0]), 1.0).unwrap();
        assert_eq!(d.values, vec![-0.5]);
        let d = relative_difference(&state(&[0.0]), &state(&[10.0]), 1.0).unwrap();
        assert_eq!(d.values, vec![10.0]);
        let d = relative_difference(&state(&[3.0, 7.0]), &state(&[3.0, 7.0]), 1.0).unwrap();
        assert_eq!(d.values, vec![0.0, 0.0]);
    }

    #[test]
    fn route_loss_examples() {
        let g = RoadGraph::build(&[(1, 2), (2, 3)]).unwrap();
        let tt = state(&[60.0, 90.0]);
        let one_hop = vec![true, false];
        assert_eq!(loss_route(&g, &one_hop, &tt).unwrap(), 60.0);
        let two_hop = vec![true, true];
        assert_eq!(loss_route(&g, &two_hop, &tt).unwrap(), 150.0);
    }

    #[test]
    fn route_loss_bundled_five_hops() {
        let g = bundled_graph();
        let mut mask = vec![false; g.edge_count()];
        for (t, h) in [(12, 6), (6, 4), (4, 2), (2, 1), (1, 8)] {
            mask[g.index_of(Edge::new(t, h)).unwrap()] = true;
        }
        let tt = TrafficState::new(vec![300.0; g.edge_count()], 0);
        assert_eq!(loss_route(&g, &mask, &tt).unwrap(), 1500.0);
    }

    #[test]
    fn route_loss_rejects_non_paths() {
        let g = bundled_graph();
        // Two disconnected edges.
        let mut mask = vec![false; g.edge_count()];
        mask[g.index_of(Edge::new(1, 2)).unwrap()] = true;
        mask[g.index_of(Edge::new(5, 6)).unwrap()] = true;
        let tt = TrafficState::new(vec![1.0; g.edge_count()], 0);
        assert!(matches!(
            loss_route(&g, &mask, &tt),
            Err(ObjectiveError::NotAPath(_))
        ));
        // A 2-cycle repeats its start node.
        let mut mask = vec![false; g.edge_count()];
        mask[g.index_of(Edge::new(1, 2)).unwrap()] = true;
        mask[g.index_of(Edge::new(2, 1)).unwrap()] = true;
        assert!(matches!(
            loss_route(&g, &mask, &tt),
            Err(ObjectiveError::NotAPath(_))
        ));
    }

    #[test]
    fn empty_mask_is_zero_cost() {
        let g = bundled_graph();
        let tt = TrafficState::new(vec![1.0; g.edge_count()], 0);
        let mask = vec![false; g.edge_count()];
        assert_eq!(loss_route(&g, &mask, &tt).unwrap(), 0.0);
    }

    #[test]
    fn scale_invariance() {
        let s = state(&[3.0, 9.0, 1.0]);
        let scaled = state(&[30.0, 90.0, 10.0]);
        let a = JointAction { mask: vec![true, false, true] };
        let l1 = loss_network(&a, &s).unwrap().value;
        let l2 = loss_network(&a, &scaled).unwrap().value;
        assert!((l1 - l2).abs() < 1e-15);
    }

    #[test]
    fn adding_coverage_never_raises_fraction_losses() {
        let s = state(&[5.0, 2.0, 8.0, 1.0]);
        let delta = RelativeDifference { values: vec![0.1, -0.4, 0.2, 0.9], floor: 1.0 };
        let base = JointAction { mask: vec![false, true, false, false] };
        let more = JointAction { mask: vec![true, true, false, true] };
        assert!(
            loss_network(&more, &s).unwrap().value <= loss_network(&base, &s).unwrap().value
        );
        assert!(
            loss_link(&more, &delta, 1e-9).unwrap().value
                <= loss_link(&base, &delta, 1e-9).unwrap().value
        );
    }
}
