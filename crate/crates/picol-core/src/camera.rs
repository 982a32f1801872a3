//! Tilt-camera action spaces, joint coverage, masking and fusion.
//!
//! A camera at node `i` tilts toward one neighboring node `j` at a time and
//! then covers whichever of the directed edges `(i,j)` and `(j,i)` exist. The
//! joint action of all cameras is the entry-wise OR of their coverage
//! vectors; observation is the entry-wise product of the state with that
//! mask, and fusion overlays the observation on a prediction for the
//! unobserved edges.

use thiserror::Error;

use crate::network::{NetworkError, NodeId, RoadGraph};
use crate::simulator::TrafficState;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// One tilt choice: the neighbor faced and the edges covered.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraAction {
    pub toward: NodeId,
    /// Binary coverage over all edges; 1 or 2 entries set.
    pub mask: Vec<bool>,
    /// Canonical indices of the covered edges.
    pub edges: Vec<usize>,
}

/// All tilt choices of one camera, ordered by neighbor id.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraActionSet {
    pub camera: NodeId,
    pub actions: Vec<CameraAction>,
}

impl CameraActionSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Builds the action set of the camera at `camera_node`: one action per
/// neighboring node, covering the existing directed edges between the two.
pub fn action_set(g: &RoadGraph, camera_node: NodeId) -> Result<CameraActionSet, CameraError> {
    if !g.contains_node(camera_node) {
        return Err(NetworkError::UnknownNode(camera_node).into());
    }
    let neighbors = g.neighbors(camera_node);
    if neighbors.is_empty() {
        return Err(NetworkError::IsolatedNode(camera_node).into());
    }
    let n_edges = g.edge_count();
    let mut actions = Vec::with_capacity(neighbors.len());
    for j in neighbors {
        let mut mask = vec![false; n_edges];
        let mut edges = Vec::new();
        for e in [
            crate::network::Edge::new(camera_node, j),
            crate::network::Edge::new(j, camera_node),
        ] {
            if let Some(k) = g.index_of(e) {
                mask[k] = true;
                edges.push(k);
            }
        }
        actions.push(CameraAction { toward: j, mask, edges });
    }
    Ok(CameraActionSet { camera: camera_node, actions })
}

/// Entry-wise OR of camera coverage vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointAction {
    pub mask: Vec<bool>,
}

impl JointAction {
    pub fn none(n_edges: usize) -> Self {
        JointAction { mask: vec![false; n_edges] }
    }

    pub fn all(n_edges: usize) -> Self {
        JointAction { mask: vec![true; n_edges] }
    }

    pub fn covered_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// ORs one action per camera into the joint coverage mask.
pub fn join<'a>(actions: impl IntoIterator<Item = &'a CameraAction>) -> JointAction {
    let mut mask: Vec<bool> = Vec::new();
    for a in actions {
        if mask.is_empty() {
            mask = a.mask.clone();
        } else {
            for (m, &b) in mask.iter_mut().zip(&a.mask) {
                *m |= b;
            }
        }
    }
    JointAction { mask }
}

/// Masks the state with the joint action: unobserved entries read exactly 0.
pub fn observe(s: &TrafficState, a: &JointAction) -> Result<TrafficState, CameraError> {
    if s.len() != a.mask.len() {
        return Err(CameraError::DimensionMismatch(s.len(), a.mask.len()));
    }
    let values = s
        .values
        .iter()
        .zip(&a.mask)
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    Ok(TrafficState::new(values, s.t))
}

/// Where each fused entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Observed,
    Predicted,
}

/// Observation overlaid on a prediction for the unobserved edges.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionState {
    pub values: Vec<f64>,
    pub provenance: Vec<Provenance>,
    pub t: u32,
}

impl FusionState {
    pub fn as_state(&self) -> TrafficState {
        TrafficState::new(self.values.clone(), self.t)
    }
}

/// `fusion = observation + prediction * (1 - mask)`, with provenance flags
/// taken from the mask. `s_obs` must already be masked by `a`.
pub fn fuse(
    s_obs: &TrafficState,
    pred: &TrafficState,
    a: &JointAction,
) -> Result<FusionState, CameraError> {
    if s_obs.len() != a.mask.len() {
        return Err(CameraError::DimensionMismatch(s_obs.len(), a.mask.len()));
    }
    if pred.len() != a.mask.len() {
        return Err(CameraError::DimensionMismatch(pred.len(), a.mask.len()));
    }
    let mut values = Vec::with_capacity(s_obs.len());
    let mut provenance = Vec::with_capacity(s_obs.len());
    for k in 0..s_obs.len() {
        if a.mask[k] {
            values.push(s_obs.values[k]);
            provenance.push(Provenance::Observed);
        } else {
            values.push(pred.values[k]);
            provenance.push(Provenance::Predicted);
        }
    }
    Ok(FusionState { values, provenance, t: s_obs.t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bundled_graph, Edge, RoadGraph};

    #[test]
    fn action_set_node_1_bundled() {
        let g = bundled_graph();
        let set = action_set(&g, 1).unwrap();
        let towards: Vec<NodeId> = set.actions.iter().map(|a| a.toward).collect();
        assert_eq!(towards, vec![2, 3, 8, 70, 71]);
        let covered = |toward: NodeId| -> Vec<Edge> {
            set.actions
                .iter()
                .find(|a| a.toward == toward)
                .unwrap()
                .edges
                .iter()
                .map(|&k| g.edge(k))
                .collect()
        };
        assert_eq!(covered(2), vec![Edge::new(1, 2), Edge::new(2, 1)]);
        assert_eq!(covered(70), vec![Edge::new(1, 70)]);
        assert_eq!(covered(71), vec![Edge::new(71, 1)]);
        assert_eq!(covered(8), vec![Edge::new(1, 8)]);
        assert_eq!(covered(3), vec![Edge::new(3, 1)]);
    }

    #[test]
    fn single_inbound_edge_gives_one_action() {
        let g = RoadGraph::build(&[(1, 2)]).unwrap();
        let set = action_set(&g, 2).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.actions[0].edges.len(), 1);
    }

    #[test]
    fn isolated_node_rejected() {
        let g = RoadGraph::build(&[(1, 2)]).unwrap();
        assert_eq!(
            action_set(&g, 9),
            Err(CameraError::Network(NetworkError::UnknownNode(9)))
        );
    }

    #[test]
    fn join_disjoint_and_overlapping() {
        let g = bundled_graph();
        let s1 = action_set(&g, 1).unwrap();
        let s2 = action_set(&g, 2).unwrap();
        // Camera 1 toward 2 and camera 2 toward 4: four distinct edges.
        let a = s1.actions.iter().find(|a| a.toward == 2).unwrap();
        let b = s2.actions.iter().find(|a| a.toward == 4).unwrap();
        let joint = join([a, b]);
        assert_eq!(joint.covered_count(), 4);
        // Camera 2 toward 1 covers the same pair as camera 1 toward 2.
        let c = s2.actions.iter().find(|a| a.toward == 1).unwrap();
        let joint = join([a, c]);
        assert_eq!(joint.covered_count(), 2);
        let e = g.index_of(Edge::new(1, 8)).unwrap();
        assert!(!joint.mask[e]);
    }

    #[test]
    fn observe_examples() {
        let s = TrafficState::new(vec![5.0, 3.0], 0);
        let a = JointAction { mask: vec![true, false] };
        assert_eq!(observe(&s, &a).unwrap().values, vec![5.0, 0.0]);
        assert_eq!(observe(&s, &JointAction::all(2)).unwrap().values, s.values);
        assert_eq!(
            observe(&s, &JointAction::none(2)).unwrap().values,
            vec![0.0, 0.0]
        );
        assert!(matches!(
            observe(&s, &JointAction::all(3)),
            Err(CameraError::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn fuse_examples() {
        let obs = TrafficState::new(vec![5.0, 0.0], 0);
        let pred = TrafficState::new(vec![9.0, 4.0], 0);
        let a = JointAction { mask: vec![true, false] };
        let f = fuse(&obs, &pred, &a).unwrap();
        assert_eq!(f.values, vec![5.0, 4.0]);
        assert_eq!(f.provenance, vec![Provenance::Observed, Provenance::Predicted]);

        let all = JointAction::all(2);
        let s = TrafficState::new(vec![5.0, 3.0], 0);
        assert_eq!(fuse(&s, &pred, &all).unwrap().values, s.values);

        let none = JointAction::none(2);
        let zeros = TrafficState::new(vec![0.0, 0.0], 0);
        assert_eq!(fuse(&zeros, &pred, &none).unwrap().values, pred.values);
    }
}
