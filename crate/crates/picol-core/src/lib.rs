//! Online-learning control of tilt cameras over a simulated road network.
//!
//! The crate is organized around a small set of building blocks:
//!
//! - [`network`]: directed road graph with canonical edge indexing and
//!   edge-level adjacency.
//! - [`simulator`]: seeded generator of per-edge traffic traces (volume and
//!   travel time) with injectable lane-closure incidents, plus CSV replay.
//! - [`camera`]: tilt-camera action spaces, joint coverage masks, observation
//!   masking and observation/prediction fusion.
//! - [`objectives`]: the three task losses (network flow capture, route
//!   travel time, link change detection).
//! - [`controller`]: exponential-weights policies — centralized EW,
//!   per-camera correlated EW, and the predictive fusion loop with
//!   ε-exploration.
//! - [`predictor`]: the forecasting contract, three reference predictors and
//!   graph-convolution / attention forward kernels.
//! - [`routing`]: shortest paths on travel-time states and dynamic
//!   replanning.
//! - [`metrics`]: hourly and per-edge error scores, detection delay, sign
//!   tests.
//! - [`harness`]: scenario configs, the run loop, persisted run logs and
//!   run comparison.

pub mod camera;
pub mod controller;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod objectives;
pub mod predictor;
pub mod routing;
pub mod simulator;

pub(crate) mod textio;

pub use camera::{CameraAction, CameraActionSet, FusionState, JointAction, Provenance};
pub use controller::{ControlMode, ControllerConfig, PolicySet, TaskLoss};
pub use network::{CameraPlacement, Edge, EdgeAdjacency, NodeId, RoadGraph};
pub use predictor::{PredictionBatch, Predictor};
pub use simulator::{Channel, GeneratorConfig, IncidentSpec, Trace, TrafficState};
