//! Scenario configuration: one self-contained TOML file per scenario.
//!
//! All file paths inside a config are resolved relative to the config file's
//! directory. Validation reports field-level messages; the route-coverage
//! check (every edge on a candidate o->d path coverable by some camera)
//! produces warnings rather than errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::{action_set, CameraActionSet};
use crate::controller::{ControlMode, ControllerConfig, TaskLoss};
use crate::network::{bundled_graph, CameraPlacement, NodeId, RoadGraph};
use crate::simulator::{Channel, GeneratorConfig, IncidentSpec, Trace};
use crate::textio::fnv1a64;

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Network,
    Route,
    Link,
}

impl Scenario {
    pub fn channel(self) -> Channel {
        match self {
            Scenario::Network | Scenario::Link => Channel::Volume,
            Scenario::Route => Channel::TravelTime,
        }
    }

    pub fn task(self) -> TaskLoss {
        match self {
            Scenario::Network => TaskLoss::NetworkCapture,
            Scenario::Route => TaskLoss::RouteCoverage,
            Scenario::Link => TaskLoss::link(),
        }
    }

    /// Exploration defaults: none for flow capture, 0.3 for the route and
    /// link tasks.
    pub fn default_epsilon(self) -> f64 {
        match self {
            Scenario::Network => 0.0,
            Scenario::Route | Scenario::Link => 0.3,
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::Network => "network",
            Scenario::Route => "route",
            Scenario::Link => "link",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedSpec {
    pub start: u64,
    pub count: u64,
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec { start: 0, count: 20 }
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        (self.start..self.start + self.count).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerSection {
    pub mode: ControlMode,
    pub gamma: f64,
    /// `None` picks the scenario default (0 for network, 0.3 otherwise).
    pub epsilon: Option<f64>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection { mode: ControlMode::Picol, gamma: 1.0, epsilon: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Persistence,
    Seasonal,
    GraphDiffusion,
    /// Returns the true future states; diagnostic use only.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSection {
    pub kind: PredictorKind,
    pub lambda: f64,
    pub hops: usize,
    /// Number of incident-free days generated for fitting.
    pub training_days: u64,
    /// First seed of the training traces.
    pub training_seed: u64,
    /// Period (in window steps) for the seasonal predictor.
    pub seasonal_period: usize,
    /// Optional pre-fitted parameter file (JSON); skips training.
    pub params_path: Option<PathBuf>,
}

impl Default for PredictorSection {
    fn default() -> Self {
        PredictorSection {
            kind: PredictorKind::GraphDiffusion,
            lambda: 1e-3,
            hops: 2,
            training_days: 20,
            training_seed: 9000,
            seasonal_period: 12,
            params_path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceSource {
    Generate,
    Replay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSection {
    pub source: TraceSource,
    pub replay_dir: Option<PathBuf>,
    pub generate: GeneratorConfig,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection {
            source: TraceSource::Generate,
            replay_dir: None,
            generate: GeneratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteSection {
    pub origin: NodeId,
    pub destination: NodeId,
    pub start_min: u32,
}

/// One scenario: everything needed to reproduce a set of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Graph CSV path; `None` uses the bundled 19-edge network.
    pub graph: Option<PathBuf>,
    /// Camera placement CSV; `None` places cameras on the highest
    /// out-degree nodes.
    pub cameras: Option<PathBuf>,
    pub camera_count: usize,
    pub horizon_minutes: u32,
    pub warmup_minutes: u32,
    pub aggregation_minutes: u32,
    /// Predictor window K.
    pub window: usize,
    pub seeds: SeedSpec,
    /// Policy dump cadence in minutes; 0 disables checkpoints.
    pub policy_checkpoint_minutes: u32,
    pub controller: ControllerSection,
    pub predictor: PredictorSection,
    pub trace: TraceSection,
    pub incidents: Vec<IncidentSpec>,
    pub route: Option<RouteSection>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::Network,
            graph: None,
            cameras: None,
            camera_count: 6,
            horizon_minutes: 1440,
            warmup_minutes: 60,
            aggregation_minutes: 5,
            window: 12,
            seeds: SeedSpec::default(),
            policy_checkpoint_minutes: 60,
            controller: ControllerSection::default(),
            predictor: PredictorSection::default(),
            trace: TraceSection::default(),
            incidents: Vec::new(),
            route: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid {
            field: "toml".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Stable fingerprint over the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        fnv1a64(json.as_bytes())
    }

    /// Loads referenced files and checks every field, with `base_dir` as the
    /// anchor for relative paths.
    pub fn resolve(&self, base_dir: &Path) -> Result<ResolvedScenario, HarnessError> {
        let invalid = |field: &str, message: String| HarnessError::ConfigInvalid {
            field: field.into(),
            message,
        };

        let graph = match &self.graph {
            Some(p) => RoadGraph::from_csv_file(&base_dir.join(p))
                .map_err(|e| invalid("graph", e.to_string()))?,
            None => bundled_graph(),
        };

        let placement = match &self.cameras {
            Some(p) => {
                let text = std::fs::read_to_string(base_dir.join(p))
                    .map_err(|e| invalid("cameras", e.to_string()))?;
                CameraPlacement::from_csv(&graph, &text)
                    .map_err(|e| invalid("cameras", e.to_string()))?
            }
            None => {
                if self.camera_count == 0 {
                    return Err(invalid("camera_count", "must be at least 1".into()));
                }
                CameraPlacement::by_out_degree(&graph, self.camera_count)
            }
        };
        let action_sets: Vec<CameraActionSet> = placement
            .nodes()
            .iter()
            .map(|&n| action_set(&graph, n))
            .collect::<Result<_, _>>()
            .map_err(|e| invalid("cameras", e.to_string()))?;

        if self.aggregation_minutes == 0 {
            return Err(invalid("aggregation_minutes", "must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(invalid("window", "must be at least 1".into()));
        }
        let needed = self.window as u32 * self.aggregation_minutes;
        if self.warmup_minutes < needed {
            return Err(invalid(
                "warmup_minutes",
                format!(
                    "must be >= window * aggregation_minutes = {needed}, got {}",
                    self.warmup_minutes
                ),
            ));
        }
        if self.horizon_minutes <= self.warmup_minutes {
            return Err(invalid(
                "horizon_minutes",
                format!(
                    "must exceed warmup_minutes {}, got {}",
                    self.warmup_minutes, self.horizon_minutes
                ),
            ));
        }
        if self.seeds.count == 0 {
            return Err(invalid("seeds.count", "must be at least 1".into()));
        }

        let epsilon = self
            .controller
            .epsilon
            .unwrap_or_else(|| self.scenario.default_epsilon());
        let controller = ControllerConfig {
            gamma: self.controller.gamma,
            epsilon,
            mode: self.controller.mode,
        };
        controller
            .validate()
            .map_err(|e| invalid("controller", e.to_string()))?;

        if let PredictorKind::Seasonal = self.predictor.kind {
            let p = self.predictor.seasonal_period;
            if p == 0 || p > self.window {
                return Err(invalid(
                    "predictor.seasonal_period",
                    format!("must be in 1..={}, got {p}", self.window),
                ));
            }
        }
        if self.predictor.lambda < 0.0 {
            return Err(invalid("predictor.lambda", "must be >= 0".into()));
        }
        if matches!(self.predictor.kind, PredictorKind::GraphDiffusion)
            && self.predictor.params_path.is_none()
            && self.predictor.training_days == 0
        {
            return Err(invalid("predictor.training_days", "must be at least 1".into()));
        }

        let mut generator = self.trace.generate.clone();
        generator.horizon_minutes = self.horizon_minutes;
        let replay = match self.trace.source {
            TraceSource::Generate => None,
            TraceSource::Replay => {
                let dir = self.trace.replay_dir.as_ref().ok_or_else(|| {
                    invalid("trace.replay_dir", "required when source = \"replay\"".into())
                })?;
                let trace = crate::simulator::replay_trace(&base_dir.join(dir))
                    .map_err(|e| invalid("trace.replay_dir", e.to_string()))?;
                if trace.edges != graph.edges() {
                    return Err(invalid(
                        "trace.replay_dir",
                        "trace edges do not match the graph".into(),
                    ));
                }
                if trace.horizon() < self.horizon_minutes {
                    return Err(invalid(
                        "trace.replay_dir",
                        format!(
                            "trace has {} minutes, horizon needs {}",
                            trace.horizon(),
                            self.horizon_minutes
                        ),
                    ));
                }
                Some(trace)
            }
        };

        for inc in &self.incidents {
            graph
                .require_index(inc.edge)
                .map_err(|e| invalid("incidents", e.to_string()))?;
            if inc.start_min >= self.horizon_minutes {
                return Err(invalid(
                    "incidents",
                    format!("incident on {} starts past the horizon", inc.edge),
                ));
            }
        }

        let mut warnings = Vec::new();
        let route = match (self.scenario, &self.route) {
            (Scenario::Route, Some(r)) => {
                for (label, node) in [("origin", r.origin), ("destination", r.destination)] {
                    if !graph.contains_node(node) {
                        return Err(invalid(
                            "route",
                            format!("{label} node {node} is not in the graph"),
                        ));
                    }
                }
                if r.start_min >= self.horizon_minutes {
                    return Err(invalid(
                        "route.start_min",
                        format!("{} is past the horizon", r.start_min),
                    ));
                }
                warnings.extend(route_coverage_warnings(&graph, &action_sets, r));
                Some(r.clone())
            }
            (Scenario::Route, None) => {
                return Err(invalid("route", "route scenario needs a [route] section".into()))
            }
            (_, Some(_)) => {
                warnings.push("ignoring [route] section for a non-route scenario".into());
                None
            }
            (_, None) => None,
        };

        Ok(ResolvedScenario {
            config: self.clone(),
            config_hash: self.hash(),
            graph,
            placement,
            action_sets,
            generator,
            replay,
            controller,
            route,
            warnings,
        })
    }
}

/// Edges on candidate origin->destination paths that no camera can cover.
fn route_coverage_warnings(
    graph: &RoadGraph,
    action_sets: &[CameraActionSet],
    route: &RouteSection,
) -> Vec<String> {
    let mut coverable = vec![false; graph.edge_count()];
    for set in action_sets {
        for action in &set.actions {
            for &e in &action.edges {
                coverable[e] = true;
            }
        }
    }
    // Every edge on some simple o->d path.
    let mut on_path: BTreeSet<usize> = BTreeSet::new();
    let mut stack = vec![vec![route.origin]];
    while let Some(nodes) = stack.pop() {
        let here = *nodes.last().unwrap();
        if here == route.destination {
            for w in nodes.windows(2) {
                if let Some(k) = graph.index_of(crate::network::Edge::new(w[0], w[1])) {
                    on_path.insert(k);
                }
            }
            continue;
        }
        for &k in graph.out_edges(here) {
            let next = graph.edge(k).head;
            if !nodes.contains(&next) {
                let mut longer = nodes.clone();
                longer.push(next);
                stack.push(longer);
            }
        }
    }
    on_path
        .into_iter()
        .filter(|&k| !coverable[k])
        .map(|k| {
            format!(
                "edge {} lies on a {}->{} path but no camera can cover it",
                graph.edge(k),
                route.origin,
                route.destination
            )
        })
        .collect()
}

/// A validated scenario with all referenced data loaded.
#[derive(Clone, Debug)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub config_hash: u64,
    pub graph: RoadGraph,
    pub placement: CameraPlacement,
    pub action_sets: Vec<CameraActionSet>,
    pub generator: GeneratorConfig,
    /// Loaded replay trace when the source is `replay`.
    pub replay: Option<Trace>,
    pub controller: ControllerConfig,
    pub route: Option<RouteSection>,
    pub warnings: Vec<String>,
}

impl ResolvedScenario {
    pub fn channel(&self) -> Channel {
        self.config.scenario.channel()
    }

    pub fn task(&self) -> TaskLoss {
        self.config.scenario.task()
    }

    /// The trace a given run seed operates on.
    pub fn trace_for_seed(&self, seed: u64) -> Result<Trace, HarnessError> {
        match &self.replay {
            Some(t) => Ok(t.clone()),
            None => crate::simulator::generate_trace(
                &self.graph,
                &self.generator,
                &self.config.incidents,
                seed,
            )
            .map_err(|e| HarnessError::Simulator(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = ScenarioConfig::default();
        let resolved = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(resolved.placement.nodes(), &[1, 2, 3, 4, 5, 6]);
        assert_eq!(resolved.controller.epsilon, 0.0);
        assert!(resolved.warnings.is_empty());
    }

    #[test]
    fn warmup_must_cover_window() {
        let mut cfg = ScenarioConfig::default();
        cfg.warmup_minutes = 30; // window 12 * agg 5 = 60 needed
        let err = cfg.resolve(Path::new(".")).unwrap_err();
        match err {
            HarnessError::ConfigInvalid { field, .. } => assert_eq!(field, "warmup_minutes"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn route_scenario_requires_route_section() {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario = Scenario::Route;
        let err = cfg.resolve(Path::new(".")).unwrap_err();
        assert!(matches!(err, HarnessError::ConfigInvalid { field, .. } if field == "route"));
    }

    #[test]
    fn epsilon_defaults_by_scenario() {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario = Scenario::Link;
        let resolved = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(resolved.controller.epsilon, 0.3);
        cfg.controller.epsilon = Some(0.1);
        let resolved = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(resolved.controller.epsilon, 0.1);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario = Scenario::Route;
        cfg.route = Some(RouteSection { origin: 12, destination: 8, start_min: 290 });
        cfg.incidents.push(crate::simulator::IncidentSpec {
            edge: crate::network::Edge::new(3, 1),
            start_min: 300,
            duration_min: 120,
            severity: 1.0,
        });
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.controller.gamma = 0.5;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn bad_toml_reports_field() {
        let err = ScenarioConfig::from_toml("scenario = \"nope\"").unwrap_err();
        assert!(matches!(err, HarnessError::ConfigInvalid { .. }));
    }
}
