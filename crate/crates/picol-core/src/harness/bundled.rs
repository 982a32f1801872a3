//! The three bundled scenario configurations for the 19-edge network.
//!
//! The per-edge volume weights are a demonstration design, not measurements:
//! the flow-capture scenarios concentrate volume on edge pairs the default
//! six cameras can cover simultaneously, and the route scenario loads the
//! 4-2/2-1 corridor so the 4-3/3-1 corridor is the faster choice until its
//! closure.

use std::collections::BTreeMap;

use crate::network::Edge;
use crate::simulator::IncidentSpec;

use super::config::{RouteSection, Scenario, ScenarioConfig, SeedSpec};

fn weight_map(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Volume weights used by the network- and link-level scenarios.
pub fn flow_edge_weights() -> BTreeMap<String, f64> {
    weight_map(&[
        ("1-2", 8.0),
        ("2-1", 8.0),
        ("2-4", 7.0),
        ("4-2", 7.0),
        ("4-6", 6.0),
        ("6-4", 6.0),
        ("6-12", 5.0),
        ("12-6", 5.0),
        ("3-1", 6.0),
        ("5-3", 5.0),
        ("1-70", 2.0),
        ("1-8", 2.0),
        ("71-1", 2.0),
        ("2-10", 1.5),
        ("10-2", 1.5),
        ("9-2", 1.5),
        ("4-3", 1.5),
        ("5-6", 1.5),
        ("11-5", 1.5),
    ])
}

/// Volume weights used by the route scenario: the 2-corridor is congested,
/// the 3-corridor is light.
pub fn route_edge_weights() -> BTreeMap<String, f64> {
    weight_map(&[
        ("12-6", 5.4),
        ("6-4", 5.4),
        ("4-2", 4.95),
        ("2-1", 4.95),
        ("4-3", 4.275),
        ("5-3", 4.275),
        ("3-1", 2.25),
        ("1-2", 4.5),
        ("1-8", 3.6),
        ("1-70", 3.6),
        ("71-1", 3.6),
        ("2-4", 3.0),
        ("4-6", 3.0),
        ("5-6", 3.0),
        ("6-12", 3.0),
        ("2-10", 2.6),
        ("10-2", 2.6),
        ("9-2", 2.6),
        ("11-5", 2.6),
    ])
}

/// Network-level flow capture: 6 cameras, no exploration, diffusion
/// predictor, no incidents.
pub fn network_scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scenario = Scenario::Network;
    cfg.trace.generate.edge_weights = Some(flow_edge_weights());
    cfg.seeds = SeedSpec { start: 0, count: 20 };
    cfg
}

/// Link-level change detection: the 2-1 closure at minute 300 for two hours,
/// exploration 0.3 (the "PiCOL-3" setting; zero the epsilon for "PiCOL-0").
pub fn link_scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scenario = Scenario::Link;
    cfg.trace.generate.edge_weights = Some(flow_edge_weights());
    cfg.incidents = vec![IncidentSpec {
        edge: Edge::new(2, 1),
        start_min: 300,
        duration_min: 120,
        severity: 1.0,
    }];
    cfg.seeds = SeedSpec { start: 0, count: 20 };
    cfg
}

/// Route-level dynamic planning: trip 12 -> 8 departing at minute 290, full
/// closure of 3-1 ten minutes later. Runs on a near-flat diurnal band at a
/// one-minute prediction cycle so the closure enters the fusion loop
/// promptly.
pub fn route_scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scenario = Scenario::Route;
    cfg.aggregation_minutes = 1;
    cfg.trace.generate.edge_weights = Some(route_edge_weights());
    cfg.trace.generate.total_min = 13000.0;
    cfg.trace.generate.total_max = 14500.0;
    cfg.incidents = vec![IncidentSpec {
        edge: Edge::new(3, 1),
        start_min: 300,
        duration_min: 120,
        severity: 1.0,
    }];
    cfg.route = Some(RouteSection { origin: 12, destination: 8, start_min: 290 });
    cfg.seeds = SeedSpec { start: 0, count: 50 };
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn bundled_scenarios_resolve() {
        for cfg in [network_scenario(), link_scenario(), route_scenario()] {
            let resolved = cfg.resolve(Path::new(".")).unwrap();
            assert_eq!(resolved.placement.nodes(), &[1, 2, 3, 4, 5, 6]);
        }
    }

    #[test]
    fn weight_maps_cover_all_edges() {
        let g = crate::network::bundled_graph();
        for map in [flow_edge_weights(), route_edge_weights()] {
            assert_eq!(map.len(), g.edge_count());
            for e in g.edges() {
                assert!(map.contains_key(&e.to_string()), "missing {e}");
            }
        }
    }

    #[test]
    fn route_scenario_has_no_coverage_warnings() {
        let resolved = route_scenario().resolve(Path::new(".")).unwrap();
        assert!(resolved.warnings.is_empty(), "{:?}", resolved.warnings);
    }
}
