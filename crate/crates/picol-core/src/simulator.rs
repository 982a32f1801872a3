//! Seeded traffic-trace generation and CSV replay.
//!
//! The generator produces per-minute, per-edge volumes from a double-peaked
//! diurnal curve with multiplicative lognormal noise, derives travel times
//! through a BPR congestion curve, and injects lane-closure incidents with
//! upstream spillback. Everything is a pure function of (graph, config,
//! incidents, seed).

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Edge, NetworkError, RoadGraph};
use crate::textio;

/// One time step of per-edge measurements on a single channel.
///
/// `values[k]` belongs to the edge with canonical index `k`. Units are veh/h
/// on the volume channel and seconds on the travel-time channel.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficState {
    pub values: Vec<f64>,
    pub t: u32,
}

impl TrafficState {
    pub fn new(values: Vec<f64>, t: u32) -> Self {
        TrafficState { values, t }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Volume,
    TravelTime,
}

/// A lane-closure incident: `severity` is the fraction of the edge's flow
/// removed while the closure is active.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentSpec {
    pub edge: Edge,
    pub start_min: u32,
    pub duration_min: u32,
    pub severity: f64,
}

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("incident on {edge} out of range: {reason}")]
    IncidentOutOfRange { edge: Edge, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("malformed row: {0}")]
    MalformedRow(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Diurnal profile and noise/congestion parameters for trace generation.
///
/// The network-wide total ranges over `[total_min, total_max]` veh/h; the
/// shape is a floor plus AM and PM Gaussian bumps. Minute 0 is 1 a.m., so the
/// default peaks at minutes 420 and 990 sit at 8:00 and 17:30 wall clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub horizon_minutes: u32,
    pub total_min: f64,
    pub total_max: f64,
    pub am_peak_min: f64,
    pub am_sigma_min: f64,
    pub am_amp: f64,
    pub pm_peak_min: f64,
    pub pm_sigma_min: f64,
    pub pm_amp: f64,
    pub shape_floor: f64,
    /// Stationary std-dev of the lognormal noise (in log space).
    pub noise_sigma: f64,
    /// Per-edge overrides of `noise_sigma`, keyed by `tail-head`; lets some
    /// links fluctuate much more than others.
    pub noise_sigma_overrides: Option<BTreeMap<String, f64>>,
    /// AR(1) coefficient of the log-noise; 0 gives independent minutes.
    pub noise_rho: f64,
    /// Relative volume weight per edge, keyed by `tail-head`. Missing edges
    /// get weight 1; `None` means uniform.
    pub edge_weights: Option<BTreeMap<String, f64>>,
    pub capacity_veh_h: f64,
    pub free_flow_s: f64,
    pub bpr_alpha: f64,
    pub bpr_beta: f64,
    /// Travel-time penalty added to a closed edge, scaled by severity.
    pub closure_penalty_s: f64,
    /// How many upstream hops receive spillback volume.
    pub spillback_hops: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            horizon_minutes: 1440,
            total_min: 7000.0,
            total_max: 18000.0,
            am_peak_min: 420.0,
            am_sigma_min: 120.0,
            am_amp: 1.0,
            pm_peak_min: 990.0,
            pm_sigma_min: 150.0,
            pm_amp: 0.85,
            shape_floor: 0.25,
            noise_sigma: 0.1,
            noise_rho: 0.85,
            edge_weights: None,
            capacity_veh_h: 900.0,
            free_flow_s: 300.0,
            bpr_alpha: 0.15,
            bpr_beta: 4.0,
            closure_penalty_s: 1e7,
            spillback_hops: 1,
        }
    }
}

impl GeneratorConfig {
    /// Network-wide total volume (veh/h) at minute `m`, before noise.
    pub fn total_at(&self, m: u32) -> f64 {
        let (smin, smax) = self.shape_range();
        let s = self.shape(f64::from(m % 1440));
        self.total_min + (self.total_max - self.total_min) * (s - smin) / (smax - smin)
    }

    fn shape(&self, m: f64) -> f64 {
        let bump = |peak: f64, sigma: f64, amp: f64| {
            let d = (m - peak) / sigma;
            amp * (-0.5 * d * d).exp()
        };
        self.shape_floor
            + bump(self.am_peak_min, self.am_sigma_min, self.am_amp)
            + bump(self.pm_peak_min, self.pm_sigma_min, self.pm_amp)
    }

    fn shape_range(&self) -> (f64, f64) {
        let mut smin = f64::INFINITY;
        let mut smax = f64::NEG_INFINITY;
        for m in 0..1440 {
            let s = self.shape(f64::from(m));
            smin = smin.min(s);
            smax = smax.max(s);
        }
        (smin, smax)
    }

    /// Normalized per-edge share of the network total, in canonical order.
    pub fn edge_shares(&self, g: &RoadGraph) -> Vec<f64> {
        let mut w = vec![1.0; g.edge_count()];
        if let Some(map) = &self.edge_weights {
            for (k, e) in g.edges().iter().enumerate() {
                if let Some(&v) = map.get(&e.to_string()) {
                    w[k] = v;
                }
            }
        }
        let sum: f64 = w.iter().sum();
        w.iter().map(|x| x / sum).collect()
    }

    /// BPR travel time for one edge given its volume.
    pub fn travel_time(&self, volume: f64) -> f64 {
        let vc = volume / self.capacity_veh_h;
        self.free_flow_s * (1.0 + self.bpr_alpha * vc.powf(self.bpr_beta))
    }
}

/// A generated or replayed day of traffic: both channels, minute-indexed.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub edges: Vec<Edge>,
    pub volume: Vec<TrafficState>,
    pub travel_time: Vec<TrafficState>,
    pub seed: u64,
    pub incidents: Vec<IncidentSpec>,
}

impl Trace {
    pub fn horizon(&self) -> u32 {
        self.volume.len() as u32
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn channel(&self, c: Channel) -> &[TrafficState] {
        match c {
            Channel::Volume => &self.volume,
            Channel::TravelTime => &self.travel_time,
        }
    }
}

fn validate_incidents(
    g: &RoadGraph,
    incidents: &[IncidentSpec],
    horizon: u32,
) -> Result<Vec<usize>, SimulatorError> {
    let mut indices = Vec::with_capacity(incidents.len());
    for inc in incidents {
        let idx = g.require_index(inc.edge)?;
        if inc.start_min >= horizon {
            return Err(SimulatorError::IncidentOutOfRange {
                edge: inc.edge,
                reason: format!("start_min {} >= horizon {horizon}", inc.start_min),
            });
        }
        if inc.duration_min == 0 {
            return Err(SimulatorError::IncidentOutOfRange {
                edge: inc.edge,
                reason: "duration_min must be >= 1".into(),
            });
        }
        if !(inc.severity > 0.0 && inc.severity <= 1.0) {
            return Err(SimulatorError::IncidentOutOfRange {
                edge: inc.edge,
                reason: format!("severity {} outside (0, 1]", inc.severity),
            });
        }
        indices.push(idx);
    }
    Ok(indices)
}

/// Edges at upstream hop distance 1..=hops from `edge`, as (index, hop).
fn upstream_hops(g: &RoadGraph, edge: usize, hops: usize) -> Vec<(usize, usize)> {
    let mut seen = vec![false; g.edge_count()];
    seen[edge] = true;
    let mut frontier = vec![edge];
    let mut out = Vec::new();
    for hop in 1..=hops {
        let mut next = Vec::new();
        for &f in &frontier {
            let tail = g.edge(f).tail;
            for &up in g.in_edges(tail) {
                if !seen[up] {
                    seen[up] = true;
                    next.push(up);
                    out.push((up, hop));
                }
            }
        }
        frontier = next;
    }
    out
}

/// Generates a seeded trace. Same inputs give a bit-identical trace; the
/// noise stream does not depend on the incident list, so edges outside the
/// spillback range match the incident-free trace exactly.
pub fn generate_trace(
    g: &RoadGraph,
    cfg: &GeneratorConfig,
    incidents: &[IncidentSpec],
    seed: u64,
) -> Result<Trace, SimulatorError> {
    let horizon = cfg.horizon_minutes;
    let incident_edges = validate_incidents(g, incidents, horizon)?;
    let n_edges = g.edge_count();
    let shares = cfg.edge_shares(g);

    // (edge index, hop, incident) pairs affected by spillback.
    let mut spill: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &ie) in incident_edges.iter().enumerate() {
        for (up, hop) in upstream_hops(g, ie, cfg.spillback_hops) {
            spill.push((up, hop, i));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innov_scale = cfg.noise_sigma * (1.0 - cfg.noise_rho * cfg.noise_rho).sqrt();
    let mut log_noise = vec![0.0f64; n_edges];

    let mut volume = Vec::with_capacity(horizon as usize);
    let mut travel_time = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let total = cfg.total_at(t);
        let mut vols = Vec::with_capacity(n_edges);
        for e in 0..n_edges {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_noise[e] = if t == 0 {
                cfg.noise_sigma * z
            } else {
                cfg.noise_rho * log_noise[e] + innov_scale * z
            };
            vols.push(shares[e] * total * log_noise[e].exp());
        }

        let mut tt_penalty = vec![0.0f64; n_edges];
        for (i, (inc, &ie)) in incidents.iter().zip(&incident_edges).enumerate() {
            let end = inc.start_min.saturating_add(inc.duration_min);
            if t < inc.start_min || t >= end {
                continue;
            }
            vols[ie] *= 1.0 - inc.severity;
            tt_penalty[ie] += inc.severity * cfg.closure_penalty_s;
            // Queued volume ramps up linearly over the closure and halves
            // per upstream hop.
            let ramp = f64::from(t - inc.start_min + 1) / f64::from(inc.duration_min);
            let blocked = inc.severity * shares[ie] * total;
            for &(up, hop, which) in &spill {
                if which == i {
                    vols[up] += blocked * 0.5f64.powi(hop as i32) * ramp;
                }
            }
        }

        let tts: Vec<f64> = vols
            .iter()
            .zip(&tt_penalty)
            .map(|(&v, &p)| cfg.travel_time(v) + p)
            .collect();
        volume.push(TrafficState::new(vols, t));
        travel_time.push(TrafficState::new(tts, t));
    }

    Ok(Trace {
        edges: g.edges().to_vec(),
        volume,
        travel_time,
        seed,
        incidents: incidents.to_vec(),
    })
}

fn states_to_csv(edges: &[Edge], states: &[TrafficState]) -> String {
    let mut s = String::from("t");
    for e in edges {
        s.push(',');
        s.push_str(&e.to_string());
    }
    s.push('\n');
    for st in states {
        textio::write_float_row(&mut s, st.t, &st.values);
    }
    s
}

fn states_from_csv(text: &str) -> Result<(Vec<Edge>, Vec<TrafficState>), SimulatorError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| SimulatorError::MalformedRow("empty file".into()))?;
    let mut cols = header.split(',');
    if cols.next().map(str::trim) != Some("t") {
        return Err(SimulatorError::MalformedRow(format!(
            "expected first header column 't', got {header:?}"
        )));
    }
    let edges: Vec<Edge> = cols
        .map(|c| c.trim().parse::<Edge>())
        .collect::<Result<_, _>>()
        .map_err(SimulatorError::Network)?;
    let mut states = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t = textio::parse_u32(
            fields
                .next()
                .ok_or_else(|| SimulatorError::MalformedRow(format!("line {}: empty", i + 1)))?,
            i + 1,
        )
        .map_err(SimulatorError::MalformedRow)?;
        let values: Vec<f64> = fields
            .map(|f| textio::parse_f64(f, i + 1))
            .collect::<Result<_, _>>()
            .map_err(SimulatorError::MalformedRow)?;
        if values.len() != edges.len() {
            return Err(SimulatorError::LengthMismatch(format!(
                "line {}: {} value columns but {} edges in header",
                i + 1,
                values.len(),
                edges.len()
            )));
        }
        states.push(TrafficState::new(values, t));
    }
    Ok((edges, states))
}

fn incidents_to_csv(incidents: &[IncidentSpec]) -> String {
    let mut s = String::from("edge,start_min,duration_min,severity\n");
    for inc in incidents {
        s.push_str(&format!(
            "{},{},{},{}\n",
            inc.edge, inc.start_min, inc.duration_min, inc.severity
        ));
    }
    s
}

/// Parses the incident CSV (`edge,start_min,duration_min,severity`).
pub fn incidents_from_csv(text: &str) -> Result<Vec<IncidentSpec>, SimulatorError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| SimulatorError::MalformedRow("empty file".into()))?;
    if header.replace(' ', "").trim() != "edge,start_min,duration_min,severity" {
        return Err(SimulatorError::MalformedRow(format!(
            "unexpected incident header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(SimulatorError::MalformedRow(format!(
                "line {}: expected 4 fields",
                i + 1
            )));
        }
        out.push(IncidentSpec {
            edge: fields[0].trim().parse::<Edge>().map_err(SimulatorError::Network)?,
            start_min: textio::parse_u32(fields[1], i + 1).map_err(SimulatorError::MalformedRow)?,
            duration_min: textio::parse_u32(fields[2], i + 1)
                .map_err(SimulatorError::MalformedRow)?,
            severity: textio::parse_f64(fields[3], i + 1).map_err(SimulatorError::MalformedRow)?,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct TraceMeta {
    seed: u64,
}

/// Writes `volume.csv`, `traveltime.csv`, `incidents.csv` and
/// `trace_meta.json` into `dir`.
pub fn write_trace(trace: &Trace, dir: &Path) -> Result<(), SimulatorError> {
    let io_err = |e: std::io::Error| SimulatorError::Io(e.to_string());
    std::fs::create_dir_all(dir).map_err(io_err)?;
    std::fs::write(dir.join("volume.csv"), states_to_csv(&trace.edges, &trace.volume))
        .map_err(io_err)?;
    std::fs::write(
        dir.join("traveltime.csv"),
        states_to_csv(&trace.edges, &trace.travel_time),
    )
    .map_err(io_err)?;
    std::fs::write(dir.join("incidents.csv"), incidents_to_csv(&trace.incidents))
        .map_err(io_err)?;
    let meta = serde_json::to_string_pretty(&TraceMeta { seed: trace.seed })
        .expect("trace meta serializes");
    std::fs::write(dir.join("trace_meta.json"), meta).map_err(io_err)?;
    Ok(())
}

/// Reads a trace directory written by [`write_trace`]. The round trip is
/// bit-exact.
pub fn replay_trace(dir: &Path) -> Result<Trace, SimulatorError> {
    let read = |name: &str| {
        std::fs::read_to_string(dir.join(name))
            .map_err(|e| SimulatorError::Io(format!("{}: {e}", dir.join(name).display())))
    };
    let (edges, volume) = states_from_csv(&read("volume.csv")?)?;
    let (tt_edges, travel_time) = states_from_csv(&read("traveltime.csv")?)?;
    if tt_edges != edges {
        return Err(SimulatorError::LengthMismatch(
            "volume.csv and traveltime.csv disagree on edges".into(),
        ));
    }
    if travel_time.len() != volume.len() {
        return Err(SimulatorError::LengthMismatch(format!(
            "volume has {} steps, traveltime has {}",
            volume.len(),
            travel_time.len()
        )));
    }
    let incidents = match std::fs::read_to_string(dir.join("incidents.csv")) {
        Ok(text) => incidents_from_csv(&text)?,
        Err(_) => Vec::new(),
    };
    let seed = std::fs::read_to_string(dir.join("trace_meta.json"))
        .ok()
        .and_then(|s| serde_json::from_str::<TraceMeta>(&s).ok())
        .map(|m| m.seed)
        .unwrap_or(0);
    Ok(Trace { edges, volume, travel_time, seed, incidents })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bundled_graph, Edge};

    fn no_incidents() -> Vec<IncidentSpec> {
        Vec::new()
    }

    #[test]
    fn hourly_totals_stay_in_band() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let trace = generate_trace(&g, &cfg, &no_incidents(), 7).unwrap();
        for hour in 0..24 {
            let mean_total: f64 = (0..60)
                .map(|m| trace.volume[(hour * 60 + m) as usize].l1_norm())
                .sum::<f64>()
                / 60.0;
            assert!(
                (6000.0..=20000.0).contains(&mean_total),
                "hour {hour}: total {mean_total}"
            );
        }
    }

    #[test]
    fn closure_drops_volume_and_spills_upstream() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let incident = IncidentSpec {
            edge: Edge::new(2, 1),
            start_min: 300,
            duration_min: 120,
            severity: 1.0,
        };
        let base = generate_trace(&g, &cfg, &no_incidents(), 3).unwrap();
        let closed = generate_trace(&g, &cfg, &[incident], 3).unwrap();
        let e21 = g.index_of(Edge::new(2, 1)).unwrap();
        let e42 = g.index_of(Edge::new(4, 2)).unwrap();
        let t = 330usize;
        assert!(closed.volume[t].values[e21] < 0.1 * base.volume[t].values[e21]);
        assert!(closed.volume[t].values[e42] > base.volume[t].values[e42]);
        // After recovery both match the incident-free trace bit for bit.
        let t_after = 430usize;
        assert_eq!(
            closed.volume[t_after].values[e21].to_bits(),
            base.volume[t_after].values[e21].to_bits()
        );
    }

    #[test]
    fn closure_penalizes_travel_time() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let incident = IncidentSpec {
            edge: Edge::new(3, 1),
            start_min: 300,
            duration_min: 120,
            severity: 1.0,
        };
        let trace = generate_trace(&g, &cfg, &[incident], 3).unwrap();
        let e31 = g.index_of(Edge::new(3, 1)).unwrap();
        assert!(trace.travel_time[310].values[e31] >= cfg.closure_penalty_s);
        assert!(trace.travel_time[299].values[e31] < 1000.0);
    }

    #[test]
    fn zero_severity_rejected() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let incident = IncidentSpec {
            edge: Edge::new(2, 1),
            start_min: 10,
            duration_min: 5,
            severity: 0.0,
        };
        assert!(matches!(
            generate_trace(&g, &cfg, &[incident], 1),
            Err(SimulatorError::IncidentOutOfRange { .. })
        ));
    }

    #[test]
    fn incident_bounds_checked() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let late = IncidentSpec {
            edge: Edge::new(2, 1),
            start_min: 2000,
            duration_min: 5,
            severity: 0.5,
        };
        assert!(matches!(
            generate_trace(&g, &cfg, &[late], 1),
            Err(SimulatorError::IncidentOutOfRange { .. })
        ));
        let unknown = IncidentSpec {
            edge: Edge::new(1, 99),
            start_min: 10,
            duration_min: 5,
            severity: 0.5,
        };
        assert!(matches!(
            generate_trace(&g, &cfg, &[unknown], 1),
            Err(SimulatorError::Network(NetworkError::UnknownEdge(_)))
        ));
    }

    #[test]
    fn determinism_bit_identical() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let a = generate_trace(&g, &cfg, &no_incidents(), 42).unwrap();
        let b = generate_trace(&g, &cfg, &no_incidents(), 42).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&g, &cfg, &no_incidents(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn incident_locality() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default(); // spillback_hops = 1
        let incident = IncidentSpec {
            edge: Edge::new(2, 1),
            start_min: 100,
            duration_min: 60,
            severity: 0.8,
        };
        let base = generate_trace(&g, &cfg, &no_incidents(), 5).unwrap();
        let closed = generate_trace(&g, &cfg, &[incident], 5).unwrap();
        let e21 = g.index_of(Edge::new(2, 1)).unwrap();
        let touched: Vec<usize> = upstream_hops(&g, e21, 1)
            .into_iter()
            .map(|(k, _)| k)
            .chain(std::iter::once(e21))
            .collect();
        for t in 0..base.horizon() as usize {
            for e in 0..g.edge_count() {
                if touched.contains(&e) {
                    continue;
                }
                assert_eq!(
                    base.volume[t].values[e].to_bits(),
                    closed.volume[t].values[e].to_bits(),
                    "edge {} at t={t}",
                    g.edge(e)
                );
            }
        }
    }

    #[test]
    fn nonnegative_volumes() {
        let g = bundled_graph();
        let mut cfg = GeneratorConfig::default();
        cfg.noise_sigma = 0.5;
        let incident = IncidentSpec {
            edge: Edge::new(2, 1),
            start_min: 0,
            duration_min: 1440,
            severity: 1.0,
        };
        let trace = generate_trace(&g, &cfg, &[incident], 11).unwrap();
        for st in &trace.volume {
            assert!(st.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn trace_round_trip_bit_exact() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let incident = IncidentSpec {
            edge: Edge::new(2, 1),
            start_min: 300,
            duration_min: 120,
            severity: 1.0,
        };
        let trace = generate_trace(&g, &cfg, &[incident], 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trace(&trace, dir.path()).unwrap();
        let back = replay_trace(dir.path()).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn replay_rejects_short_rows() {
        let text = "t,1-2,2-1\n0,5.0\n";
        assert!(matches!(
            states_from_csv(text),
            Err(SimulatorError::LengthMismatch(_))
        ));
    }

    #[test]
    fn replay_hand_written_values() {
        let text = "t,1-2,2-1\n0,5.5,1.25\n1,6,2\n2,0,0.125\n";
        let (edges, states) = states_from_csv(text).unwrap();
        assert_eq!(edges, vec![Edge::new(1, 2), Edge::new(2, 1)]);
        assert_eq!(states.len(), 3);
        assert_eq!(states[0].values, vec![5.5, 1.25]);
        assert_eq!(states[2].values, vec![0.0, 0.125]);
    }

    #[test]
    fn replay_rejects_garbage() {
        let text = "t,1-2\n0,abc\n";
        assert!(matches!(
            states_from_csv(text),
            Err(SimulatorError::MalformedRow(_))
        ));
    }
}
