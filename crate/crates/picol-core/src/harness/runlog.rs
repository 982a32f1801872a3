//! Per-run step records and their on-disk layout.
//!
//! A run directory holds `meta.json`, the per-minute `observation.csv`,
//! `fusion.csv`, `prediction.csv` and `coverage.csv`, the per-camera
//! `actions.csv`, optional `policies.json` checkpoints, the input trace under
//! `trace/`, and `replans_<basis>.csv` files for route runs. Reading a
//! directory back reproduces the in-memory log bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{Edge, NodeId};
use crate::routing::{Basis, ReplanOutcome};
use crate::simulator::{replay_trace, write_trace, Trace, TrafficState};
use crate::textio;

use super::config::Scenario;
use super::HarnessError;

/// Everything recorded at one control minute.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: u32,
    /// Sampled action index per camera, placement order.
    pub actions: Vec<usize>,
    pub mask: Vec<bool>,
    pub observation: Vec<f64>,
    pub fusion: Vec<f64>,
    /// Prediction in effect this minute.
    pub prediction: Vec<f64>,
    /// The prediction fell back to the previous fusion state.
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub edges: Vec<Edge>,
    pub camera_nodes: Vec<NodeId>,
    pub horizon_minutes: u32,
    pub warmup_minutes: u32,
    pub aggregation_minutes: u32,
    pub window: usize,
}

/// One seeded run: metadata, per-step records, policy checkpoints, the input
/// trace and (for route scenarios) the replanning transcripts.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub meta: RunMeta,
    pub steps: Vec<StepRecord>,
    pub policy_checkpoints: Vec<(u32, serde_json::Value)>,
    pub trace: Trace,
    pub replans: Vec<(Basis, ReplanRecordSet)>,
}

/// Replanning rows in persistable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecordSet {
    pub rows: Vec<ReplanRow>,
    pub reached: bool,
    pub stranded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplanRow {
    pub decided_at: u32,
    pub node: NodeId,
    pub basis: Basis,
    pub path: String,
    pub eta_seconds: f64,
}

impl ReplanRecordSet {
    pub fn from_outcome(out: &ReplanOutcome) -> Self {
        ReplanRecordSet {
            rows: out
                .plans
                .iter()
                .map(|p| ReplanRow {
                    decided_at: p.decided_at,
                    node: p.node,
                    basis: p.basis,
                    path: p.path.label(),
                    eta_seconds: p.eta_seconds,
                })
                .collect(),
            reached: out.reached,
            stranded: out.stranded,
        }
    }
}

impl RunLog {
    /// The truth series on the scenario's designated channel.
    pub fn truth(&self) -> &[TrafficState] {
        self.trace.channel(self.meta.scenario.channel())
    }

    pub fn observations(&self) -> Vec<TrafficState> {
        self.steps
            .iter()
            .map(|s| TrafficState::new(s.observation.clone(), s.t))
            .collect()
    }

    pub fn fusions(&self) -> Vec<TrafficState> {
        self.steps
            .iter()
            .map(|s| TrafficState::new(s.fusion.clone(), s.t))
            .collect()
    }

    pub fn predictions(&self) -> Vec<TrafficState> {
        self.steps
            .iter()
            .map(|s| TrafficState::new(s.prediction.clone(), s.t))
            .collect()
    }

    pub fn coverage(&self) -> Vec<Vec<bool>> {
        self.steps.iter().map(|s| s.mask.clone()).collect()
    }
}

fn edge_header(edges: &[Edge]) -> String {
    let mut s = String::from("t");
    for e in edges {
        s.push(',');
        s.push_str(&e.to_string());
    }
    s.push('\n');
    s
}

fn float_series_csv(edges: &[Edge], rows: impl Iterator<Item = (u32, Vec<f64>)>) -> String {
    let mut s = edge_header(edges);
    for (t, values) in rows {
        textio::write_float_row(&mut s, t, &values);
    }
    s
}

fn parse_float_series(text: &str, n_edges: usize) -> Result<Vec<(u32, Vec<f64>)>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t = textio::parse_u32(fields.next().unwrap_or(""), i + 1)
            .map_err(HarnessError::Io)?;
        let values: Vec<f64> = fields
            .map(|f| textio::parse_f64(f, i + 1))
            .collect::<Result<_, _>>()
            .map_err(HarnessError::Io)?;
        if values.len() != n_edges {
            return Err(HarnessError::Io(format!(
                "line {}: {} columns, expected {}",
                i + 1,
                values.len(),
                n_edges
            )));
        }
        out.push((t, values));
    }
    Ok(out)
}

fn coverage_csv(edges: &[Edge], steps: &[StepRecord]) -> String {
    let mut s = edge_header(edges);
    for st in steps {
        s.push_str(&st.t.to_string());
        for &b in &st.mask {
            s.push(',');
            s.push(if b { '1' } else { '0' });
        }
        s.push('\n');
    }
    s
}

fn actions_csv(cameras: &[NodeId], steps: &[StepRecord]) -> String {
    let mut s = String::from("t");
    for c in cameras {
        s.push_str(&format!(",cam_{c}"));
    }
    s.push_str(",fallback\n");
    for st in steps {
        s.push_str(&st.t.to_string());
        for &a in &st.actions {
            s.push_str(&format!(",{a}"));
        }
        s.push_str(if st.fallback { ",1\n" } else { ",0\n" });
    }
    s
}

fn replans_csv(set: &ReplanRecordSet) -> String {
    let mut s = String::from("decided_at,node,basis,path,eta_seconds\n");
    for r in &set.rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.decided_at, r.node, r.basis, r.path, r.eta_seconds
        ));
    }
    s.push_str(&format!(
        "# reached={} stranded={}\n",
        set.reached, set.stranded
    ));
    s
}

fn parse_replans(text: &str, basis: Basis) -> Result<ReplanRecordSet, HarnessError> {
    let mut rows = Vec::new();
    let mut reached = false;
    let mut stranded = false;
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.starts_with('#') {
            reached = line.contains("reached=true");
            stranded = line.contains("stranded=true");
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(HarnessError::Io(format!("replans line {}: expected 5 fields", i + 1)));
        }
        rows.push(ReplanRow {
            decided_at: textio::parse_u32(fields[0], i + 1).map_err(HarnessError::Io)?,
            node: textio::parse_u32(fields[1], i + 1).map_err(HarnessError::Io)?,
            basis,
            path: fields[3].to_string(),
            eta_seconds: textio::parse_f64(fields[4], i + 1).map_err(HarnessError::Io)?,
        });
    }
    Ok(ReplanRecordSet { rows, reached, stranded })
}

/// Writes a run directory. See the module docs for the layout.
pub fn write_run(log: &RunLog, dir: &Path) -> Result<(), HarnessError> {
    let io_err = |e: std::io::Error| HarnessError::Io(e.to_string());
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let edges = &log.meta.edges;
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&log.meta).expect("meta serializes"),
    )
    .map_err(io_err)?;
    std::fs::write(
        dir.join("observation.csv"),
        float_series_csv(edges, log.steps.iter().map(|s| (s.t, s.observation.clone()))),
    )
    .map_err(io_err)?;
    std::fs::write(
        dir.join("fusion.csv"),
        float_series_csv(edges, log.steps.iter().map(|s| (s.t, s.fusion.clone()))),
    )
    .map_err(io_err)?;
    std::fs::write(
        dir.join("prediction.csv"),
        float_series_csv(edges, log.steps.iter().map(|s| (s.t, s.prediction.clone()))),
    )
    .map_err(io_err)?;
    std::fs::write(dir.join("coverage.csv"), coverage_csv(edges, &log.steps)).map_err(io_err)?;
    std::fs::write(
        dir.join("actions.csv"),
        actions_csv(&log.meta.camera_nodes, &log.steps),
    )
    .map_err(io_err)?;
    if !log.policy_checkpoints.is_empty() {
        let dump: Vec<serde_json::Value> = log
            .policy_checkpoints
            .iter()
            .map(|(t, v)| serde_json::json!({ "t": t, "policies": v }))
            .collect();
        std::fs::write(
            dir.join("policies.json"),
            serde_json::to_string_pretty(&dump).expect("policies serialize"),
        )
        .map_err(io_err)?;
    }
    write_trace(&log.trace, &dir.join("trace"))
        .map_err(|e| HarnessError::Simulator(e.to_string()))?;
    for (basis, set) in &log.replans {
        std::fs::write(dir.join(format!("replans_{basis}.csv")), replans_csv(set))
            .map_err(io_err)?;
    }
    Ok(())
}

/// Reads a run directory back; the round trip through [`write_run`] is
/// bit-exact.
pub fn read_run(dir: &Path) -> Result<RunLog, HarnessError> {
    let read = |name: &str| {
        std::fs::read_to_string(dir.join(name))
            .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.join(name).display())))
    };
    let meta: RunMeta = serde_json::from_str(&read("meta.json")?)
        .map_err(|e| HarnessError::Io(format!("meta.json: {e}")))?;
    let n = meta.edges.len();
    let obs = parse_float_series(&read("observation.csv")?, n)?;
    let fus = parse_float_series(&read("fusion.csv")?, n)?;
    let pred = parse_float_series(&read("prediction.csv")?, n)?;
    let cov_text = read("coverage.csv")?;
    let act_text = read("actions.csv")?;

    let mut masks = Vec::new();
    for (i, line) in cov_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mask: Vec<bool> = line
            .split(',')
            .skip(1)
            .map(|f| f.trim() == "1")
            .collect();
        if mask.len() != n {
            return Err(HarnessError::Io(format!("coverage line {}: bad width", i + 1)));
        }
        masks.push(mask);
    }

    let mut actions = Vec::new();
    let mut fallbacks = Vec::new();
    let cam_count = meta.camera_nodes.len();
    for (i, line) in act_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cam_count + 2 {
            return Err(HarnessError::Io(format!("actions line {}: bad width", i + 1)));
        }
        let acts: Vec<usize> = fields[1..=cam_count]
            .iter()
            .map(|f| f.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Io(format!("actions line {}: {e}", i + 1)))?;
        actions.push(acts);
        fallbacks.push(fields[cam_count + 1].trim() == "1");
    }

    let lens = [obs.len(), fus.len(), pred.len(), masks.len(), actions.len()];
    if lens.iter().any(|&l| l != obs.len()) {
        return Err(HarnessError::Io(format!("inconsistent step counts {lens:?}")));
    }
    let steps = (0..obs.len())
        .map(|i| StepRecord {
            t: obs[i].0,
            actions: actions[i].clone(),
            mask: masks[i].clone(),
            observation: obs[i].1.clone(),
            fusion: fus[i].1.clone(),
            prediction: pred[i].1.clone(),
            fallback: fallbacks[i],
        })
        .collect();

    let policy_checkpoints = match std::fs::read_to_string(dir.join("policies.json")) {
        Ok(text) => {
            let dump: Vec<serde_json::Value> =
                serde_json::from_str(&text).map_err(|e| HarnessError::Io(e.to_string()))?;
            dump.into_iter()
                .map(|v| {
                    let t = v["t"].as_u64().unwrap_or(0) as u32;
                    (t, v["policies"].clone())
                })
                .collect()
        }
        Err(_) => Vec::new(),
    };

    let trace = replay_trace(&dir.join("trace"))
        .map_err(|e| HarnessError::Simulator(e.to_string()))?;

    let mut replans = Vec::new();
    for basis in [Basis::Prediction, Basis::Fusion, Basis::Truth] {
        let path = dir.join(format!("replans_{basis}.csv"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            replans.push((basis, parse_replans(&text, basis)?));
        }
    }

    Ok(RunLog { meta, steps, policy_checkpoints, trace, replans })
}
