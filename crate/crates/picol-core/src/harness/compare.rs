//! Scoring of run logs and paired comparison of two run sets.

use serde::{Deserialize, Serialize};

use crate::metrics::{
    detection_delay, edge_scores, hourly_scores, mean_std, sign_test, EdgeScore, HourlyScore,
    MeanStd, SignTest,
};
use crate::network::Edge;

use super::runlog::RunLog;
use super::HarnessError;

/// All metrics derived from one run log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunScores {
    pub seed: u64,
    pub hourly: Vec<HourlyScore>,
    pub edges: Vec<EdgeScore>,
    /// Detection delay per configured incident, in incident order.
    pub detections: Vec<(Edge, Option<u32>)>,
}

impl RunScores {
    pub fn mean_fusion_mape(&self) -> f64 {
        if self.hourly.is_empty() {
            return 0.0;
        }
        self.hourly.iter().map(|h| h.fusion_mape).sum::<f64>() / self.hourly.len() as f64
    }

    pub fn mean_obs_mape(&self) -> f64 {
        if self.hourly.is_empty() {
            return 0.0;
        }
        self.hourly.iter().map(|h| h.obs_mape).sum::<f64>() / self.hourly.len() as f64
    }
}

/// Computes hourly, per-edge and detection metrics from a log.
pub fn score_run(log: &RunLog) -> Result<RunScores, HarnessError> {
    let truth = log.truth().to_vec();
    let obs = log.observations();
    let fus = log.fusions();
    let preds = log.predictions();
    let hourly = if truth.len() % 60 == 0 && !truth.is_empty() {
        hourly_scores(&truth, &obs, &fus).map_err(|e| HarnessError::Metrics(e.to_string()))?
    } else {
        Vec::new()
    };
    let edges = edge_scores(&truth, &preds, &fus, &log.meta.edges)
        .map_err(|e| HarnessError::Metrics(e.to_string()))?;
    let coverage = log.coverage();
    let detections = log
        .trace
        .incidents
        .iter()
        .filter_map(|inc| {
            let idx = log.meta.edges.iter().position(|&e| e == inc.edge)?;
            Some((inc.edge, detection_delay(&coverage, inc, idx)))
        })
        .collect();
    Ok(RunScores { seed: log.meta.seed, hourly, edges, detections })
}

/// Paired per-edge deltas (A minus B) with sign tests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeDelta {
    pub edge: Edge,
    pub reconstruction_delta: MeanStd,
    /// Wins count seeds where A's reconstruction MAE is strictly lower.
    pub reconstruction_sign: SignTest,
    pub forecasting_delta: MeanStd,
    pub forecasting_sign: SignTest,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub fusion_mape_delta: MeanStd,
    pub fusion_mape_sign: SignTest,
    pub obs_mape_delta: MeanStd,
    pub edges: Vec<EdgeDelta>,
}

/// Compares two run sets pairwise by seed. Both sets must come from the same
/// scenario and graph and carry the same seeds in the same order.
pub fn compare_runs(a: &[RunLog], b: &[RunLog]) -> Result<ComparisonReport, HarnessError> {
    if a.is_empty() || b.is_empty() {
        return Err(HarnessError::IncompatibleRuns("empty run set".into()));
    }
    if a.len() != b.len() {
        return Err(HarnessError::IncompatibleRuns(format!(
            "{} runs vs {} runs",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (&a[0].meta, &b[0].meta);
    if ma.scenario != mb.scenario {
        return Err(HarnessError::IncompatibleRuns(format!(
            "scenario {} vs {}",
            ma.scenario, mb.scenario
        )));
    }
    if ma.edges != mb.edges {
        return Err(HarnessError::IncompatibleRuns("different graphs".into()));
    }
    for (ra, rb) in a.iter().zip(b) {
        if ra.meta.seed != rb.meta.seed {
            return Err(HarnessError::IncompatibleRuns(format!(
                "seed pairing mismatch: {} vs {}",
                ra.meta.seed, rb.meta.seed
            )));
        }
    }

    let scores_a: Vec<RunScores> = a.iter().map(score_run).collect::<Result<_, _>>()?;
    let scores_b: Vec<RunScores> = b.iter().map(score_run).collect::<Result<_, _>>()?;

    let fusion_deltas: Vec<f64> = scores_a
        .iter()
        .zip(&scores_b)
        .map(|(x, y)| x.mean_fusion_mape() - y.mean_fusion_mape())
        .collect();
    let obs_deltas: Vec<f64> = scores_a
        .iter()
        .zip(&scores_b)
        .map(|(x, y)| x.mean_obs_mape() - y.mean_obs_mape())
        .collect();
    let count_signs = |deltas: &[f64]| {
        let wins = deltas.iter().filter(|&&d| d < 0.0).count() as u32;
        let losses = deltas.iter().filter(|&&d| d > 0.0).count() as u32;
        sign_test(wins, losses)
    };

    let mut edges = Vec::with_capacity(ma.edges.len());
    for (k, &edge) in ma.edges.iter().enumerate() {
        let reco: Vec<f64> = scores_a
            .iter()
            .zip(&scores_b)
            .map(|(x, y)| x.edges[k].reconstruction_mae - y.edges[k].reconstruction_mae)
            .collect();
        let fore: Vec<f64> = scores_a
            .iter()
            .zip(&scores_b)
            .map(|(x, y)| x.edges[k].forecasting_mae - y.edges[k].forecasting_mae)
            .collect();
        edges.push(EdgeDelta {
            edge,
            reconstruction_delta: mean_std(&reco),
            reconstruction_sign: count_signs(&reco),
            forecasting_delta: mean_std(&fore),
            forecasting_sign: count_signs(&fore),
        });
    }

    Ok(ComparisonReport {
        seeds: a.iter().map(|r| r.meta.seed).collect(),
        fusion_mape_delta: mean_std(&fusion_deltas),
        fusion_mape_sign: count_signs(&fusion_deltas),
        obs_mape_delta: mean_std(&obs_deltas),
        edges,
    })
}
