//! Evaluation scores computed from run logs.
//!
//! Hourly scores compare observations and fusion states against the truth
//! with per-step L1 errors; edge scores average per-edge absolute errors of
//! predictions (forecasting) and fusion states (reconstruction) over the
//! whole horizon. Detection delay measures how long a coverage log takes to
//! look at an incident edge after the incident starts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Edge;
use crate::simulator::{IncidentSpec, TrafficState};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
}

/// One hour of observation and fusion errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HourlyScore {
    pub hour: u32,
    pub obs_mae: f64,
    pub obs_mape: f64,
    pub fusion_mae: f64,
    pub fusion_mape: f64,
    /// Steps whose total volume was zero; they are skipped in the MAPE
    /// means.
    pub skipped_steps: u32,
}

/// Per-edge averaged absolute errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub edge: Edge,
    pub forecasting_mae: f64,
    pub reconstruction_mae: f64,
}

fn l1_diff(a: &TrafficState, b: &TrafficState) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .sum()
}

fn check_aligned(
    name: &str,
    truth: &[TrafficState],
    other: &[TrafficState],
) -> Result<(), MetricsError> {
    if truth.len() != other.len() {
        return Err(MetricsError::Misaligned(format!(
            "{name}: {} steps vs {} truth steps",
            other.len(),
            truth.len()
        )));
    }
    for (a, b) in truth.iter().zip(other) {
        if a.len() != b.len() {
            return Err(MetricsError::Misaligned(format!(
                "{name}: state width {} vs truth width {}",
                b.len(),
                a.len()
            )));
        }
    }
    Ok(())
}

/// Hourly observation/fusion MAE and MAPE. The horizon must be a multiple of
/// 60 minutes.
pub fn hourly_scores(
    truth: &[TrafficState],
    observations: &[TrafficState],
    fusions: &[TrafficState],
) -> Result<Vec<HourlyScore>, MetricsError> {
    check_aligned("observations", truth, observations)?;
    check_aligned("fusions", truth, fusions)?;
    if truth.is_empty() || truth.len() % 60 != 0 {
        return Err(MetricsError::Misaligned(format!(
            "horizon {} is not a positive multiple of 60",
            truth.len()
        )));
    }
    let hours = truth.len() / 60;
    let mut out = Vec::with_capacity(hours);
    for hour in 0..hours {
        let mut obs_mae = 0.0;
        let mut fusion_mae = 0.0;
        let mut obs_mape = 0.0;
        let mut fusion_mape = 0.0;
        let mut skipped = 0u32;
        for t in hour * 60..(hour + 1) * 60 {
            let o = l1_diff(&observations[t], &truth[t]);
            let f = l1_diff(&fusions[t], &truth[t]);
            obs_mae += o;
            fusion_mae += f;
            let denom = truth[t].l1_norm();
            if denom > 0.0 {
                obs_mape += o / denom;
                fusion_mape += f / denom;
            } else {
                skipped += 1;
            }
        }
        let mape_steps = f64::from(60 - skipped as i32 as u32).max(1.0);
        out.push(HourlyScore {
            hour: hour as u32,
            obs_mae: obs_mae / 60.0,
            obs_mape: obs_mape / mape_steps,
            fusion_mae: fusion_mae / 60.0,
            fusion_mape: fusion_mape / mape_steps,
            skipped_steps: skipped,
        });
    }
    Ok(out)
}

/// Per-edge forecasting (prediction vs truth) and reconstruction (fusion vs
/// truth) MAE over the whole horizon.
pub fn edge_scores(
    truth: &[TrafficState],
    predictions: &[TrafficState],
    fusions: &[TrafficState],
    edges: &[Edge],
) -> Result<Vec<EdgeScore>, MetricsError> {
    check_aligned("predictions", truth, predictions)?;
    check_aligned("fusions", truth, fusions)?;
    if truth.is_empty() {
        return Err(MetricsError::Misaligned("empty horizon".into()));
    }
    if truth[0].len() != edges.len() {
        return Err(MetricsError::Misaligned(format!(
            "{} edges vs state width {}",
            edges.len(),
            truth[0].len()
        )));
    }
    let steps = truth.len() as f64;
    let mut out = Vec::with_capacity(edges.len());
    for (k, &edge) in edges.iter().enumerate() {
        let mut fore = 0.0;
        let mut reco = 0.0;
        for t in 0..truth.len() {
            fore += (predictions[t].values[k] - truth[t].values[k]).abs();
            reco += (fusions[t].values[k] - truth[t].values[k]).abs();
        }
        out.push(EdgeScore {
            edge,
            forecasting_mae: fore / steps,
            reconstruction_mae: reco / steps,
        });
    }
    Ok(out)
}

/// Minutes from the incident start until the coverage log first includes the
/// incident edge, or `None` if it never does while the incident is active.
pub fn detection_delay(
    coverage: &[Vec<bool>],
    incident: &IncidentSpec,
    edge_index: usize,
) -> Option<u32> {
    let end = incident.start_min.saturating_add(incident.duration_min);
    for t in incident.start_min..end.min(coverage.len() as u32) {
        if coverage[t as usize][edge_index] {
            return Some(t - incident.start_min);
        }
    }
    None
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MeanStd { mean, std: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MeanStd { mean, std: var.sqrt() }
}

/// Hourly scores aggregated across repeated runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HourlySummary {
    pub hour: u32,
    pub obs_mae: MeanStd,
    pub obs_mape: MeanStd,
    pub fusion_mae: MeanStd,
    pub fusion_mape: MeanStd,
}

pub fn summarize_hourly(per_run: &[Vec<HourlyScore>]) -> Vec<HourlySummary> {
    if per_run.is_empty() {
        return Vec::new();
    }
    let hours = per_run[0].len();
    (0..hours)
        .map(|h| {
            let pick = |f: fn(&HourlyScore) -> f64| {
                mean_std(&per_run.iter().map(|run| f(&run[h])).collect::<Vec<_>>())
            };
            HourlySummary {
                hour: per_run[0][h].hour,
                obs_mae: pick(|s| s.obs_mae),
                obs_mape: pick(|s| s.obs_mape),
                fusion_mae: pick(|s| s.fusion_mae),
                fusion_mape: pick(|s| s.fusion_mape),
            }
        })
        .collect()
}

/// Edge scores aggregated across repeated runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub edge: Edge,
    pub forecasting_mae: MeanStd,
    pub reconstruction_mae: MeanStd,
}

pub fn summarize_edges(per_run: &[Vec<EdgeScore>]) -> Vec<EdgeSummary> {
    if per_run.is_empty() {
        return Vec::new();
    }
    let n = per_run[0].len();
    (0..n)
        .map(|k| EdgeSummary {
            edge: per_run[0][k].edge,
            forecasting_mae: mean_std(
                &per_run.iter().map(|run| run[k].forecasting_mae).collect::<Vec<_>>(),
            ),
            reconstruction_mae: mean_std(
                &per_run.iter().map(|run| run[k].reconstruction_mae).collect::<Vec<_>>(),
            ),
        })
        .collect()
}

/// Exact binomial sign test at p = 1/2, ties excluded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: u32,
    pub losses: u32,
    /// P(X >= wins) under Binomial(wins+losses, 1/2).
    pub one_sided_p: f64,
    pub two_sided_p: f64,
}

pub fn sign_test(wins: u32, losses: u32) -> SignTest {
    let n = wins + losses;
    if n == 0 {
        return SignTest { wins, losses, one_sided_p: 1.0, two_sided_p: 1.0 };
    }
    let upper = binom_tail_ge(n, wins);
    let lower = binom_tail_ge(n, losses);
    SignTest {
        wins,
        losses,
        one_sided_p: upper,
        two_sided_p: (2.0 * upper.min(lower)).min(1.0),
    }
}

/// P(X >= k) for X ~ Binomial(n, 1/2), summed in log space.
fn binom_tail_ge(n: u32, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let n_f = f64::from(n);
    let mut tail = 0.0;
    for j in k..=n {
        // ln C(n, j)
        let mut ln_c = 0.0;
        for i in 0..j {
            ln_c += (n_f - f64::from(i)).ln() - f64::from(i + 1).ln();
        }
        tail += (ln_c - n_f * std::f64::consts::LN_2).exp();
    }
    tail.min(1.0)
}

/// CSV rows (`seed,hour,obs_mae,obs_mape,fusion_mae,fusion_mape,skipped`).
pub fn hourly_scores_csv(rows: &[(u64, &[HourlyScore])]) -> String {
    let mut s = String::from("seed,hour,obs_mae,obs_mape,fusion_mae,fusion_mape,skipped_steps\n");
    for (seed, scores) in rows {
        for sc in scores.iter() {
            s.push_str(&format!(
                "{seed},{},{},{},{},{},{}\n",
                sc.hour, sc.obs_mae, sc.obs_mape, sc.fusion_mae, sc.fusion_mape, sc.skipped_steps
            ));
        }
    }
    s
}

/// CSV rows (`seed,edge,forecasting_mae,reconstruction_mae`).
pub fn edge_scores_csv(rows: &[(u64, &[EdgeScore])]) -> String {
    let mut s = String::from("seed,edge,forecasting_mae,reconstruction_mae\n");
    for (seed, scores) in rows {
        for sc in scores.iter() {
            s.push_str(&format!(
                "{seed},{},{},{}\n",
                sc.edge, sc.forecasting_mae, sc.reconstruction_mae
            ));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    fn series(values: Vec<Vec<f64>>) -> Vec<TrafficState> {
        values
            .into_iter()
            .enumerate()
            .map(|(t, v)| TrafficState::new(v, t as u32))
            .collect()
    }

    #[test]
    fn full_coverage_zeroes_mapes() {
        let truth = series(vec![vec![10.0, 30.0]; 60]);
        let scores = hourly_scores(&truth, &truth, &truth).unwrap();
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].obs_mape, 0.0);
        assert_eq!(scores[0].fusion_mape, 0.0);
    }

    #[test]
    fn zero_coverage_with_oracle_fusion() {
        let truth = series(vec![vec![10.0, 30.0]; 60]);
        let zeros = series(vec![vec![0.0, 0.0]; 60]);
        let scores = hourly_scores(&truth, &zeros, &truth).unwrap();
        assert_eq!(scores[0].obs_mape, 1.0);
        assert_eq!(scores[0].fusion_mape, 0.0);
    }

    #[test]
    fn hand_computed_hourly_example() {
        // s = [10, 30], coverage of the second edge only.
        let truth = series(vec![vec![10.0, 30.0]; 60]);
        let obs = series(vec![vec![0.0, 30.0]; 60]);
        let scores = hourly_scores(&truth, &obs, &truth).unwrap();
        assert_eq!(scores[0].obs_mae, 10.0);
        assert_eq!(scores[0].obs_mape, 0.25);
        assert_eq!(scores[0].skipped_steps, 0);
    }

    #[test]
    fn degenerate_steps_skipped_and_counted() {
        let mut truth_v = vec![vec![10.0, 30.0]; 60];
        truth_v[0] = vec![0.0, 0.0];
        let truth = series(truth_v);
        let obs = series(vec![vec![0.0, 30.0]; 60]);
        let scores = hourly_scores(&truth, &obs, &truth).unwrap();
        assert_eq!(scores[0].skipped_steps, 1);
        // 59 valid steps, each contributing 10/40.
        assert!((scores[0].obs_mape - 0.25).abs() < 1e-12);
    }

    #[test]
    fn misalignment_detected() {
        let truth = series(vec![vec![1.0]; 60]);
        let short = series(vec![vec![1.0]; 59]);
        assert!(matches!(
            hourly_scores(&truth, &short, &truth),
            Err(MetricsError::Misaligned(_))
        ));
        let not_hourly = series(vec![vec![1.0]; 61]);
        assert!(matches!(
            hourly_scores(&not_hourly, &not_hourly, &not_hourly),
            Err(MetricsError::Misaligned(_))
        ));
    }

    #[test]
    fn edge_score_examples() {
        let edges = [Edge::new(1, 2), Edge::new(2, 1)];
        let truth = series(vec![vec![10.0, 20.0]; 100]);
        let pred = series(vec![vec![15.0, 25.0]; 100]);
        let scores = edge_scores(&truth, &pred, &truth, &edges).unwrap();
        assert_eq!(scores[0].forecasting_mae, 5.0);
        assert_eq!(scores[0].reconstruction_mae, 0.0);
        assert_eq!(scores[1].edge, Edge::new(2, 1));
    }

    #[test]
    fn covered_edge_reconstructs_exactly() {
        // Fusion keeps truth on a covered edge regardless of predictions.
        let edges = [Edge::new(1, 2), Edge::new(2, 1)];
        let truth = series(vec![vec![10.0, 20.0]; 10]);
        let pred = series(vec![vec![99.0, 99.0]; 10]);
        let fused = series(vec![vec![10.0, 99.0]; 10]);
        let scores = edge_scores(&truth, &pred, &fused, &edges).unwrap();
        assert_eq!(scores[0].reconstruction_mae, 0.0);
        assert_eq!(scores[1].reconstruction_mae, 79.0);
    }

    #[test]
    fn detection_delay_examples() {
        let incident = IncidentSpec {
            edge: Edge::new(2, 1),
            start_min: 5,
            duration_min: 4,
            severity: 1.0,
        };
        let mut coverage = vec![vec![false, false]; 20];
        coverage[5][0] = true;
        assert_eq!(detection_delay(&coverage, &incident, 0), Some(0));
        assert_eq!(detection_delay(&coverage, &incident, 1), None);
        let mut late = vec![vec![false]; 20];
        late[7][0] = true;
        assert_eq!(detection_delay(&late, &incident, 0), Some(2));
        // Coverage after the incident window does not count.
        let mut too_late = vec![vec![false]; 20];
        too_late[9][0] = true;
        assert_eq!(detection_delay(&too_late, &incident, 0), None);
    }

    #[test]
    fn sign_test_values() {
        let t = sign_test(9, 1);
        // P(X >= 9), X ~ Bin(10, 1/2) = (10 + 1) / 1024.
        assert!((t.one_sided_p - 11.0 / 1024.0).abs() < 1e-12);
        let even = sign_test(5, 5);
        assert!(even.one_sided_p > 0.5);
        assert_eq!(sign_test(0, 0).one_sided_p, 1.0);
    }

    #[test]
    fn mean_std_basics() {
        let ms = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!((ms.mean - 2.5).abs() < 1e-12);
        assert!((ms.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[7.0]).std, 0.0);
    }

    #[test]
    fn summaries_aggregate_across_runs() {
        let run = |x: f64| {
            vec![HourlyScore {
                hour: 0,
                obs_mae: x,
                obs_mape: x / 10.0,
                fusion_mae: x / 2.0,
                fusion_mape: x / 20.0,
                skipped_steps: 0,
            }]
        };
        let summary = summarize_hourly(&[run(1.0), run(3.0)]);
        assert_eq!(summary.len(), 1);
        assert!((summary[0].obs_mae.mean - 2.0).abs() < 1e-12);
        assert!(summary[0].obs_mae.std > 0.0);
    }
}
