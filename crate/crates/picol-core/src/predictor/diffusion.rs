//! Ridge-fitted graph-diffusion predictor.
//!
//! Each edge gets a linear one-step model over propagated graph features
//! (the state pushed 0..=h hops through `D~^-1 A~`), time-of-day harmonics
//! and an intercept, fitted by ridge least squares over training series.
//! Multi-step prediction iterates the one-step model and clamps at zero.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_history, PredictionBatch, Predictor, PredictorError};
use crate::network::{EdgeAdjacency, RoadGraph};
use crate::simulator::TrafficState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDiffusionSpec {
    /// Ridge penalty; the intercept column is never penalized.
    pub lambda: f64,
    /// Propagation depth: features use 0..=hops applications of `D~^-1 A~`.
    pub hops: usize,
    /// Prediction window K.
    pub window: usize,
    /// Minutes between consecutive states at the model's cadence.
    pub step_minutes: u32,
    /// Harmonic periods in minutes (sine/cosine pair each).
    pub harmonic_periods: Vec<f64>,
}

impl Default for GraphDiffusionSpec {
    fn default() -> Self {
        GraphDiffusionSpec {
            lambda: 1e-3,
            hops: 2,
            window: 12,
            step_minutes: 5,
            harmonic_periods: vec![1440.0, 720.0],
        }
    }
}

impl GraphDiffusionSpec {
    fn feature_count(&self) -> usize {
        self.hops + 1 + 2 * self.harmonic_periods.len() + 1
    }
}

#[derive(Clone, Debug)]
pub struct GraphDiffusionPredictor {
    spec: GraphDiffusionSpec,
    norm_adj: Array2<f64>,
    /// One weight vector per edge, laid out as the feature vector.
    weights: Vec<Vec<f64>>,
    edges: Vec<String>,
}

/// Serialized parameter file: per-edge weights plus the fit settings.
#[derive(Serialize, Deserialize)]
struct DiffusionParams {
    spec: GraphDiffusionSpec,
    edges: Vec<String>,
    weights: Vec<Vec<f64>>,
}

impl GraphDiffusionPredictor {
    pub fn spec(&self) -> &GraphDiffusionSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DiffusionParams {
            spec: self.spec.clone(),
            edges: self.edges.clone(),
            weights: self.weights.clone(),
        })
        .expect("parameters serialize")
    }

    pub fn from_json(g: &RoadGraph, text: &str) -> Result<Self, PredictorError> {
        let params: DiffusionParams = serde_json::from_str(text)
            .map_err(|e| PredictorError::InvalidSpec(format!("bad parameter JSON: {e}")))?;
        let edges: Vec<String> = g.edges().iter().map(|e| e.to_string()).collect();
        if params.edges != edges {
            return Err(PredictorError::InvalidSpec(
                "parameter file edges do not match the graph".into(),
            ));
        }
        if params.weights.len() != edges.len() {
            return Err(PredictorError::InvalidSpec("weight count != edge count".into()));
        }
        Ok(GraphDiffusionPredictor {
            spec: params.spec,
            norm_adj: EdgeAdjacency::new(g).normalized(),
            weights: params.weights,
            edges,
        })
    }

    /// Propagated copies of `values`: out[hop][e].
    fn propagate(&self, values: &[f64]) -> Vec<Vec<f64>> {
        propagate(&self.norm_adj, values, self.spec.hops)
    }

    fn harmonics(&self, minute: f64) -> Vec<f64> {
        harmonics(&self.spec.harmonic_periods, minute)
    }

    /// One-step prediction from a single state, clamped at zero.
    pub fn one_step(&self, state: &TrafficState, t_next: u32) -> TrafficState {
        let prop = self.propagate(&state.values);
        let harm = self.harmonics(f64::from(t_next));
        let n = state.len();
        let mut out = Vec::with_capacity(n);
        for e in 0..n {
            let w = &self.weights[e];
            let mut y = 0.0;
            let mut c = 0;
            for hop in &prop {
                y += w[c] * hop[e];
                c += 1;
            }
            for h in &harm {
                y += w[c] * h;
                c += 1;
            }
            y += w[c]; // intercept
            out.push(y.max(0.0));
        }
        TrafficState::new(out, t_next)
    }
}

impl Predictor for GraphDiffusionPredictor {
    fn window(&self) -> usize {
        self.spec.window
    }

    fn step_minutes(&self) -> u32 {
        self.spec.step_minutes
    }

    fn predict(&self, history: &[TrafficState]) -> Result<PredictionBatch, PredictorError> {
        check_history(history, self.spec.window, Some(self.weights.len()))?;
        let mut cur = history[history.len() - 1].clone();
        let mut states = Vec::with_capacity(self.spec.window);
        for _ in 0..self.spec.window {
            let next = self.one_step(&cur, cur.t + self.spec.step_minutes);
            states.push(next.clone());
            cur = next;
        }
        Ok(PredictionBatch { issued_at: states[0].t, states })
    }
}

fn propagate(norm_adj: &Array2<f64>, values: &[f64], hops: usize) -> Vec<Vec<f64>> {
    let n = values.len();
    let mut out = Vec::with_capacity(hops + 1);
    out.push(values.to_vec());
    for _ in 0..hops {
        let prev = out.last().unwrap();
        let mut next = vec![0.0; n];
        for e in 0..n {
            let mut acc = 0.0;
            for f in 0..n {
                acc += norm_adj[(e, f)] * prev[f];
            }
            next[e] = acc;
        }
        out.push(next);
    }
    out
}

fn harmonics(periods: &[f64], minute: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * periods.len());
    for p in periods {
        let phase = 2.0 * std::f64::consts::PI * minute / p;
        out.push(phase.sin());
        out.push(phase.cos());
    }
    out
}

/// Solves `(XᵀX + λ D) w = Xᵀ y` by Gaussian elimination with partial
/// pivoting; `D` is the identity with a zero in the intercept slot.
fn ridge_solve(
    xtx: &mut [Vec<f64>],
    xty: &mut [f64],
    lambda: f64,
) -> Result<Vec<f64>, PredictorError> {
    let p = xty.len();
    for i in 0..p - 1 {
        xtx[i][i] += lambda; // last column is the intercept
    }
    // Forward elimination.
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&a, &b| xtx[a][col].abs().total_cmp(&xtx[b][col].abs()))
            .unwrap();
        if xtx[pivot_row][col].abs() < 1e-12 {
            return Err(PredictorError::SingularSystem(format!(
                "zero pivot in column {col}; increase lambda"
            )));
        }
        xtx.swap(col, pivot_row);
        xty.swap(col, pivot_row);
        for row in col + 1..p {
            let factor = xtx[row][col] / xtx[col][col];
            for k in col..p {
                xtx[row][k] -= factor * xtx[col][k];
            }
            xty[row] -= factor * xty[col];
        }
    }
    // Back substitution.
    let mut w = vec![0.0; p];
    for row in (0..p).rev() {
        let mut acc = xty[row];
        for k in row + 1..p {
            acc -= xtx[row][k] * w[k];
        }
        w[row] = acc / xtx[row][row];
    }
    Ok(w)
}

/// Fits the per-edge ridge models on one or more training series given at
/// the model's cadence.
pub fn fit_graph_diffusion(
    g: &RoadGraph,
    series: &[Vec<TrafficState>],
    spec: GraphDiffusionSpec,
) -> Result<GraphDiffusionPredictor, PredictorError> {
    if spec.lambda < 0.0 {
        return Err(PredictorError::InvalidSpec("lambda must be >= 0".into()));
    }
    if series.is_empty() || series.iter().all(|s| s.len() < 2) {
        return Err(PredictorError::WindowTooShort { got: 0, need: 2 });
    }
    let n = g.edge_count();
    let p = spec.feature_count();
    let norm_adj = EdgeAdjacency::new(g).normalized();

    // Accumulate per-edge normal equations.
    let mut xtx = vec![vec![vec![0.0f64; p]; p]; n];
    let mut xty = vec![vec![0.0f64; p]; n];
    let mut feats = vec![0.0f64; p];
    for s in series {
        for pair in s.windows(2) {
            let (cur, next) = (&pair[0], &pair[1]);
            if cur.len() != n || next.len() != n {
                return Err(PredictorError::DimensionMismatch {
                    got: cur.len().max(next.len()),
                    expected: n,
                });
            }
            let prop = propagate(&norm_adj, &cur.values, spec.hops);
            let harm = harmonics(&spec.harmonic_periods, f64::from(next.t));
            for e in 0..n {
                let mut c = 0;
                for hop in &prop {
                    feats[c] = hop[e];
                    c += 1;
                }
                for &h in &harm {
                    feats[c] = h;
                    c += 1;
                }
                feats[c] = 1.0;
                let y = next.values[e];
                for i in 0..p {
                    xty[e][i] += feats[i] * y;
                    for j in i..p {
                        xtx[e][i][j] += feats[i] * feats[j];
                    }
                }
            }
        }
    }

    let mut weights = Vec::with_capacity(n);
    for e in 0..n {
        // Mirror the upper triangle.
        for i in 0..p {
            for j in 0..i {
                xtx[e][i][j] = xtx[e][j][i];
            }
        }
        weights.push(ridge_solve(&mut xtx[e], &mut xty[e], spec.lambda)?);
    }

    Ok(GraphDiffusionPredictor {
        spec,
        norm_adj,
        weights,
        edges: g.edges().iter().map(|e| e.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bundled_graph, RoadGraph};
    use crate::predictor::PersistencePredictor;
    use crate::simulator::{generate_trace, GeneratorConfig};

    fn spec(lambda: f64, hops: usize) -> GraphDiffusionSpec {
        GraphDiffusionSpec { lambda, hops, window: 12, step_minutes: 5, harmonic_periods: vec![1440.0, 720.0] }
    }

    /// Rolls a series from the model family itself: s_{t+1} = W phi(s_t).
    fn roll_linear_series(
        g: &RoadGraph,
        spec: &GraphDiffusionSpec,
        w_self: f64,
        w_hop: f64,
        intercept: f64,
        steps: usize,
    ) -> Vec<TrafficState> {
        let norm_adj = EdgeAdjacency::new(g).normalized();
        let n = g.edge_count();
        let mut cur = TrafficState::new((0..n).map(|e| 10.0 + e as f64).collect(), 0);
        let mut out = vec![cur.clone()];
        for _ in 0..steps {
            let prop = propagate(&norm_adj, &cur.values, spec.hops);
            let t_next = cur.t + spec.step_minutes;
            let harm = harmonics(&spec.harmonic_periods, f64::from(t_next));
            let values: Vec<f64> = (0..n)
                .map(|e| {
                    w_self * prop[0][e]
                        + w_hop * prop[1][e]
                        + 0.5 * harm[0]
                        + 0.25 * harm[1]
                        + intercept
                })
                .collect();
            cur = TrafficState::new(values, t_next);
            out.push(cur.clone());
        }
        out
    }

    #[test]
    fn realizable_series_recovered_exactly() {
        let g = bundled_graph();
        let sp = spec(1e-8, 2);
        let series = roll_linear_series(&g, &sp, 0.5, 0.2, 4.0, 300);
        let (train, test) = series.split_at(250);
        let model = fit_graph_diffusion(&g, &[train.to_vec()], sp).unwrap();
        let mut max_err: f64 = 0.0;
        for pair in test.windows(2) {
            let pred = model.one_step(&pair[0], pair[1].t);
            for (a, b) in pred.values.iter().zip(&pair[1].values) {
                max_err = max_err.max((a - b).abs());
            }
        }
        assert!(max_err < 1e-6, "held-out one-step error {max_err}");
    }

    #[test]
    fn huge_lambda_predicts_training_mean() {
        let g = RoadGraph::build(&[(1, 2), (2, 1)]).unwrap();
        let sp = GraphDiffusionSpec { lambda: 1e12, hops: 1, window: 4, step_minutes: 1, harmonic_periods: vec![] };
        let series: Vec<TrafficState> = (0..100)
            .map(|t| TrafficState::new(vec![f64::from(t % 10), 5.0], t))
            .collect();
        let model = fit_graph_diffusion(&g, &[series.clone()], sp).unwrap();
        let mean0 = (0..99).map(|t| f64::from((t + 1) % 10)).sum::<f64>() / 99.0;
        let pred = model.one_step(&series[0], 1);
        assert!((pred.values[0] - mean0).abs() < 1e-3, "{} vs {mean0}", pred.values[0]);
        assert!((pred.values[1] - 5.0).abs() < 1e-3);
    }

    #[test]
    fn singular_without_ridge() {
        // Identical duplicate features (hop 0 == hop 1 on a single edge) and
        // lambda 0 leave the normal equations rank deficient.
        let g = RoadGraph::build(&[(1, 2)]).unwrap();
        let sp = GraphDiffusionSpec { lambda: 0.0, hops: 1, window: 2, step_minutes: 1, harmonic_periods: vec![] };
        let series: Vec<TrafficState> =
            (0..50).map(|t| TrafficState::new(vec![2.0], t)).collect();
        let err = fit_graph_diffusion(&g, &[series], sp).unwrap_err();
        assert!(matches!(err, PredictorError::SingularSystem(_)));
    }

    #[test]
    fn symmetric_history_gives_symmetric_predictions() {
        let g = RoadGraph::build(&[(1, 2), (2, 1)]).unwrap();
        let sp = GraphDiffusionSpec { lambda: 1e-3, hops: 1, window: 3, step_minutes: 1, harmonic_periods: vec![] };
        // Symmetric training data: both edges always equal.
        let series: Vec<TrafficState> = (0..200)
            .map(|t| {
                let v = 10.0 + (f64::from(t) * 0.1).sin();
                TrafficState::new(vec![v, v], t)
            })
            .collect();
        let model = fit_graph_diffusion(&g, &[series], sp).unwrap();
        let history: Vec<TrafficState> = (0..3)
            .map(|t| TrafficState::new(vec![7.0, 7.0], t))
            .collect();
        let batch = model.predict(&history).unwrap();
        for st in &batch.states {
            assert!((st.values[0] - st.values[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn beats_persistence_on_generated_traffic() {
        let g = bundled_graph();
        let cfg = GeneratorConfig::default();
        let sp = spec(1e-3, 2);
        let train: Vec<Vec<TrafficState>> = (100..120)
            .map(|seed| {
                let trace = generate_trace(&g, &cfg, &[], seed).unwrap();
                crate::predictor::aggregate_states(&trace.volume, 5)
            })
            .collect();
        let model = fit_graph_diffusion(&g, &train, sp).unwrap();
        let held_out = crate::predictor::aggregate_states(
            &generate_trace(&g, &cfg, &[], 999).unwrap().volume,
            5,
        );
        let mut model_mae = 0.0;
        let mut persist_mae = 0.0;
        let mut count = 0.0;
        for pair in held_out.windows(2) {
            let pred = model.one_step(&pair[0], pair[1].t);
            for e in 0..g.edge_count() {
                model_mae += (pred.values[e] - pair[1].values[e]).abs();
                persist_mae += (pair[0].values[e] - pair[1].values[e]).abs();
                count += 1.0;
            }
        }
        model_mae /= count;
        persist_mae /= count;
        assert!(
            model_mae < persist_mae,
            "diffusion {model_mae} should beat persistence {persist_mae}"
        );
    }

    #[test]
    fn parameter_json_round_trip() {
        let g = bundled_graph();
        let sp = spec(1e-3, 1);
        let series = roll_linear_series(&g, &sp, 0.4, 0.1, 2.0, 60);
        let model = fit_graph_diffusion(&g, &[series], sp).unwrap();
        let json = model.to_json();
        let back = GraphDiffusionPredictor::from_json(&g, &json).unwrap();
        assert_eq!(model.weights(), back.weights());
        assert_eq!(model.spec(), back.spec());
    }

    #[test]
    fn predictions_clamped_nonnegative() {
        let g = RoadGraph::build(&[(1, 2), (2, 1)]).unwrap();
        let sp = GraphDiffusionSpec { lambda: 1e-6, hops: 0, window: 2, step_minutes: 1, harmonic_periods: vec![] };
        // Strongly decreasing target drives the linear model negative.
        let series: Vec<TrafficState> = (0..100)
            .map(|t| TrafficState::new(vec![100.0 - f64::from(t), 50.0], t))
            .collect();
        let model = fit_graph_diffusion(&g, &[series], sp).unwrap();
        let history = vec![
            TrafficState::new(vec![1.0, 1.0], 0),
            TrafficState::new(vec![0.5, 1.0], 1),
        ];
        let batch = model.predict(&history).unwrap();
        for st in &batch.states {
            assert!(st.values.iter().all(|&v| v >= 0.0));
        }
    }
}
