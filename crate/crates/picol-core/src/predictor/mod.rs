//! The forecasting contract and the reference predictors.
//!
//! A predictor maps the last `K` (fused) states to the next `K` predicted
//! states at the same cadence. Everything here is deterministic given the
//! history and the predictor parameters; predictions are clamped at zero.

mod diffusion;
mod kernels;

pub use diffusion::{
    fit_graph_diffusion, GraphDiffusionPredictor, GraphDiffusionSpec,
};
pub use kernels::{
    graph_conv_forward, row_sums, scaled_dot_attention, spatial_weights, Activation,
    GraphConvLayer, KernelError, SpatialWeightMatrix,
};

use thiserror::Error;

use crate::simulator::TrafficState;

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("window too short: got {got}, need {need}")]
    WindowTooShort { got: usize, need: usize },
    #[error("dimension mismatch: state {got} vs expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("training failed: {0}")]
    SingularSystem(String),
    #[error("bad predictor parameters: {0}")]
    InvalidSpec(String),
}

/// A batch of `K` consecutive predicted states starting at `issued_at`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionBatch {
    pub states: Vec<TrafficState>,
    pub issued_at: u32,
}

/// The forecasting contract: past `K` states in, next `K` states out.
pub trait Predictor: Send + Sync {
    /// Window length `K`.
    fn window(&self) -> usize;

    /// Minutes between consecutive history entries.
    fn step_minutes(&self) -> u32;

    fn predict(&self, history: &[TrafficState]) -> Result<PredictionBatch, PredictorError>;
}

pub(crate) fn check_history(
    history: &[TrafficState],
    k: usize,
    dim: Option<usize>,
) -> Result<usize, PredictorError> {
    if history.len() < k {
        return Err(PredictorError::WindowTooShort { got: history.len(), need: k });
    }
    let n = history[0].len();
    if let Some(expected) = dim {
        if n != expected {
            return Err(PredictorError::DimensionMismatch { got: n, expected });
        }
    }
    for st in history {
        if st.len() != n {
            return Err(PredictorError::DimensionMismatch { got: st.len(), expected: n });
        }
    }
    Ok(n)
}

/// Repeats the most recent state `K` times.
#[derive(Clone, Debug)]
pub struct PersistencePredictor {
    pub window: usize,
    pub step_minutes: u32,
}

impl Predictor for PersistencePredictor {
    fn window(&self) -> usize {
        self.window
    }

    fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    fn predict(&self, history: &[TrafficState]) -> Result<PredictionBatch, PredictorError> {
        check_history(history, self.window, None)?;
        let last = &history[history.len() - 1];
        let issued_at = last.t + self.step_minutes;
        let states = (0..self.window)
            .map(|j| {
                let values = last.values.iter().map(|v| v.max(0.0)).collect();
                TrafficState::new(values, last.t + (j as u32 + 1) * self.step_minutes)
            })
            .collect();
        Ok(PredictionBatch { states, issued_at })
    }
}

/// Repeats the last full period of the history.
#[derive(Clone, Debug)]
pub struct SeasonalPredictor {
    pub window: usize,
    pub period: usize,
    pub step_minutes: u32,
}

impl Predictor for SeasonalPredictor {
    fn window(&self) -> usize {
        self.window
    }

    fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    fn predict(&self, history: &[TrafficState]) -> Result<PredictionBatch, PredictorError> {
        if self.period == 0 || self.period > self.window {
            return Err(PredictorError::InvalidSpec(format!(
                "period {} must be in 1..={}",
                self.period, self.window
            )));
        }
        check_history(history, self.window, None)?;
        let last_t = history[history.len() - 1].t;
        let states = (0..self.window)
            .map(|j| {
                let src = &history[history.len() - self.period + (j % self.period)];
                let values = src.values.iter().map(|v| v.max(0.0)).collect();
                TrafficState::new(values, last_t + (j as u32 + 1) * self.step_minutes)
            })
            .collect();
        Ok(PredictionBatch { states, issued_at: last_t + self.step_minutes })
    }
}

/// Returns the true future states; a diagnostic stand-in used to isolate the
/// controller from prediction error.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    pub window: usize,
    pub step_minutes: u32,
    /// The full truth series at the predictor cadence, ordered by time.
    pub series: Vec<TrafficState>,
}

impl Predictor for OraclePredictor {
    fn window(&self) -> usize {
        self.window
    }

    fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    fn predict(&self, history: &[TrafficState]) -> Result<PredictionBatch, PredictorError> {
        check_history(history, self.window, None)?;
        let last_t = history[history.len() - 1].t;
        let start = self
            .series
            .iter()
            .position(|s| s.t > last_t)
            .unwrap_or(self.series.len().saturating_sub(1));
        let states = (0..self.window)
            .map(|j| {
                let idx = (start + j).min(self.series.len() - 1);
                self.series[idx].clone()
            })
            .collect();
        Ok(PredictionBatch { states, issued_at: last_t + self.step_minutes })
    }
}

/// Block means of a minute series: one output state per `agg` minutes, with
/// `t` set to the block's first minute. Trailing partial blocks are dropped.
pub fn aggregate_states(states: &[TrafficState], agg: u32) -> Vec<TrafficState> {
    assert!(agg >= 1);
    let agg = agg as usize;
    let mut out = Vec::with_capacity(states.len() / agg);
    for block in states.chunks_exact(agg) {
        let n = block[0].len();
        let mut values = vec![0.0; n];
        for st in block {
            for (acc, v) in values.iter_mut().zip(&st.values) {
                *acc += v;
            }
        }
        for v in &mut values {
            *v /= agg as f64;
        }
        out.push(TrafficState::new(values, block[0].t));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(values: &[f64], t: u32) -> TrafficState {
        TrafficState::new(values.to_vec(), t)
    }

    #[test]
    fn persistence_repeats_last_state() {
        let p = PersistencePredictor { window: 3, step_minutes: 5 };
        let s = state(&[2.0, 4.0], 10);
        let history = vec![s.clone(), s.clone(), s.clone()];
        let batch = p.predict(&history).unwrap();
        assert_eq!(batch.states.len(), 3);
        assert_eq!(batch.issued_at, 15);
        for (j, st) in batch.states.iter().enumerate() {
            assert_eq!(st.values, s.values);
            assert_eq!(st.t, 10 + 5 * (j as u32 + 1));
        }
    }

    #[test]
    fn persistence_window_too_short() {
        let p = PersistencePredictor { window: 4, step_minutes: 5 };
        let history = vec![state(&[1.0], 0)];
        assert_eq!(
            p.predict(&history),
            Err(PredictorError::WindowTooShort { got: 1, need: 4 })
        );
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let p = PersistencePredictor { window: 2, step_minutes: 1 };
        let history = vec![state(&[1.0], 0), state(&[1.0, 2.0], 1)];
        assert!(matches!(
            p.predict(&history),
            Err(PredictorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn seasonal_continues_exact_period() {
        let p = SeasonalPredictor { window: 6, period: 3, step_minutes: 1 };
        // Periodic history a,b,c,a,b,c -> prediction a,b,c,a,b,c.
        let vals = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let history: Vec<TrafficState> =
            vals.iter().enumerate().map(|(i, &v)| state(&[v], i as u32)).collect();
        let batch = p.predict(&history).unwrap();
        let got: Vec<f64> = batch.states.iter().map(|s| s.values[0]).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn oracle_returns_future_truth() {
        let series: Vec<TrafficState> =
            (0..10).map(|i| state(&[f64::from(i)], i * 5)).collect();
        let p = OraclePredictor { window: 2, step_minutes: 5, series };
        let history = vec![state(&[0.0], 5), state(&[0.0], 10)];
        let batch = p.predict(&history).unwrap();
        assert_eq!(batch.states[0].values, vec![3.0]);
        assert_eq!(batch.states[1].values, vec![4.0]);
    }

    #[test]
    fn aggregation_means_blocks() {
        let states: Vec<TrafficState> =
            (0..6).map(|i| state(&[f64::from(i), 10.0], i)).collect();
        let agg = aggregate_states(&states, 3);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].values, vec![1.0, 10.0]);
        assert_eq!(agg[0].t, 0);
        assert_eq!(agg[1].values, vec![4.0, 10.0]);
        assert_eq!(agg[1].t, 3);
    }
}
