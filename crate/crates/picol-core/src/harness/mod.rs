//! Scenario orchestration: configs, the run loop, persisted logs, scoring
//! and run comparison.

pub mod bundled;
pub mod compare;
pub mod config;
pub mod runlog;
pub mod scenario;

pub use compare::{compare_runs, score_run, ComparisonReport, EdgeDelta, RunScores};
pub use config::{
    PredictorKind, PredictorSection, ResolvedScenario, RouteSection, Scenario, ScenarioConfig,
    SeedSpec, TraceSource,
};
pub use runlog::{read_run, write_run, ReplanRecordSet, ReplanRow, RunLog, RunMeta, StepRecord};
pub use scenario::{
    expected_invocations, predictor_only_series, prepare_predictor, run_scenario, run_seeds,
    RunPredictor,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("simulator: {0}")]
    Simulator(String),
    #[error("predictor: {0}")]
    Predictor(String),
    #[error("routing: {0}")]
    Routing(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("io: {0}")]
    Io(String),
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
}
