//! The run loop: warm-up, the two-rate clock (per-minute control, per-interval
//! prediction), seeding, and the route-level replanning case study.
//!
//! Runs are pure functions of (config, seed). Every camera samples from its
//! own ChaCha stream derived from the run seed, the trace generator uses the
//! run seed directly, and the predictor is fitted once per scenario from
//! dedicated training seeds.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{fuse, observe};
use crate::controller::{
    default_delta_floor, picol_step, CameraRngs, CentralizedEw, ControlMode, LossContext,
    PolicySet, TaskLoss,
};
use crate::objectives::relative_difference;
use crate::predictor::{
    aggregate_states, fit_graph_diffusion, GraphDiffusionPredictor, GraphDiffusionSpec,
    OraclePredictor, PersistencePredictor, PredictionBatch, Predictor, SeasonalPredictor,
};
use crate::routing::{replan_loop, Basis};
use crate::simulator::{Trace, TrafficState};

use super::config::{PredictorKind, ResolvedScenario, Scenario};
use super::runlog::{ReplanRecordSet, RunLog, RunMeta, StepRecord};
use super::HarnessError;

/// The predictor a set of runs shares. The oracle variant is materialized per
/// run because it needs that run's trace.
pub enum RunPredictor {
    Shared(Arc<dyn Predictor>),
    Oracle,
}

/// Builds the configured predictor, fitting the graph-diffusion model on
/// incident-free training traces when needed.
pub fn prepare_predictor(resolved: &ResolvedScenario) -> Result<RunPredictor, HarnessError> {
    let cfg = &resolved.config;
    let step = cfg.aggregation_minutes;
    match cfg.predictor.kind {
        PredictorKind::Persistence => Ok(RunPredictor::Shared(Arc::new(PersistencePredictor {
            window: cfg.window,
            step_minutes: step,
        }))),
        PredictorKind::Seasonal => Ok(RunPredictor::Shared(Arc::new(SeasonalPredictor {
            window: cfg.window,
            period: cfg.predictor.seasonal_period,
            step_minutes: step,
        }))),
        PredictorKind::Oracle => Ok(RunPredictor::Oracle),
        PredictorKind::GraphDiffusion => {
            let spec = GraphDiffusionSpec {
                lambda: cfg.predictor.lambda,
                hops: cfg.predictor.hops,
                window: cfg.window,
                step_minutes: step,
                harmonic_periods: vec![1440.0, 720.0],
            };
            if let Some(path) = &cfg.predictor.params_path {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
                let model = GraphDiffusionPredictor::from_json(&resolved.graph, &text)
                    .map_err(|e| HarnessError::Predictor(e.to_string()))?;
                return Ok(RunPredictor::Shared(Arc::new(model)));
            }
            let channel = resolved.channel();
            let mut series = Vec::with_capacity(cfg.predictor.training_days as usize);
            for i in 0..cfg.predictor.training_days {
                let seed = cfg.predictor.training_seed + i;
                let trace = crate::simulator::generate_trace(
                    &resolved.graph,
                    &resolved.generator,
                    &[],
                    seed,
                )
                .map_err(|e| HarnessError::Simulator(e.to_string()))?;
                series.push(aggregate_states(trace.channel(channel), step));
            }
            let model = fit_graph_diffusion(&resolved.graph, &series, spec)
                .map_err(|e| HarnessError::Predictor(e.to_string()))?;
            Ok(RunPredictor::Shared(Arc::new(model)))
        }
    }
}

struct PredictionClock<'a> {
    predictor: Option<&'a dyn Predictor>,
    window_len: usize,
    aggregation: u32,
    window: Vec<TrafficState>,
    buffer: Vec<TrafficState>,
    batch: Option<PredictionBatch>,
    batch_failed: bool,
    pub invocations: u32,
}

impl<'a> PredictionClock<'a> {
    fn new(predictor: Option<&'a dyn Predictor>, window_len: usize, aggregation: u32) -> Self {
        PredictionClock {
            predictor,
            window_len,
            aggregation,
            window: Vec::new(),
            buffer: Vec::new(),
            batch: None,
            batch_failed: false,
            invocations: 0,
        }
    }

    /// Called at every interval boundary; refreshes the batch in effect.
    fn refresh(&mut self) {
        let Some(predictor) = self.predictor else {
            self.batch = None;
            self.batch_failed = true;
            return;
        };
        if self.window.len() < self.window_len {
            self.batch = None;
            self.batch_failed = true;
            return;
        }
        let history = &self.window[self.window.len() - self.window_len..];
        match predictor.predict(history) {
            Ok(b) => {
                self.batch = Some(b);
                self.batch_failed = false;
                self.invocations += 1;
            }
            Err(_) => {
                self.batch = None;
                self.batch_failed = true;
            }
        }
    }

    /// The interval-aligned prediction the current minute should use.
    fn in_effect(&self) -> Option<&TrafficState> {
        self.batch.as_ref().map(|b| &b.states[0])
    }

    /// Folds a minute's fusion state into the aggregation buffer.
    fn push_minute(&mut self, fusion: TrafficState) {
        self.buffer.push(fusion);
        if self.buffer.len() == self.aggregation as usize {
            let agg = aggregate_states(&self.buffer, self.aggregation);
            self.window.extend(agg);
            self.buffer.clear();
            let keep = self.window_len.max(1);
            if self.window.len() > 4 * keep {
                self.window.drain(..self.window.len() - keep);
            }
        }
    }
}

/// Runs one seeded scenario and returns its full log.
pub fn run_scenario(
    resolved: &ResolvedScenario,
    predictor: &RunPredictor,
    seed: u64,
) -> Result<RunLog, HarnessError> {
    let cfg = &resolved.config;
    let trace = resolved.trace_for_seed(seed)?;
    let channel = resolved.channel();
    let truth = trace.channel(channel);
    let horizon = cfg.horizon_minutes as usize;
    let warmup = cfg.warmup_minutes;
    let agg = cfg.aggregation_minutes;
    let n_cameras = resolved.action_sets.len();
    let task = resolved.task();
    let controller = resolved.controller;
    let delta_floor = default_delta_floor();

    // Oracle predictors need this run's trace.
    let oracle;
    let predictor_ref: Option<&dyn Predictor> = match predictor {
        RunPredictor::Shared(p) => Some(p.as_ref()),
        RunPredictor::Oracle => {
            oracle = OraclePredictor {
                window: cfg.window,
                step_minutes: agg,
                series: aggregate_states(truth, agg),
            };
            Some(&oracle)
        }
    };

    let mut policies = PolicySet::uniform(resolved.action_sets.clone());
    let mut central = match controller.mode {
        ControlMode::EwCentralized => Some(
            CentralizedEw::new(&resolved.action_sets)
                .map_err(|e| HarnessError::ConfigInvalid {
                    field: "controller.mode".into(),
                    message: e.to_string(),
                })?,
        ),
        _ => None,
    };
    let mut rngs = CameraRngs::new(seed, n_cameras);
    let mut central_rng = ChaCha8Rng::seed_from_u64(seed);
    central_rng.set_stream(0);

    let mut clock = PredictionClock::new(predictor_ref, cfg.window, agg);
    let mut last_seen = vec![0.0f64; resolved.graph.edge_count()];
    let mut prev_fusion = TrafficState::new(last_seen.clone(), 0);
    let mut steps = Vec::with_capacity(horizon);
    let mut checkpoints = Vec::new();

    for t in 0..horizon as u32 {
        let truth_t = &truth[t as usize];
        let record = if t < warmup {
            // Warm-up: uniform tilting, no policy updates; unobserved edges
            // carry the most recent observation forward.
            let pred_t = TrafficState::new(last_seen.clone(), t);
            let (actions, joint) = policies.sample_joint(&mut rngs);
            let obs = observe(truth_t, &joint).expect("trace width matches graph");
            let fused = fuse(&obs, &pred_t, &joint).expect("widths match");
            StepRecord {
                t,
                actions,
                mask: joint.mask,
                observation: obs.values,
                fusion: fused.values,
                prediction: pred_t.values,
                fallback: false,
            }
        } else {
            match controller.mode {
                ControlMode::Picol => {
                    if (t - warmup) % agg == 0 {
                        clock.refresh();
                    }
                    let (prediction, fallback) = match clock.in_effect() {
                        Some(p) => (Some(p.clone()), false),
                        None => (None, true),
                    };
                    let out = picol_step(
                        &mut policies,
                        &mut rngs,
                        truth_t,
                        prediction.as_ref(),
                        &prev_fusion,
                        task,
                        &controller,
                        delta_floor,
                    );
                    let pred_logged = match &prediction {
                        Some(p) => p.values.clone(),
                        None => prev_fusion.values.clone(),
                    };
                    StepRecord {
                        t,
                        actions: out.actions,
                        mask: out.joint.mask,
                        observation: out.observation.values,
                        fusion: out.fusion.values,
                        prediction: pred_logged,
                        fallback,
                    }
                }
                ControlMode::Cew => {
                    // Full-information variant: the true state stands in for
                    // the prediction, so fusion equals truth.
                    let out = picol_step(
                        &mut policies,
                        &mut rngs,
                        truth_t,
                        Some(truth_t),
                        &prev_fusion,
                        task,
                        &controller,
                        delta_floor,
                    );
                    StepRecord {
                        t,
                        actions: out.actions,
                        mask: out.joint.mask,
                        observation: out.observation.values,
                        fusion: out.fusion.values,
                        prediction: truth_t.values.clone(),
                        fallback: false,
                    }
                }
                ControlMode::EwCentralized => {
                    let ew = central.as_mut().expect("centralized mode");
                    let (combo, joint) = {
                        let (c, j) = ew.sample(&mut central_rng);
                        (c.to_vec(), j.clone())
                    };
                    let obs = observe(truth_t, &joint).expect("widths match");
                    let fused = fuse(&obs, truth_t, &joint).expect("widths match");
                    let delta = match task {
                        TaskLoss::LinkChange { .. } => Some(
                            relative_difference(&prev_fusion, truth_t, delta_floor)
                                .expect("widths match"),
                        ),
                        _ => None,
                    };
                    let ctx = LossContext { state: truth_t, delta: delta.as_ref() };
                    ew.update(&ctx, task, controller.gamma, controller.epsilon);
                    StepRecord {
                        t,
                        actions: combo,
                        mask: joint.mask,
                        observation: obs.values,
                        fusion: fused.values,
                        prediction: truth_t.values.clone(),
                        fallback: false,
                    }
                }
            }
        };

        last_seen
            .iter_mut()
            .zip(&record.mask)
            .zip(&truth_t.values)
            .for_each(|((seen, &covered), &v)| {
                if covered {
                    *seen = v;
                }
            });
        prev_fusion = TrafficState::new(record.fusion.clone(), t);
        clock.push_minute(prev_fusion.clone());

        if cfg.policy_checkpoint_minutes > 0
            && t > 0
            && t % cfg.policy_checkpoint_minutes == 0
            && !matches!(controller.mode, ControlMode::EwCentralized)
        {
            checkpoints.push((t, policies.dump_json()));
        }
        steps.push(record);
    }

    let meta = RunMeta {
        config_hash: format!("{:016x}", resolved.config_hash),
        seed,
        scenario: cfg.scenario,
        edges: resolved.graph.edges().to_vec(),
        camera_nodes: resolved.placement.nodes().to_vec(),
        horizon_minutes: cfg.horizon_minutes,
        warmup_minutes: cfg.warmup_minutes,
        aggregation_minutes: cfg.aggregation_minutes,
        window: cfg.window,
    };
    let mut log = RunLog { meta, steps, policy_checkpoints: checkpoints, trace, replans: Vec::new() };

    if cfg.scenario == Scenario::Route {
        attach_route_replans(resolved, predictor, &mut log)?;
    }
    Ok(log)
}

/// Rolls the predictor forward on its own outputs after the warm-up,
/// discarding online observations; returns the per-minute prediction in
/// effect.
pub fn predictor_only_series(
    resolved: &ResolvedScenario,
    predictor: &RunPredictor,
    trace: &Trace,
    seed: u64,
) -> Vec<Vec<f64>> {
    let cfg = &resolved.config;
    let channel = resolved.channel();
    let truth = trace.channel(channel);
    let horizon = cfg.horizon_minutes as usize;
    let warmup = cfg.warmup_minutes;
    let agg = cfg.aggregation_minutes;

    let oracle;
    let predictor_ref: Option<&dyn Predictor> = match predictor {
        RunPredictor::Shared(p) => Some(p.as_ref()),
        RunPredictor::Oracle => {
            oracle = OraclePredictor {
                window: cfg.window,
                step_minutes: agg,
                series: aggregate_states(truth, agg),
            };
            Some(&oracle)
        }
    };

    // Warm-up mirrors the live run: uniform tilting fills the window.
    let mut policies = PolicySet::uniform(resolved.action_sets.clone());
    let mut rngs = CameraRngs::new(seed, resolved.action_sets.len());
    let mut clock = PredictionClock::new(predictor_ref, cfg.window, agg);
    let mut last_seen = vec![0.0f64; resolved.graph.edge_count()];
    let mut out = Vec::with_capacity(horizon);

    for t in 0..warmup.min(horizon as u32) {
        let truth_t = &truth[t as usize];
        let pred_t = TrafficState::new(last_seen.clone(), t);
        let (_, joint) = policies.sample_joint(&mut rngs);
        let obs = observe(truth_t, &joint).expect("widths match");
        let fused = fuse(&obs, &pred_t, &joint).expect("widths match");
        for ((seen, &covered), &v) in last_seen.iter_mut().zip(&joint.mask).zip(&truth_t.values) {
            if covered {
                *seen = v;
            }
        }
        out.push(fused.values.clone());
        clock.push_minute(TrafficState::new(fused.values, t));
    }

    let mut t = warmup;
    while (t as usize) < horizon {
        clock.refresh();
        let effect = match clock.in_effect() {
            Some(p) => p.clone(),
            None => TrafficState::new(
                clock.window.last().map(|s| s.values.clone()).unwrap_or_else(|| last_seen.clone()),
                t,
            ),
        };
        for m in 0..agg {
            if (t + m) as usize >= horizon {
                break;
            }
            out.push(effect.values.clone());
        }
        // The predictor's own output becomes the next window entry.
        clock.window.push(TrafficState::new(effect.values.clone(), t));
        let keep = clock.window_len;
        if clock.window.len() > 4 * keep {
            let drop = clock.window.len() - keep;
            clock.window.drain(..drop);
        }
        t += agg;
    }
    out
}

fn attach_route_replans(
    resolved: &ResolvedScenario,
    predictor: &RunPredictor,
    log: &mut RunLog,
) -> Result<(), HarnessError> {
    let route = resolved.route.as_ref().expect("route scenario has a route section");
    let truth = log.trace.channel(resolved.channel()).to_vec();
    let fusion: Vec<Vec<f64>> = log.steps.iter().map(|s| s.fusion.clone()).collect();
    let pred_only = predictor_only_series(resolved, predictor, &log.trace, log.meta.seed);

    let mut replans = Vec::new();
    for basis in [Basis::Prediction, Basis::Fusion, Basis::Truth] {
        let outcome = match basis {
            Basis::Truth => replan_loop(
                &resolved.graph,
                truth.as_slice(),
                truth.as_slice(),
                basis,
                route.origin,
                route.destination,
                route.start_min,
            ),
            Basis::Fusion => replan_loop(
                &resolved.graph,
                truth.as_slice(),
                &fusion,
                basis,
                route.origin,
                route.destination,
                route.start_min,
            ),
            Basis::Prediction => replan_loop(
                &resolved.graph,
                truth.as_slice(),
                &pred_only,
                basis,
                route.origin,
                route.destination,
                route.start_min,
            ),
        }
        .map_err(|e| HarnessError::Routing(e.to_string()))?;
        replans.push((basis, ReplanRecordSet::from_outcome(&outcome)));
    }
    log.replans = replans;
    Ok(())
}

/// Runs many seeds, in parallel up to `PICOL_THREADS` (or the machine's
/// parallelism). Results keep the input order.
pub fn run_seeds(
    resolved: &ResolvedScenario,
    predictor: &RunPredictor,
    seeds: &[u64],
) -> Result<Vec<RunLog>, HarnessError> {
    let threads = std::env::var("PICOL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .min(seeds.len().max(1));

    if threads <= 1 {
        return seeds.iter().map(|&s| run_scenario(resolved, predictor, s)).collect();
    }

    let slots: Vec<Mutex<Option<Result<RunLog, HarnessError>>>> =
        seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let result = run_scenario(resolved, predictor, seeds[i]);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("slot filled"))
        .collect()
}

/// Counts predictor invocations over one run; used to verify the clock
/// discipline (exactly one invocation per aggregation interval).
pub fn expected_invocations(resolved: &ResolvedScenario) -> u32 {
    let cfg = &resolved.config;
    (cfg.horizon_minutes - cfg.warmup_minutes).div_ceil(cfg.aggregation_minutes)
}
