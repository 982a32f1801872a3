//! Online-learning tilt policies: centralized exponential weights, per-camera
//! correlated exponential weights, and the predictive fusion step.
//!
//! All weight updates run in log-space with max-subtraction, so long runs and
//! large losses cannot overflow the weights. The correlated update scores
//! each candidate action of one camera against the realized actions of the
//! others (swap one action, re-OR, evaluate the task loss), then applies the
//! exponential-weights rule plus an ε-uniform exploration mixture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{fuse, join, observe, CameraActionSet, FusionState, JointAction};
use crate::objectives::{
    covered_sum, loss_link, loss_network, relative_difference, RelativeDifference,
    DEFAULT_DELTA_FLOOR, DEFAULT_NORM_FLOOR,
};
use crate::simulator::TrafficState;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("joint action space too large: {0} combinations")]
    JointSpaceTooLarge(u128),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// One exponential-weights learner over the enumerated joint action set.
    EwCentralized,
    /// Per-camera correlated exponential weights on the true state.
    Cew,
    /// Correlated exponential weights driven by fusion states.
    Picol,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub mode: ControlMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { gamma: 1.0, epsilon: 0.0, mode: ControlMode::Picol }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.gamma > 0.0) {
            return Err(ControllerError::InvalidConfig(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ControllerError::InvalidConfig(format!(
                "epsilon must be in [0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Which task loss drives the policy updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TaskLoss {
    /// Fraction of total volume on unobserved edges.
    NetworkCapture,
    /// Total travel time covered by the joint mask.
    RouteCoverage,
    /// Fraction of total absolute relative change on unobserved edges.
    LinkChange { norm_floor: f64 },
}

impl TaskLoss {
    pub fn link() -> Self {
        TaskLoss::LinkChange { norm_floor: DEFAULT_NORM_FLOOR }
    }

    /// Evaluates the loss of a joint mask against the step's loss context.
    /// The link task requires `ctx.delta`.
    pub fn eval(&self, a: &JointAction, ctx: &LossContext) -> f64 {
        match self {
            TaskLoss::NetworkCapture => loss_network(a, ctx.state)
                .expect("state dimension matches mask")
                .value,
            TaskLoss::RouteCoverage => {
                covered_sum(&a.mask, ctx.state).expect("state dimension matches mask")
            }
            TaskLoss::LinkChange { norm_floor } => {
                let delta = ctx.delta.expect("link task needs a relative difference");
                loss_link(a, delta, *norm_floor)
                    .expect("delta dimension matches mask")
                    .value
            }
        }
    }
}

/// The per-step state the losses are evaluated on. In the predictive loop
/// this is the fusion state, never the raw partial observation.
pub struct LossContext<'a> {
    pub state: &'a TrafficState,
    pub delta: Option<&'a RelativeDifference>,
}

/// Probability distribution over one camera's action set.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPolicy {
    pub camera: crate::network::NodeId,
    pub probs: Vec<f64>,
    pub step: u64,
}

/// Exponential-weights core: `out ∝ probs * exp(-gamma * losses)`, computed
/// in log-space with max-subtraction.
pub fn ew_update(probs: &[f64], losses: &[f64], gamma: f64) -> Vec<f64> {
    assert_eq!(probs.len(), losses.len());
    let logits: Vec<f64> = probs
        .iter()
        .zip(losses)
        .map(|(&p, &l)| p.ln() - gamma * l)
        .collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / sum).collect()
}

/// `(1 - eps) * probs + eps / n`, the ε-exploration mixture.
pub fn epsilon_mix(probs: &[f64], epsilon: f64) -> Vec<f64> {
    let n = probs.len() as f64;
    probs.iter().map(|&p| (1.0 - epsilon) * p + epsilon / n).collect()
}

/// Per-camera policies plus their action sets.
#[derive(Clone, Debug)]
pub struct PolicySet {
    cameras: Vec<CameraActionSet>,
    policies: Vec<CameraPolicy>,
    n_edges: usize,
}

impl PolicySet {
    /// Uniform initial policies, one per camera.
    pub fn uniform(cameras: Vec<CameraActionSet>) -> Self {
        assert!(!cameras.is_empty(), "need at least one camera");
        let n_edges = cameras[0].actions[0].mask.len();
        let policies = cameras
            .iter()
            .map(|set| CameraPolicy {
                camera: set.camera,
                probs: vec![1.0 / set.len() as f64; set.len()],
                step: 0,
            })
            .collect();
        PolicySet { cameras, policies, n_edges }
    }

    pub fn cameras(&self) -> &[CameraActionSet] {
        &self.cameras
    }

    pub fn policies(&self) -> &[CameraPolicy] {
        &self.policies
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Samples one action index per camera (independent draws, one per
    /// camera stream) and ORs them into the joint mask.
    pub fn sample_joint(&mut self, rngs: &mut CameraRngs) -> (Vec<usize>, JointAction) {
        let mut picks = Vec::with_capacity(self.cameras.len());
        for (i, policy) in self.policies.iter().enumerate() {
            let u: f64 = rngs.streams[i].random();
            picks.push(sample_index(&policy.probs, u));
        }
        let joint = self.joint_of(&picks);
        (picks, joint)
    }

    /// The joint mask produced by the given per-camera action indices.
    pub fn joint_of(&self, picks: &[usize]) -> JointAction {
        join(
            picks
                .iter()
                .zip(&self.cameras)
                .map(|(&a, set)| &set.actions[a]),
        )
    }

    /// Correlated exponential-weights update with ε-exploration.
    ///
    /// For each camera, each candidate action is swapped into the realized
    /// joint action (the other cameras keep their realized choices), the task
    /// loss of the re-ORed mask is evaluated, and the camera's policy is
    /// recalibrated by `ew_update` followed by the ε mixture.
    pub fn cew_update(
        &mut self,
        realized: &[usize],
        ctx: &LossContext,
        task: TaskLoss,
        gamma: f64,
        epsilon: f64,
    ) {
        assert_eq!(realized.len(), self.cameras.len());
        // Coverage multiplicity per edge under the realized joint action.
        let mut counts = vec![0u32; self.n_edges];
        for (set, &a) in self.cameras.iter().zip(realized) {
            for &e in &set.actions[a].edges {
                counts[e] += 1;
            }
        }
        let mut scratch = JointAction::none(self.n_edges);
        for (i, set) in self.cameras.iter().enumerate() {
            let own = &set.actions[realized[i]];
            let mut losses = Vec::with_capacity(set.len());
            for candidate in &set.actions {
                for k in 0..self.n_edges {
                    scratch.mask[k] = counts[k] > 0;
                }
                for &e in &own.edges {
                    scratch.mask[e] = counts[e] > 1;
                }
                for &e in &candidate.edges {
                    scratch.mask[e] = true;
                }
                losses.push(task.eval(&scratch, ctx));
            }
            let policy = &mut self.policies[i];
            policy.probs = epsilon_mix(&ew_update(&policy.probs, &losses, gamma), epsilon);
            policy.step += 1;
        }
    }

    /// Serializes policies as `{camera: {toward-node: prob}}`.
    pub fn dump_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (set, policy) in self.cameras.iter().zip(&self.policies) {
            let mut inner = serde_json::Map::new();
            for (action, &p) in set.actions.iter().zip(&policy.probs) {
                inner.insert(action.toward.to_string(), serde_json::json!(p));
            }
            map.insert(set.camera.to_string(), serde_json::Value::Object(inner));
        }
        serde_json::Value::Object(map)
    }
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// One independent ChaCha stream per camera, all derived from the run seed,
/// so serial and camera-parallel execution sample identically.
pub struct CameraRngs {
    streams: Vec<ChaCha8Rng>,
}

impl CameraRngs {
    pub fn new(seed: u64, cameras: usize) -> Self {
        let streams = (0..cameras)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                rng
            })
            .collect();
        CameraRngs { streams }
    }
}

/// Centralized exponential weights over the enumerated joint action set.
#[derive(Clone, Debug)]
pub struct CentralizedEw {
    combos: Vec<Vec<usize>>,
    joints: Vec<JointAction>,
    pub probs: Vec<f64>,
}

/// Enumerates every combination of per-camera actions (bounded to keep the
/// product tractable).
pub fn enumerate_joint_actions(
    cameras: &[CameraActionSet],
) -> Result<Vec<(Vec<usize>, JointAction)>, ControllerError> {
    let size: u128 = cameras.iter().map(|c| c.len() as u128).product();
    if size > 1_000_000 {
        return Err(ControllerError::JointSpaceTooLarge(size));
    }
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for set in cameras {
        let mut next = Vec::with_capacity(combos.len() * set.len());
        for combo in &combos {
            for a in 0..set.len() {
                let mut c = combo.clone();
                c.push(a);
                next.push(c);
            }
        }
        combos = next;
    }
    Ok(combos
        .into_iter()
        .map(|picks| {
            let joint = join(
                picks
                    .iter()
                    .zip(cameras)
                    .map(|(&a, set)| &set.actions[a]),
            );
            (picks, joint)
        })
        .collect())
}

impl CentralizedEw {
    pub fn new(cameras: &[CameraActionSet]) -> Result<Self, ControllerError> {
        let enumerated = enumerate_joint_actions(cameras)?;
        let n = enumerated.len();
        let (combos, joints) = enumerated.into_iter().unzip();
        Ok(CentralizedEw { combos, joints, probs: vec![1.0 / n as f64; n] })
    }

    pub fn joints(&self) -> &[JointAction] {
        &self.joints
    }

    /// `π_{t+1}(a) ∝ π_t(a) exp(-γ L(a; state))`, then the ε mixture.
    pub fn update(&mut self, ctx: &LossContext, task: TaskLoss, gamma: f64, epsilon: f64) {
        let losses: Vec<f64> = self.joints.iter().map(|j| task.eval(j, ctx)).collect();
        self.probs = epsilon_mix(&ew_update(&self.probs, &losses, gamma), epsilon);
    }

    pub fn sample(&self, rng: &mut impl Rng) -> (&[usize], &JointAction) {
        let k = sample_index(&self.probs, rng.random());
        (&self.combos[k], &self.joints[k])
    }
}

/// Output of one predictive control step.
#[derive(Clone, Debug)]
pub struct PicolOutcome {
    pub actions: Vec<usize>,
    pub joint: JointAction,
    pub observation: TrafficState,
    pub fusion: FusionState,
    /// True when no prediction was available and the previous fusion state
    /// stood in for it.
    pub prediction_fallback: bool,
}

/// One step of the predictive correlated loop: sample the joint action,
/// observe the masked state, fuse with the prediction in effect, and update
/// every camera with the fusion-based loss.
///
/// `prediction` is the forecast for this minute; when `None`, the previous
/// fusion state is used as a persistence fallback and the outcome is
/// flagged. `last_fusion` also supplies the base state for the link task's
/// relative difference.
#[allow(clippy::too_many_arguments)]
pub fn picol_step(
    policies: &mut PolicySet,
    rngs: &mut CameraRngs,
    truth: &TrafficState,
    prediction: Option<&TrafficState>,
    last_fusion: &TrafficState,
    task: TaskLoss,
    cfg: &ControllerConfig,
    delta_floor: f64,
) -> PicolOutcome {
    let (actions, joint) = policies.sample_joint(rngs);
    let observation = observe(truth, &joint).expect("truth dims match cameras");
    let fallback;
    let fused = match prediction {
        Some(p) => {
            fallback = false;
            fuse(&observation, p, &joint).expect("prediction dims match")
        }
        None => {
            fallback = true;
            fuse(&observation, last_fusion, &joint).expect("fallback dims match")
        }
    };
    let fusion_state = fused.as_state();
    let delta = match task {
        TaskLoss::LinkChange { .. } => Some(
            relative_difference(last_fusion, &fusion_state, delta_floor)
                .expect("fusion dims are stable"),
        ),
        _ => None,
    };
    let ctx = LossContext { state: &fusion_state, delta: delta.as_ref() };
    policies.cew_update(&actions, &ctx, task, cfg.gamma, cfg.epsilon);
    PicolOutcome {
        actions,
        joint,
        observation,
        fusion: fused,
        prediction_fallback: fallback,
    }
}

/// Default per-edge relative-difference floor used by the link task.
pub fn default_delta_floor() -> f64 {
    DEFAULT_DELTA_FLOOR
}
