//! Synthetic executions of a task: a sampled plan with per-state durations,
//! rendered as noisy per-camera detection messages.

mod scene;
mod truth;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::fusion::ObservationLayout;
use crate::ingest::DetectionMessage;
use crate::planner::{enumerate_plans, StateGraph};
use crate::reasoner::{expected_observation, DEFAULT_WORK_TRAY};
use crate::task::{StepId, TaskDefinition};

pub use scene::{
    standard_cameras, ProxyPoint, Scene, TrayPlacement, ELEMENT_SIZE, POINTS_PER_ELEMENT, SLOT_SPACING,
    STANDARD_TRAY_CENTERS, TRAY_HALF_SIZE,
};
pub use truth::{GroundTruthTimeline, TimelineEntry};

/// 30 Hz.
pub const FRAME_PERIOD_US: u64 = 33_333;
pub const DEFAULT_EPOCH_US: u64 = 1_700_000_000_000_000;
pub const DEFAULT_CAMERA_OFFSET_US: u64 = 1_500;
pub const DEFAULT_STEP_FRAMES: u64 = 90;
pub const DEFAULT_STEP_JITTER: u64 = 30;
/// Above this many plans, [`sample_plan`] falls back to a random walk.
pub const MAX_ENUMERATED_PLANS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("scene supports at most 9 elements and 4 trays, task has {elements} and {trays}")]
    SceneTooLarge { elements: usize, trays: usize },
    #[error("the state graph has no plan")]
    NoPlan,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
}

/// Detector imperfections.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    /// Probability that a detection is missed, per object and camera.
    pub dropout_prob: f64,
    /// Row `i` is the distribution of the reported class of element `i`.
    pub confusion: Vec<Vec<f64>>,
    pub confidence_base: f64,
    /// Standard deviation of the additive confidence noise.
    pub confidence_jitter: f64,
    /// Radius of the per-point 3D perturbation, meters.
    pub position_jitter: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noise_free(elements: usize, seed: u64) -> Self {
        NoiseModel {
            dropout_prob: 0.0,
            confusion: identity(elements),
            confidence_base: 1.0,
            confidence_jitter: 0.0,
            position_jitter: 0.0,
            seed,
        }
    }

    /// Confusion between look-alike elements: `X` and `X'` swap with
    /// probability `p`.
    pub fn similar_pair_confusion(elements: &[String], p: f64) -> Vec<Vec<f64>> {
        let mut m = identity(elements.len());
        for (i, a) in elements.iter().enumerate() {
            let twin = elements
                .iter()
                .position(|b| *b == format!("{a}'") || format!("{b}'") == *a);
            if let Some(j) = twin {
                m[i][i] = 1.0 - p;
                m[i][j] = p;
            }
        }
        m
    }

    pub fn validate(&self, elements: usize) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidNoise(m));
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return bad(format!("dropout probability {} is outside [0, 1]", self.dropout_prob));
        }
        if !(0.0..=1.0).contains(&self.confidence_base) {
            return bad(format!("base confidence {} is outside [0, 1]", self.confidence_base));
        }
        if !(self.confidence_jitter >= 0.0 && self.confidence_jitter.is_finite()) {
            return bad(format!(
                "confidence jitter {} must be nonnegative",
                self.confidence_jitter
            ));
        }
        if !(self.position_jitter >= 0.0 && self.position_jitter.is_finite()) {
            return bad(format!("position jitter {} must be nonnegative", self.position_jitter));
        }
        if self.confusion.len() != elements {
            return bad(format!(
                "confusion has {} rows for {elements} elements",
                self.confusion.len()
            ));
        }
        for (i, row) in self.confusion.iter().enumerate() {
            if row.len() != elements || row.iter().any(|&p| p.is_nan() || p < 0.0) {
                return bad(format!("confusion row {i} is malformed"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("confusion row {i} sums to {sum}"));
            }
        }
        Ok(())
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Uniform choice among the simple initial-to-final paths when there are at
/// most [`MAX_ENUMERATED_PLANS`]; otherwise a random walk that never revisits
/// a state, restarted when it gets stuck.
pub fn sample_plan<R: Rng>(g: &StateGraph, rng: &mut R) -> Result<Vec<StepId>, SimError> {
    let plans = enumerate_plans(g, MAX_ENUMERATED_PLANS + 1);
    if plans.is_empty() {
        return Err(SimError::NoPlan);
    }
    if plans.len() <= MAX_ENUMERATED_PLANS {
        return Ok(plans.choose(rng).expect("nonempty").clone());
    }
    for _ in 0..1000 {
        let mut visited = vec![false; g.node_count()];
        let mut node = 0;
        let mut steps = Vec::new();
        visited[0] = true;
        while node != g.final_index {
            let options: Vec<_> = g.out_edges(node).iter().filter(|e| !visited[e.to]).collect();
            let Some(e) = options.choose(rng) else { break };
            visited[e.to] = true;
            steps.push(e.step);
            node = e.to;
        }
        if node == g.final_index {
            return Ok(steps);
        }
    }
    Err(SimError::NoPlan)
}

/// Node indices visited by `plan`, starting with the initial node.
pub fn plan_states(g: &StateGraph, plan: &[StepId]) -> Result<Vec<usize>, SimError> {
    let mut states = vec![0];
    let mut node = 0;
    for (i, &step) in plan.iter().enumerate() {
        let edge = g
            .out_edges(node)
            .iter()
            .find(|e| e.step == step)
            .ok_or_else(|| SimError::InvalidPlan(format!("step {step} at position {i} is not applicable")))?;
        node = edge.to;
        states.push(node);
    }
    if node != g.final_index {
        return Err(SimError::InvalidPlan(
            "plan does not reach the final configuration".into(),
        ));
    }
    Ok(states)
}

/// Frames spent in each visited state: uniform in `mean ± jitter`, at least 1.
pub fn sample_durations<R: Rng>(count: usize, mean: u64, jitter: u64, rng: &mut R) -> Vec<u64> {
    let lo = mean.saturating_sub(jitter).max(1);
    let hi = (mean + jitter).max(lo);
    (0..count).map(|_| rng.random_range(lo..=hi)).collect()
}

/// Rescales durations proportionally so that they sum to `total`, keeping
/// every entry at least 1 (largest remainder rounding).
pub fn scale_durations(durations: &[u64], total: u64) -> Vec<u64> {
    let n = durations.len() as u64;
    if n == 0 {
        return Vec::new();
    }
    let total = total.max(n);
    let spare = total - n;
    let weights: Vec<u64> = durations.iter().map(|&d| d.max(1)).collect();
    let wsum: u64 = weights.iter().sum();
    let mut out: Vec<u64> = weights.iter().map(|&w| 1 + spare * w / wsum).collect();
    let mut rem: Vec<(u64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| ((spare * w) % wsum, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = total - out.iter().sum::<u64>();
    for (_, i) in rem {
        if missing == 0 {
            break;
        }
        out[i] += 1;
        missing -= 1;
    }
    out
}

/// How a seeded session picks its plan and durations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionShape {
    pub step_frames: u64,
    pub step_jitter: u64,
    /// Rescale the durations to this many frames.
    pub total_frames: Option<u64>,
}

impl Default for SessionShape {
    fn default() -> Self {
        SessionShape {
            step_frames: DEFAULT_STEP_FRAMES,
            step_jitter: DEFAULT_STEP_JITTER,
            total_frames: None,
        }
    }
}

/// Samples a plan and durations from `noise.seed`, then simulates it.
pub fn sample_session(
    g: &StateGraph,
    task: &TaskDefinition,
    noise: NoiseModel,
    shape: SessionShape,
    scene: Scene,
    timing: Timing,
) -> Result<SimSession, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ PLAN_SEED_MASK);
    let plan = sample_plan(g, &mut rng)?;
    let mut durations = sample_durations(plan.len() + 1, shape.step_frames, shape.step_jitter, &mut rng);
    if let Some(total) = shape.total_frames {
        durations = scale_durations(&durations, total);
    }
    simulate(&plan, g, task, &durations, noise, scene, timing)
}

const PLAN_SEED_MASK: u64 = 0x5eed;

/// Timing of the per-camera messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timing {
    pub epoch_us: u64,
    pub frame_period_us: u64,
    /// Camera `i` stamps its frames `i * camera_offset_us` late.
    pub camera_offset_us: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            epoch_us: DEFAULT_EPOCH_US,
            frame_period_us: FRAME_PERIOD_US,
            camera_offset_us: DEFAULT_CAMERA_OFFSET_US,
        }
    }
}

/// One simulated frame: the true state and one message per camera.
#[derive(Clone, Debug, PartialEq)]
pub struct SimFrame {
    pub frame: u64,
    pub state: usize,
    pub messages: Vec<DetectionMessage>,
}

/// Lazy frame generator for one simulated session.
#[derive(Clone, Debug)]
pub struct SimSession {
    scene: Scene,
    noise: NoiseModel,
    timing: Timing,
    timeline: GroundTruthTimeline,
    per_frame: Vec<usize>,
    /// Present (element, tray) pairs of every graph node.
    present: Vec<Vec<(usize, usize)>>,
    proxies: Vec<Vec<ProxyPoint>>,
    confidence: Normal<f64>,
    rng: ChaCha8Rng,
    frame: u64,
}

/// Builds a session for `plan` with one duration per visited state.
pub fn simulate(
    plan: &[StepId],
    g: &StateGraph,
    task: &TaskDefinition,
    durations: &[u64],
    noise: NoiseModel,
    scene: Scene,
    timing: Timing,
) -> Result<SimSession, SimError> {
    let layout = ObservationLayout::from_task(task);
    noise.validate(layout.elements.len())?;
    if durations.contains(&0) {
        return Err(SimError::InvalidTimeline("durations must be positive".into()));
    }
    let states = plan_states(g, plan)?;
    let timeline = GroundTruthTimeline::from_durations(&states, plan, durations)?;
    let present = g
        .nodes
        .iter()
        .map(|c| {
            let y = expected_observation(c, &layout, DEFAULT_WORK_TRAY);
            (0..layout.elements.len())
                .flat_map(|e| (0..layout.trays.len()).map(move |t| (e, t)))
                .filter(|&(e, t)| y[layout.index(e, t)] > 0.0)
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let proxies = (0..layout.elements.len())
        .map(|_| scene.sample_proxy(&mut rng))
        .collect();
    let confidence = Normal::new(0.0, noise.confidence_jitter).map_err(|e| SimError::InvalidNoise(e.to_string()))?;
    Ok(SimSession {
        per_frame: timeline.per_frame(),
        scene,
        noise,
        timing,
        timeline,
        present,
        proxies,
        confidence,
        rng,
        frame: 0,
    })
}

impl SimSession {
    pub fn timeline(&self) -> &GroundTruthTimeline {
        &self.timeline
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn total_frames(&self) -> u64 {
        self.per_frame.len() as u64
    }

    fn sample_class(&mut self, element: usize) -> u32 {
        let row = &self.noise.confusion[element];
        if row[element] >= 1.0 {
            return element as u32;
        }
        let x: f64 = self.rng.random();
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if x < acc {
                return j as u32;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(element) as u32
    }

    fn render_frame(&mut self, frame: u64) -> SimFrame {
        let state = self.per_frame[frame as usize];
        let mut messages = Vec::with_capacity(self.scene.cameras.len());
        for c in 0..self.scene.cameras.len() {
            let mut detections = Vec::new();
            for i in 0..self.present[state].len() {
                let (e, t) = self.present[state][i];
                if self.noise.dropout_prob > 0.0 && self.rng.random::<f64>() < self.noise.dropout_prob {
                    continue;
                }
                let class_id = self.sample_class(e);
                let mut conf = self.noise.confidence_base;
                if self.noise.confidence_jitter > 0.0 {
                    conf += self.confidence.sample(&mut self.rng);
                }
                let center = self.scene.element_center(e, t);
                let det = self.scene.render(
                    &self.scene.cameras[c],
                    center,
                    &self.proxies[e],
                    self.noise.position_jitter,
                    class_id,
                    conf.clamp(0.0, 1.0) as f32,
                    &mut self.rng,
                );
                detections.extend(det);
            }
            messages.push(DetectionMessage {
                camera_id: self.scene.cameras[c].camera_id.clone(),
                frame_index: frame,
                timestamp_us: self.timing.epoch_us
                    + frame * self.timing.frame_period_us
                    + c as u64 * self.timing.camera_offset_us,
                detections,
            });
        }
        SimFrame { frame, state, messages }
    }
}

impl Iterator for SimSession {
    type Item = SimFrame;

    fn next(&mut self) -> Option<SimFrame> {
        if self.frame >= self.total_frames() {
            return None;
        }
        let f = self.render_frame(self.frame);
        self.frame += 1;
        Some(f)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total_frames() - self.frame) as usize;
        (left, Some(left))
    }
}
