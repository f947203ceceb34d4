#![allow(dead_code)]

pub mod oracles;
pub mod props;

use std::path::Path;

use asmon::eval::{evaluate, predictions_from_rows, PredictionSource, TimelineComparison};
use asmon::fusion::{FusionConfig, ObservationLayout};
use asmon::ingest::{DetlogWriter, Replay, DEFAULT_SYNC_WINDOW_US};
use asmon::monitor::{Monitor, MonitorSummary};
use asmon::planner::{build_state_graph, StateGraph};
use asmon::reasoner::{LogTransitions, Norm, ObservationModel, Prior, ReasonerConfig, Trellis};
use asmon::scenarios::LEGO_TASK;
use asmon::simulator::{sample_session, GroundTruthTimeline, NoiseModel, Scene, SessionShape, SimSession, Timing};
use asmon::task::{parse_task_definition, TaskDefinition};
use rand::Rng;

pub struct Lego {
    pub task: TaskDefinition,
    pub graph: StateGraph,
    pub layout: ObservationLayout,
}

pub fn lego() -> Lego {
    let task = parse_task_definition(LEGO_TASK).unwrap();
    let graph = build_state_graph(&task).unwrap();
    let layout = ObservationLayout::from_task(&task);
    Lego { task, graph, layout }
}

/// Two parallel two-step branches from the initial to the final state.
pub const DIAMOND: &str = r#"
objects { element: A, B tray: T }
predicates { is_free/1, is_mounted/1 }
steps {
  step "A first" { actions: mount(A, T) pre: is_free(A), is_free(B) add: is_mounted(A) del: is_free(A) }
  step "B first" { actions: mount(B, T) pre: is_free(A), is_free(B) add: is_mounted(B) del: is_free(B) }
  step "A second" { actions: mount(A, T) pre: is_free(A), is_mounted(B) add: is_mounted(A) del: is_free(A) }
  step "B second" { actions: mount(B, T) pre: is_mounted(A), is_free(B) add: is_mounted(B) del: is_free(B) }
}
initial { is_free(A), is_free(B) }
final { is_mounted(A), is_mounted(B) }
"#;

/// Noise used by the calibrated benchmark.
pub fn benchmark_noise(lego: &Lego, seed: u64) -> NoiseModel {
    NoiseModel {
        dropout_prob: 0.2,
        confusion: NoiseModel::similar_pair_confusion(&lego.layout.elements, 0.1),
        confidence_base: 1.0,
        confidence_jitter: 0.1,
        position_jitter: 0.002,
        seed,
    }
}

pub fn session(lego: &Lego, noise: NoiseModel, total_frames: Option<u64>) -> SimSession {
    let shape = SessionShape {
        total_frames,
        ..SessionShape::default()
    };
    let scene = Scene::standard(&lego.layout).unwrap();
    sample_session(&lego.graph, &lego.task, noise, shape, scene, Timing::default()).unwrap()
}

/// Writes a session to a detlog; returns the ground truth and the scene.
pub fn record(session: SimSession, path: &Path) -> (GroundTruthTimeline, Scene) {
    let gt = session.timeline().clone();
    let scene = session.scene().clone();
    let mut w = DetlogWriter::create(path).unwrap();
    for f in session {
        for m in &f.messages {
            w.write(m).unwrap();
        }
    }
    w.finish().unwrap();
    (gt, scene)
}

pub fn monitor(lego: &Lego, scene: &Scene) -> Monitor {
    Monitor::new(
        &lego.task,
        &lego.graph,
        scene.cameras.clone(),
        scene.tray_regions(),
        FusionConfig::default(),
        ReasonerConfig::default(),
    )
    .unwrap()
}

pub fn replay(lego: &Lego, scene: &Scene, path: &Path) -> MonitorSummary {
    let mut mon = monitor(lego, scene);
    let cams = mon.camera_ids();
    for b in Replay::open(path, cams, DEFAULT_SYNC_WINDOW_US, 0.0).unwrap() {
        mon.process(&b.unwrap()).unwrap();
    }
    mon.finish()
}

pub fn score(summary: &MonitorSummary, gt: &GroundTruthTimeline, tol: u64) -> TimelineComparison {
    let p = predictions_from_rows(&summary.rows, gt.total_frames(), PredictionSource::Path).unwrap();
    evaluate(&p, gt, tol).unwrap()
}

/// Random small HMM used by the trellis oracle checks.
pub struct ViterbiInstance {
    pub log_a: Vec<Vec<f64>>,
    pub prior: Prior,
    pub loglik: Vec<Vec<f64>>,
}

impl ViterbiInstance {
    pub fn random<R: Rng>(rng: &mut R, max_states: usize, max_horizon: usize) -> Self {
        let n = rng.random_range(1..=max_states);
        let horizon = rng.random_range(1..=max_horizon);
        let dim = rng.random_range(1..=4);
        let expected: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect())
            .collect();
        let uniform_split = rng.random_bool(0.5);
        let log_a = (0..n)
            .map(|x| {
                let mut w = vec![0.0; n];
                let others: Vec<usize> = (0..n).filter(|&k| k != x && rng.random_bool(0.5)).collect();
                let stay = if others.is_empty() {
                    1.0
                } else {
                    rng.random_range(0.5..0.95)
                };
                w[x] = stay;
                for &k in &others {
                    w[k] = if uniform_split {
                        (1.0 - stay) / others.len() as f64
                    } else {
                        rng.random_range(0.01..1.0)
                    };
                }
                let off: f64 = others.iter().map(|&k| w[k]).sum();
                for &k in &others {
                    w[k] *= (1.0 - stay) / off;
                }
                w.iter().map(|p| p.ln()).collect()
            })
            .collect();
        let sigma = rng.random_range(0.2..1.0);
        let model = ObservationModel::from_expected(expected.clone(), sigma, Norm::L2);
        let loglik = (0..horizon)
            .map(|_| {
                let y: Vec<f64> = if rng.random_bool(0.3) {
                    expected[rng.random_range(0..n)].clone()
                } else {
                    (0..dim).map(|_| rng.random_range(0.0..1.0)).collect()
                };
                model.log_likelihoods(&y)
            })
            .collect();
        let prior = if rng.random_bool(0.5) {
            Prior::Initial
        } else {
            Prior::Uniform
        };
        ViterbiInstance { log_a, prior, loglik }
    }

    pub fn states(&self) -> usize {
        self.log_a.len()
    }

    pub fn transitions(&self) -> LogTransitions {
        let flat: Vec<f64> = self.log_a.iter().flatten().copied().collect();
        LogTransitions::from_log_matrix(self.states(), &flat)
    }

    pub fn log_prior(&self) -> Vec<f64> {
        let n = self.states();
        match self.prior {
            Prior::Initial => (0..n).map(|k| if k == 0 { 0.0 } else { f64::NEG_INFINITY }).collect(),
            Prior::Uniform => vec![-(n as f64).ln(); n],
        }
    }

    /// Runs the trellis over the whole horizon.
    pub fn decode(&self, window: usize) -> Trellis {
        self.decode_scaled(1.0, window)
    }

    /// Same with every log-likelihood multiplied by `scale`.
    pub fn decode_scaled(&self, scale: f64, window: usize) -> Trellis {
        let scaled: Vec<Vec<f64>> = self
            .loglik
            .iter()
            .map(|c| c.iter().map(|l| l * scale).collect())
            .collect();
        let trans = self.transitions();
        let mut t = Trellis::init(&scaled[0], self.prior, 0, window);
        for col in &scaled[1..] {
            t.step(&trans, col);
        }
        t
    }
}

/// Property-test settings with a fixed seed, so runs are repeatable.
pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x00a5_5e4b_1e00),
        failure_persistence: None,
        ..Default::default()
    }
}
