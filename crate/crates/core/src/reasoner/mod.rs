//! State tracking over the state graph with a Viterbi trellis.

mod deviation;
mod timeline;
mod trellis;

use thiserror::Error;

use crate::fusion::ObservationLayout;
use crate::planner::{transition_matrix, PlanError, StateGraph, DEFAULT_STAY_PROB};
use crate::task::{Configuration, TaskDefinition};

pub use deviation::{DeviationMonitor, DeviationWarning, DEFAULT_DEVIATION_THRESHOLD, DEFAULT_DEVIATION_WINDOW};
pub use timeline::{read_timeline_csv, write_timeline_csv, TimelineRow, TIMELINE_HEADER};
pub use trellis::{normalize_log_column, BeliefState, LogTransitions, Prior, Trellis};

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_COMPACTION_WINDOW: usize = 10_000;
pub const CONTAIN_PREDICATE: &str = "do_contain";
pub const MOUNTED_PREDICATE: &str = "is_mounted";
pub const DEFAULT_WORK_TRAY: &str = "T_work";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasonerError {
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("deviation threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("deviation window must be at least 1")]
    InvalidWindow,
    #[error("observation has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Norm used for the observation residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L2,
    L1,
}

impl Norm {
    pub fn of(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| x - y);
        match self {
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::L1 => diffs.map(f64::abs).sum(),
        }
    }
}

/// Binary observation a configuration produces under perfect perception.
///
/// `do_contain(t, e)` sets entry `(e, t)`; `is_mounted(e)` sets `(e, work_tray)`
/// since mounted parts sit on the model in the work area.
pub fn expected_observation(config: &Configuration, layout: &ObservationLayout, work_tray: &str) -> Vec<f64> {
    let mut out = vec![0.0; layout.dim()];
    let work = layout.tray_index(work_tray);
    for p in config.iter() {
        let slot = match (p.name.as_str(), p.args.as_slice()) {
            (CONTAIN_PREDICATE, [t, e]) => layout.tray_index(t).zip(layout.element_index(e)),
            (MOUNTED_PREDICATE, [e]) => work.zip(layout.element_index(e)),
            _ => None,
        };
        if let Some((t, e)) = slot {
            out[layout.index(e, t)] = 1.0;
        }
    }
    out
}

/// `-‖y - expected‖ / sigma`.
pub fn observation_likelihood(y: &[f64], expected: &[f64], sigma: f64, norm: Norm) -> f64 {
    -norm.of(y, expected) / sigma
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReasonerConfig {
    pub sigma: f64,
    pub stay_prob: f64,
    pub norm: Norm,
    pub prior: Prior,
    pub deviation_threshold: f64,
    pub deviation_window: usize,
    pub compaction_window: usize,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            sigma: DEFAULT_SIGMA,
            stay_prob: DEFAULT_STAY_PROB,
            norm: Norm::L2,
            prior: Prior::Initial,
            deviation_threshold: DEFAULT_DEVIATION_THRESHOLD,
            deviation_window: DEFAULT_DEVIATION_WINDOW,
            compaction_window: DEFAULT_COMPACTION_WINDOW,
        }
    }
}

impl ReasonerConfig {
    pub fn validate(&self) -> Result<(), ReasonerError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ReasonerError::InvalidSigma(self.sigma));
        }
        if !(self.stay_prob > 0.0 && self.stay_prob < 1.0) {
            return Err(PlanError::InvalidStayProb(self.stay_prob).into());
        }
        if !(self.deviation_threshold > 0.0 && self.deviation_threshold < 1.0) {
            return Err(ReasonerError::InvalidThreshold(self.deviation_threshold));
        }
        if self.deviation_window == 0 {
            return Err(ReasonerError::InvalidWindow);
        }
        Ok(())
    }
}

/// Expected observations of every graph node plus the likelihood settings.
#[derive(Clone, Debug)]
pub struct ObservationModel {
    expected: Vec<Vec<f64>>,
    sigma: f64,
    norm: Norm,
}

impl ObservationModel {
    pub fn new(graph: &StateGraph, layout: &ObservationLayout, sigma: f64, norm: Norm) -> Result<Self, ReasonerError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ReasonerError::InvalidSigma(sigma));
        }
        let expected = graph
            .nodes
            .iter()
            .map(|c| expected_observation(c, layout, DEFAULT_WORK_TRAY))
            .collect();
        Ok(ObservationModel { expected, sigma, norm })
    }

    pub fn from_expected(expected: Vec<Vec<f64>>, sigma: f64, norm: Norm) -> Self {
        ObservationModel { expected, sigma, norm }
    }

    pub fn states(&self) -> usize {
        self.expected.len()
    }

    pub fn expected(&self, state: usize) -> &[f64] {
        &self.expected[state]
    }

    pub fn log_likelihoods(&self, y: &[f64]) -> Vec<f64> {
        self.expected
            .iter()
            .map(|e| observation_likelihood(y, e, self.sigma, self.norm))
            .collect()
    }
}

/// Per-frame output of [`Reasoner::observe`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReasonerUpdate {
    pub frame: usize,
    pub belief: BeliefState,
    pub warning: Option<DeviationWarning>,
}

/// One monitoring session: observation model, transitions, trellis and
/// deviation monitor.
#[derive(Clone, Debug)]
pub struct Reasoner {
    model: ObservationModel,
    transitions: LogTransitions,
    trellis: Option<Trellis>,
    monitor: DeviationMonitor,
    config: ReasonerConfig,
    dim: usize,
}

impl Reasoner {
    pub fn new(graph: &StateGraph, task: &TaskDefinition, config: ReasonerConfig) -> Result<Self, ReasonerError> {
        config.validate()?;
        let layout = ObservationLayout::from_task(task);
        let model = ObservationModel::new(graph, &layout, config.sigma, config.norm)?;
        let tm = transition_matrix(graph, config.stay_prob)?;
        Ok(Reasoner {
            model,
            transitions: LogTransitions::from_matrix(&tm),
            trellis: None,
            monitor: DeviationMonitor::new(config.deviation_threshold, config.deviation_window)?,
            config,
            dim: layout.dim(),
        })
    }

    pub fn config(&self) -> &ReasonerConfig {
        &self.config
    }

    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    pub fn trellis(&self) -> Option<&Trellis> {
        self.trellis.as_ref()
    }

    /// Frames processed so far.
    pub fn frames(&self) -> usize {
        self.trellis.as_ref().map_or(0, Trellis::len)
    }

    pub fn observe(&mut self, y: &[f64]) -> Result<ReasonerUpdate, ReasonerError> {
        if y.len() != self.dim {
            return Err(ReasonerError::DimensionMismatch {
                expected: self.dim,
                found: y.len(),
            });
        }
        let loglik = self.model.log_likelihoods(y);
        match &mut self.trellis {
            None => {
                self.trellis = Some(Trellis::init(
                    &loglik,
                    self.config.prior,
                    0,
                    self.config.compaction_window,
                ))
            }
            Some(t) => t.step(&self.transitions, &loglik),
        }
        let trellis = self.trellis.as_ref().expect("set above");
        let belief = trellis.belief();
        let warning = self.monitor.check(&belief);
        Ok(ReasonerUpdate {
            frame: trellis.len() - 1,
            belief,
            warning,
        })
    }

    /// Viterbi path over all frames observed so far.
    pub fn path(&self) -> Vec<usize> {
        self.trellis.as_ref().map_or_else(Vec::new, Trellis::path)
    }
}
