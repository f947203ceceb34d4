//! Runtime configuration file (TOML).
//!
//! ```toml
//! [reasoner]
//! sigma = 0.5
//! stay_prob = 0.8
//! norm = "l2"            # or "l1"
//! prior = "initial"      # or "uniform"
//! deviation_threshold = 0.3
//! deviation_window = 15
//! compaction_window = 10000
//!
//! [fusion]
//! radius = 0.01
//! iou_thresh = 0.25
//! alpha_up = 0.7
//! alpha_down = 0.3
//!
//! [sync]
//! window_us = 50000
//! stall_timeout_ms = 2000
//!
//! [simulator]
//! dropout_prob = 0.0
//! confidence_base = 1.0
//! confidence_jitter = 0.0
//! similar_confusion = 0.0
//! position_jitter = 0.0
//! step_frames = 90
//! step_jitter = 30
//! ```
//!
//! Every key is optional. `ASMON_SYNC_WINDOW_US` overrides `sync.window_us`.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::fusion::{FusionConfig, DEFAULT_ALPHA_DOWN, DEFAULT_ALPHA_UP, DEFAULT_IOU_THRESH, DEFAULT_RADIUS};
use crate::ingest::{DEFAULT_STALL_TIMEOUT, DEFAULT_SYNC_WINDOW_US};
use crate::planner::DEFAULT_STAY_PROB;
use crate::reasoner::{
    Norm, Prior, ReasonerConfig, DEFAULT_COMPACTION_WINDOW, DEFAULT_DEVIATION_THRESHOLD, DEFAULT_DEVIATION_WINDOW,
    DEFAULT_SIGMA,
};
use crate::simulator::{DEFAULT_STEP_FRAMES, DEFAULT_STEP_JITTER};

pub const SYNC_WINDOW_ENV: &str = "ASMON_SYNC_WINDOW_US";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    #[default]
    L2,
    L1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PriorName {
    #[default]
    Initial,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerSection {
    pub sigma: f64,
    pub stay_prob: f64,
    pub norm: NormName,
    pub prior: PriorName,
    pub deviation_threshold: f64,
    pub deviation_window: usize,
    pub compaction_window: usize,
}

impl Default for ReasonerSection {
    fn default() -> Self {
        ReasonerSection {
            sigma: DEFAULT_SIGMA,
            stay_prob: DEFAULT_STAY_PROB,
            norm: NormName::L2,
            prior: PriorName::Initial,
            deviation_threshold: DEFAULT_DEVIATION_THRESHOLD,
            deviation_window: DEFAULT_DEVIATION_WINDOW,
            compaction_window: DEFAULT_COMPACTION_WINDOW,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub radius: f64,
    pub iou_thresh: f64,
    pub alpha_up: f64,
    pub alpha_down: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection {
            radius: DEFAULT_RADIUS,
            iou_thresh: DEFAULT_IOU_THRESH,
            alpha_up: DEFAULT_ALPHA_UP,
            alpha_down: DEFAULT_ALPHA_DOWN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncSection {
    pub window_us: u64,
    pub stall_timeout_ms: u64,
}

impl Default for SyncSection {
    fn default() -> Self {
        SyncSection {
            window_us: DEFAULT_SYNC_WINDOW_US,
            stall_timeout_ms: DEFAULT_STALL_TIMEOUT.as_millis() as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSection {
    pub dropout_prob: f64,
    pub confidence_base: f64,
    pub confidence_jitter: f64,
    pub similar_confusion: f64,
    pub position_jitter: f64,
    pub step_frames: u64,
    pub step_jitter: u64,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        SimulatorSection {
            dropout_prob: 0.0,
            confidence_base: 1.0,
            confidence_jitter: 0.0,
            similar_confusion: 0.0,
            position_jitter: 0.0,
            step_frames: DEFAULT_STEP_FRAMES,
            step_jitter: DEFAULT_STEP_JITTER,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub reasoner: ReasonerSection,
    pub fusion: FusionSection,
    pub sync: SyncSection,
    pub simulator: SimulatorSection,
}

impl MonitorConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies environment overrides read through `var`.
    pub fn apply_env_with<F: Fn(&str) -> Option<String>>(&mut self, var: F) -> Result<(), ConfigError> {
        if let Some(v) = var(SYNC_WINDOW_ENV) {
            self.sync.window_us = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(vec![format!("{SYNC_WINDOW_ENV}=`{v}` is not an integer")]))?;
        }
        Ok(())
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env_with(|k| std::env::var(k).ok())
    }

    pub fn reasoner_config(&self) -> ReasonerConfig {
        let r = &self.reasoner;
        ReasonerConfig {
            sigma: r.sigma,
            stay_prob: r.stay_prob,
            norm: match r.norm {
                NormName::L2 => Norm::L2,
                NormName::L1 => Norm::L1,
            },
            prior: match r.prior {
                PriorName::Initial => Prior::Initial,
                PriorName::Uniform => Prior::Uniform,
            },
            deviation_threshold: r.deviation_threshold,
            deviation_window: r.deviation_window,
            compaction_window: r.compaction_window,
        }
    }

    pub fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            radius: self.fusion.radius,
            iou_thresh: self.fusion.iou_thresh,
            alpha_up: self.fusion.alpha_up,
            alpha_down: self.fusion.alpha_down,
        }
    }

    /// Every problem at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if let Err(e) = self.reasoner_config().validate() {
            errs.push(format!("reasoner: {e}"));
        }
        if self.reasoner.compaction_window < 2 {
            errs.push("reasoner: compaction_window must be at least 2".into());
        }
        if let Err(e) = self.fusion_config().validate() {
            errs.push(format!("fusion: {e}"));
        }
        if self.sync.window_us == 0 {
            errs.push("sync: window_us must be positive".into());
        }
        if self.sync.stall_timeout_ms == 0 {
            errs.push("sync: stall_timeout_ms must be positive".into());
        }
        let s = &self.simulator;
        for (name, v) in [
            ("dropout_prob", s.dropout_prob),
            ("confidence_base", s.confidence_base),
            ("similar_confusion", s.similar_confusion),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("simulator: {name} {v} is outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("confidence_jitter", s.confidence_jitter),
            ("position_jitter", s.position_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("simulator: {name} must be nonnegative"));
            }
        }
        if s.step_frames == 0 {
            errs.push("simulator: step_frames must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}
