//! Monitoring of assembly tasks from multi-view object detections.
//!
//! A task is described as a set of configurations (predicate sets) linked by
//! assembly steps. [`planner`] expands it into a state graph, [`fusion`] turns
//! per-camera detections into one observation vector per frame and
//! [`reasoner`] tracks the most likely state with a Viterbi trellis.

pub mod config;
pub mod eval;
pub mod fusion;
pub mod ingest;
pub mod monitor;
pub mod planner;
pub mod reasoner;
pub mod simulator;
pub mod task;

/// Bundled scenarios.
pub mod scenarios {
    /// LEGO model reconfiguration task.
    pub const LEGO_TASK: &str = include_str!("../data/lego.task");
    /// Calibration of the three simulated cameras watching the LEGO trays.
    pub const LEGO_CALIBRATION: &str = include_str!("../data/lego.calib");
    /// Tray polygons of the simulated LEGO scene, per camera.
    pub const LEGO_TRAYS: &str = include_str!("../data/lego.trays");
}
