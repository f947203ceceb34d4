//! End-to-end monitoring session: frame bundles in, per-frame state
//! estimates and deviation warnings out.

use std::time::Instant;

use thiserror::Error;

use crate::fusion::{CameraCalibration, Fuser, FusionError, ObservationLayout, TrayRegion};
use crate::ingest::FrameBundle;
use crate::planner::StateGraph;
use crate::reasoner::{DeviationWarning, Reasoner, ReasonerError, TimelineRow};
use crate::task::TaskDefinition;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
}

/// Output for one processed bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameReport {
    pub frame: u64,
    pub timestamp: u64,
    pub map_state: usize,
    pub belief: f64,
    pub warning: Option<DeviationWarning>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MonitorSummary {
    pub frames: u64,
    pub warnings: u64,
    pub partial_bundles: u64,
    pub skipped_detections: u64,
    pub mean_latency_us: f64,
    pub max_latency_us: u64,
    /// Timeline with `state_index` taken from the final Viterbi path.
    pub rows: Vec<TimelineRow>,
}

pub struct Monitor {
    fuser: Fuser,
    reasoner: Reasoner,
    rows: Vec<TimelineRow>,
    warnings: u64,
    partial_bundles: u64,
    skipped: u64,
    latency_total_us: u64,
    latency_max_us: u64,
}

impl Monitor {
    pub fn new(
        task: &TaskDefinition,
        graph: &StateGraph,
        cameras: Vec<CameraCalibration>,
        regions: Vec<TrayRegion>,
        fusion: crate::fusion::FusionConfig,
        reasoner: crate::reasoner::ReasonerConfig,
    ) -> Result<Self, MonitorError> {
        Ok(Monitor {
            fuser: Fuser::new(ObservationLayout::from_task(task), cameras, regions, fusion)?,
            reasoner: Reasoner::new(graph, task, reasoner)?,
            rows: Vec::new(),
            warnings: 0,
            partial_bundles: 0,
            skipped: 0,
            latency_total_us: 0,
            latency_max_us: 0,
        })
    }

    pub fn camera_ids(&self) -> Vec<String> {
        self.fuser.camera_ids()
    }

    pub fn process(&mut self, bundle: &FrameBundle) -> Result<FrameReport, MonitorError> {
        let started = Instant::now();
        let views = bundle
            .per_camera
            .iter()
            .map(|(id, m)| (id.as_str(), m.detections.as_slice()));
        let fused = self.fuser.fuse(views);
        let update = self.reasoner.observe(fused.smoothed.values())?;
        let frame = bundle
            .per_camera
            .values()
            .map(|m| m.frame_index)
            .min()
            .unwrap_or(self.rows.len() as u64);
        let report = FrameReport {
            frame,
            timestamp: bundle.bundle_time,
            map_state: update.belief.map_state,
            belief: update.belief.max_prob(),
            warning: update.warning,
        };
        self.rows.push(TimelineRow {
            frame,
            timestamp: bundle.bundle_time,
            state_index: report.map_state,
            belief: report.belief,
            map_state: report.map_state,
            warning_flag: u8::from(report.warning.is_some()),
        });
        self.warnings += u64::from(report.warning.is_some());
        self.partial_bundles += u64::from(bundle.partial);
        self.skipped += fused.skipped as u64;
        let us = started.elapsed().as_micros() as u64;
        self.latency_total_us += us;
        self.latency_max_us = self.latency_max_us.max(us);
        Ok(report)
    }

    pub fn finish(mut self) -> MonitorSummary {
        let path = self.reasoner.path();
        for (row, &s) in self.rows.iter_mut().zip(&path) {
            row.state_index = s;
        }
        let frames = self.rows.len() as u64;
        MonitorSummary {
            frames,
            warnings: self.warnings,
            partial_bundles: self.partial_bundles,
            skipped_detections: self.skipped,
            mean_latency_us: if frames == 0 {
                0.0
            } else {
                self.latency_total_us as f64 / frames as f64
            },
            max_latency_us: self.latency_max_us,
            rows: self.rows,
        }
    }
}
