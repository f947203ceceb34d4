//! Multi-view fusion of 2D detections into one observation vector per frame.
//!
//! Per camera, detections are assigned to trays by their bbox center and
//! back-projected into world-frame point clouds. Detections of the same class
//! in the same tray are then associated across cameras by radius-based point
//! cloud IoU, consolidated into a per-(element, tray) confidence vector and
//! smoothed over time.

mod cloud;
mod files;
mod geometry;
mod matching;
mod observation;
mod trays;

use std::collections::HashMap;

use thiserror::Error;

pub use cloud::{cloud_intersection_count, cloud_iou, PointCloud};
pub use files::{
    parse_calibrations, parse_tray_regions, write_calibrations, write_tray_regions, CALIBRATION_HEADER, TRAYS_HEADER,
};
pub use geometry::{backproject, CameraCalibration, RigidTransform, Vec3};
pub use matching::{match_across_views, Cluster, ViewDetection};
pub use observation::{consolidate, smooth, ObservationLayout, ObservationVector, TemporalSmoother};
pub use trays::{assign_to_trays, point_in_convex_polygon, TrayRegion};

pub const DEFAULT_RADIUS: f64 = 0.01;
pub const DEFAULT_IOU_THRESH: f64 = 0.25;
pub const DEFAULT_ALPHA_UP: f64 = 0.7;
pub const DEFAULT_ALPHA_DOWN: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("all depth samples of the detection are invalid")]
    EmptyCloud,
    #[error("class id {0} does not map to a task element")]
    UnknownClass(u32),
    #[error("unknown tray `{0}`")]
    UnknownTray(String),
    #[error("unknown camera `{0}`")]
    UnknownCamera(String),
    #[error("observation dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid smoothing weights: need 0 <= alpha_down ({alpha_down}) <= alpha_up ({alpha_up}) <= 1")]
    InvalidSmoothing { alpha_up: f64, alpha_down: f64 },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("invalid tray region: {0}")]
    InvalidTrayRegion(String),
    #[error("invalid fusion parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
}

impl BBox {
    pub fn center(&self) -> [f64; 2] {
        [
            f64::from(self.x) + f64::from(self.w) / 2.0,
            f64::from(self.y) + f64::from(self.h) / 2.0,
        ]
    }
}

/// Pixel position and stored depth (in calibration depth units).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthSample {
    pub u: f32,
    pub v: f32,
    pub depth: f32,
}

impl DepthSample {
    /// Zero, negative and non-finite depths mark a missing measurement.
    pub fn is_valid(&self) -> bool {
        self.depth.is_finite() && self.depth > 0.0 && self.u.is_finite() && self.v.is_finite()
    }
}

/// Detector output for one object in one image.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection2D {
    /// Element index in task declaration order.
    pub class_id: u32,
    pub bbox: BBox,
    pub confidence: f32,
    pub depth_samples: Vec<DepthSample>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig {
    /// Radius of the point-cloud intersection test, meters.
    pub radius: f64,
    pub iou_thresh: f64,
    pub alpha_up: f64,
    pub alpha_down: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            radius: DEFAULT_RADIUS,
            iou_thresh: DEFAULT_IOU_THRESH,
            alpha_up: DEFAULT_ALPHA_UP,
            alpha_down: DEFAULT_ALPHA_DOWN,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(FusionError::InvalidParameter(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.iou_thresh > 0.0 && self.iou_thresh <= 1.0) {
            return Err(FusionError::InvalidParameter(format!(
                "iou threshold must lie in (0, 1], got {}",
                self.iou_thresh
            )));
        }
        TemporalSmoother::new(self.alpha_up, self.alpha_down).map(|_| ())
    }
}

/// Result of fusing one frame bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedFrame {
    pub raw: ObservationVector,
    pub smoothed: ObservationVector,
    pub clusters: usize,
    /// Detections ignored: unknown camera or class, or no valid depth.
    pub skipped: usize,
}

/// Frame-level fusion pipeline. Holds the smoothing state, so one instance
/// serves one monitoring session.
#[derive(Clone, Debug)]
pub struct Fuser {
    layout: ObservationLayout,
    cameras: HashMap<String, (usize, CameraCalibration)>,
    regions: Vec<TrayRegion>,
    config: FusionConfig,
    smoother: TemporalSmoother,
}

impl Fuser {
    pub fn new(
        layout: ObservationLayout,
        cameras: Vec<CameraCalibration>,
        regions: Vec<TrayRegion>,
        config: FusionConfig,
    ) -> Result<Self, FusionError> {
        config.validate()?;
        let mut by_id = HashMap::new();
        for (i, c) in cameras.into_iter().enumerate() {
            c.validate()?;
            let id = c.camera_id.clone();
            if by_id.insert(id.clone(), (i, c)).is_some() {
                return Err(FusionError::InvalidCalibration(format!("duplicate camera `{id}`")));
            }
        }
        for r in &regions {
            r.validate()?;
            if layout.tray_index(&r.tray_name).is_none() {
                return Err(FusionError::UnknownTray(r.tray_name.clone()));
            }
            if !by_id.contains_key(&r.camera_id) {
                return Err(FusionError::UnknownCamera(r.camera_id.clone()));
            }
        }
        Ok(Fuser {
            layout,
            cameras: by_id,
            regions,
            smoother: TemporalSmoother::new(config.alpha_up, config.alpha_down)?,
            config,
        })
    }

    pub fn layout(&self) -> &ObservationLayout {
        &self.layout
    }

    pub fn camera_ids(&self) -> Vec<String> {
        let mut ids: Vec<(usize, String)> = self.cameras.iter().map(|(id, (i, _))| (*i, id.clone())).collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    /// Unsmoothed consolidated observation for one set of per-camera detections.
    pub fn observe<'a, I>(&self, views: I) -> (ObservationVector, usize, usize)
    where
        I: IntoIterator<Item = (&'a str, &'a [Detection2D])>,
    {
        let n_elements = self.layout.elements.len() as u32;
        let mut skipped = 0;
        let mut view_dets = Vec::new();
        for (camera_id, dets) in views {
            let Some((cam_index, cal)) = self.cameras.get(camera_id) else {
                skipped += dets.len();
                continue;
            };
            let assigned = assign_to_trays(dets, &self.regions, camera_id);
            skipped += dets.len() - assigned.values().map(Vec::len).sum::<usize>();
            for (tray_name, indices) in assigned {
                let tray = self.layout.tray_index(&tray_name).expect("validated in new");
                for i in indices {
                    let d = &dets[i];
                    if d.class_id >= n_elements {
                        skipped += 1;
                        continue;
                    }
                    match backproject(d, cal) {
                        Ok(cloud) => view_dets.push(ViewDetection {
                            camera: *cam_index,
                            tray,
                            class_id: d.class_id,
                            confidence: f64::from(d.confidence).clamp(0.0, 1.0),
                            cloud,
                        }),
                        Err(_) => skipped += 1,
                    }
                }
            }
        }
        let clusters = match_across_views(&view_dets, self.config.radius, self.config.iou_thresh);
        let obs = consolidate(&clusters, &self.layout).expect("classes and trays filtered above");
        (obs, clusters.len(), skipped)
    }

    /// Observes and smooths.
    pub fn fuse<'a, I>(&mut self, views: I) -> FusedFrame
    where
        I: IntoIterator<Item = (&'a str, &'a [Detection2D])>,
    {
        let (raw, clusters, skipped) = self.observe(views);
        let smoothed = self.smoother.update(raw.clone()).expect("dimension fixed by layout");
        FusedFrame {
            raw,
            smoothed,
            clusters,
            skipped,
        }
    }
}
