use std::collections::BTreeMap;

use super::{Detection2D, FusionError};

/// Pixel-space polygon of one tray as seen by one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct TrayRegion {
    pub tray_name: String,
    pub camera_id: String,
    /// Convex, either winding.
    pub polygon: Vec<[f64; 2]>,
}

impl TrayRegion {
    pub fn validate(&self) -> Result<(), FusionError> {
        if self.polygon.len() < 3 {
            return Err(FusionError::InvalidTrayRegion(format!(
                "{}/{}: polygon needs at least 3 vertices",
                self.camera_id, self.tray_name
            )));
        }
        if self.polygon.iter().flatten().any(|c| !c.is_finite()) {
            return Err(FusionError::InvalidTrayRegion(format!(
                "{}/{}: non-finite vertex",
                self.camera_id, self.tray_name
            )));
        }
        Ok(())
    }

    /// Closed-region test: points on an edge count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        point_in_convex_polygon(&self.polygon, p)
    }
}

pub fn point_in_convex_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let (mut pos, mut neg) = (false, false);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross > 0.0 {
            pos = true;
        } else if cross < 0.0 {
            neg = true;
        }
        if pos && neg {
            return false;
        }
    }
    true
}

/// Groups the detections of one camera by the tray containing their bbox
/// center. Returns tray name → detection indices; unassigned detections are
/// left out. When regions overlap the first listed region wins.
pub fn assign_to_trays(dets: &[Detection2D], regions: &[TrayRegion], camera_id: &str) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let regions: Vec<&TrayRegion> = regions.iter().filter(|r| r.camera_id == camera_id).collect();
    for (i, d) in dets.iter().enumerate() {
        let c = d.bbox.center();
        if let Some(r) = regions.iter().find(|r| r.contains(c)) {
            out.entry(r.tray_name.clone()).or_default().push(i);
        }
    }
    out
}
