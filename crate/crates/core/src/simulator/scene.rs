//! Desk-scale scene: trays on the table plane, box-shaped element proxies and
//! three cameras looking down at the workspace.

use rand::Rng;

use super::SimError;
use crate::fusion::{
    BBox, CameraCalibration, DepthSample, Detection2D, ObservationLayout, RigidTransform, TrayRegion, Vec3,
};

/// Tray centers on the table plane (z = 0), in tray declaration order.
pub const STANDARD_TRAY_CENTERS: [[f64; 2]; 4] = [[-0.4, 0.2], [0.4, 0.2], [0.0, -0.2], [0.0, 0.25]];
pub const TRAY_HALF_SIZE: f64 = 0.16;
pub const ELEMENT_SIZE: f64 = 0.05;
pub const SLOT_SPACING: f64 = 0.09;
pub const POINTS_PER_ELEMENT: usize = 200;
const SLOT_GRID: usize = 3;

/// Outward normals of the five exposed faces; the bottom rests on the table.
const FACES: [Vec3; 5] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
];

#[derive(Clone, Debug, PartialEq)]
pub struct TrayPlacement {
    pub name: String,
    pub center: [f64; 2],
    pub half_size: f64,
}

impl TrayPlacement {
    /// Corners on the table plane, counter-clockwise seen from above.
    pub fn corners(&self) -> [Vec3; 4] {
        let [x, y] = self.center;
        let h = self.half_size;
        [
            [x - h, y - h, 0.0],
            [x + h, y - h, 0.0],
            [x + h, y + h, 0.0],
            [x - h, y + h, 0.0],
        ]
    }
}

/// A point of an element proxy, relative to the box center.
#[derive(Clone, Copy, Debug)]
pub struct ProxyPoint {
    pub offset: Vec3,
    pub face: usize,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub trays: Vec<TrayPlacement>,
    pub cameras: Vec<CameraCalibration>,
    pub element_size: f64,
    pub slot_spacing: f64,
    pub points_per_element: usize,
}

impl Scene {
    /// Standard layout for up to four trays and nine elements per tray.
    pub fn standard(layout: &ObservationLayout) -> Result<Self, SimError> {
        if layout.trays.len() > STANDARD_TRAY_CENTERS.len() || layout.elements.len() > SLOT_GRID * SLOT_GRID {
            return Err(SimError::SceneTooLarge {
                elements: layout.elements.len(),
                trays: layout.trays.len(),
            });
        }
        let trays = layout
            .trays
            .iter()
            .zip(STANDARD_TRAY_CENTERS)
            .map(|(name, center)| TrayPlacement {
                name: name.clone(),
                center,
                half_size: TRAY_HALF_SIZE,
            })
            .collect();
        Ok(Scene {
            trays,
            cameras: standard_cameras(),
            element_size: ELEMENT_SIZE,
            slot_spacing: SLOT_SPACING,
            points_per_element: POINTS_PER_ELEMENT,
        })
    }

    /// Center of the box of `element` when it sits in `tray`.
    pub fn element_center(&self, element: usize, tray: usize) -> Vec3 {
        let [x, y] = self.trays[tray].center;
        let col = (element % SLOT_GRID) as f64 - 1.0;
        let row = (element / SLOT_GRID) as f64 - 1.0;
        [
            x + col * self.slot_spacing,
            y + row * self.slot_spacing,
            self.element_size / 2.0,
        ]
    }

    /// Projection of every tray rectangle into every camera.
    pub fn tray_regions(&self) -> Vec<TrayRegion> {
        let mut out = Vec::new();
        for cam in &self.cameras {
            for tray in &self.trays {
                let polygon = tray
                    .corners()
                    .iter()
                    .filter_map(|&c| cam.project(c))
                    .map(|(u, v, _)| [u, v])
                    .collect::<Vec<_>>();
                if polygon.len() == 4 {
                    out.push(TrayRegion {
                        tray_name: tray.name.clone(),
                        camera_id: cam.camera_id.clone(),
                        polygon,
                    });
                }
            }
        }
        out
    }

    /// Random points on the exposed faces of one proxy box, an equal share
    /// per face.
    pub fn sample_proxy<R: Rng>(&self, rng: &mut R) -> Vec<ProxyPoint> {
        let h = self.element_size / 2.0;
        (0..self.points_per_element)
            .map(|i| {
                let face = i % FACES.len();
                let n = FACES[face];
                let a = rng.random_range(-h..h);
                let b = rng.random_range(-h..h);
                let offset = match face {
                    0 | 1 => [n[0] * h, a, b],
                    2 | 3 => [a, n[1] * h, b],
                    _ => [a, b, h],
                };
                ProxyPoint { offset, face }
            })
            .collect()
    }

    /// Renders one box into one camera: bbox of the projected corners and a
    /// depth sample for every proxy point on a face turned towards the camera.
    /// `None` when the box center falls outside the image.
    #[allow(clippy::too_many_arguments)]
    pub fn render<R: Rng>(
        &self,
        cam: &CameraCalibration,
        center: Vec3,
        proxy: &[ProxyPoint],
        position_jitter: f64,
        class_id: u32,
        confidence: f32,
        rng: &mut R,
    ) -> Option<Detection2D> {
        let inside = |u: f64, v: f64| u >= 0.0 && v >= 0.0 && u < f64::from(cam.width) && v < f64::from(cam.height);
        let (cu, cv, _) = cam.project(center)?;
        if !inside(cu, cv) {
            return None;
        }
        let h = self.element_size / 2.0;
        let eye = cam.center();
        let visible: Vec<bool> = FACES
            .iter()
            .map(|n| {
                let f = [center[0] + n[0] * h, center[1] + n[1] * h, center[2] + n[2] * h];
                n[0] * (eye[0] - f[0]) + n[1] * (eye[1] - f[1]) + n[2] * (eye[2] - f[2]) > 0.0
            })
            .collect();

        let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for dx in [-h, h] {
            for dy in [-h, h] {
                for dz in [-h, h] {
                    let (u, v, _) = cam.project([center[0] + dx, center[1] + dy, center[2] + dz])?;
                    u0 = u0.min(u);
                    v0 = v0.min(v);
                    u1 = u1.max(u);
                    v1 = v1.max(v);
                }
            }
        }
        let (w, hgt) = (f64::from(cam.width), f64::from(cam.height));
        let (u0, v0, u1, v1) = (
            u0.clamp(0.0, w),
            v0.clamp(0.0, hgt),
            u1.clamp(0.0, w),
            v1.clamp(0.0, hgt),
        );

        let mut samples = Vec::with_capacity(proxy.len() / 2);
        for p in proxy.iter().filter(|p| visible[p.face]) {
            let j = if position_jitter > 0.0 {
                ball_sample(rng, position_jitter)
            } else {
                [0.0; 3]
            };
            let world = [
                center[0] + p.offset[0] + j[0],
                center[1] + p.offset[1] + j[1],
                center[2] + p.offset[2] + j[2],
            ];
            if let Some((u, v, d)) = cam.project(world) {
                if inside(u, v) {
                    samples.push(DepthSample {
                        u: u as f32,
                        v: v as f32,
                        depth: d as f32,
                    });
                }
            }
        }
        Some(Detection2D {
            class_id,
            bbox: BBox {
                x: u0 as f32,
                y: v0 as f32,
                w: (u1 - u0) as f32,
                h: (v1 - v0) as f32,
            },
            confidence,
            depth_samples: samples,
        })
    }
}

/// Uniform sample inside a ball of radius `r`.
fn ball_sample<R: Rng>(rng: &mut R, r: f64) -> Vec3 {
    loop {
        let p: Vec3 = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
            return [p[0] * r, p[1] * r, p[2] * r];
        }
    }
}

/// Three cameras 1.2 m above the table, 0.55 m from its center at azimuths
/// 90, 210 and 330 degrees, all aimed at the center.
pub fn standard_cameras() -> Vec<CameraCalibration> {
    [90.0f64, 210.0, 330.0]
        .iter()
        .enumerate()
        .map(|(i, az)| {
            let a = az.to_radians();
            let eye = [0.55 * a.cos(), 0.55 * a.sin(), 1.2];
            CameraCalibration {
                camera_id: format!("cam{i}"),
                width: 960,
                height: 720,
                fx: 630.0,
                fy: 630.0,
                cx: 480.0,
                cy: 360.0,
                extrinsic: RigidTransform::look_at(eye, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
                depth_scale: 0.001,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout() -> ObservationLayout {
        ObservationLayout {
            elements: (1..=9).map(|i| format!("E{i}")).collect(),
            trays: ["T_in", "T_out", "T_work", "T_aux"].map(String::from).to_vec(),
        }
    }

    #[test]
    fn every_slot_is_seen_inside_its_tray_by_every_camera() {
        let scene = Scene::standard(&layout()).unwrap();
        let regions = scene.tray_regions();
        assert_eq!(regions.len(), 12);
        for cam in &scene.cameras {
            for t in 0..4 {
                for e in 0..9 {
                    let c = scene.element_center(e, t);
                    let (u, v, _) = cam.project(c).unwrap();
                    assert!(u > 0.0 && v > 0.0 && u < 960.0 && v < 720.0);
                    let hits: Vec<&str> = regions
                        .iter()
                        .filter(|r| r.camera_id == cam.camera_id && r.contains([u, v]))
                        .map(|r| r.tray_name.as_str())
                        .collect();
                    assert_eq!(hits, vec![scene.trays[t].name.as_str()]);
                }
            }
        }
    }

    #[test]
    fn rendered_samples_back_project_onto_the_box() {
        let scene = Scene::standard(&layout()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let proxy = scene.sample_proxy(&mut rng);
        let center = scene.element_center(4, 2);
        let h = ELEMENT_SIZE / 2.0;
        for cam in &scene.cameras {
            let det = scene.render(cam, center, &proxy, 0.0, 0, 1.0, &mut rng).unwrap();
            assert!(det.depth_samples.len() >= 60, "{}", det.depth_samples.len());
            for s in &det.depth_samples {
                let p = cam.unproject(f64::from(s.u), f64::from(s.v), f64::from(s.depth));
                let d: Vec<f64> = (0..3).map(|i| (p[i] - center[i]).abs()).collect();
                assert!(d.iter().all(|&x| x <= h + 1e-6));
                assert!(d.iter().any(|&x| (x - h).abs() <= 1e-6));
            }
        }
    }

    #[test]
    fn too_many_trays_is_rejected() {
        let mut l = layout();
        l.trays.push("T_extra".into());
        assert!(Scene::standard(&l).is_err());
    }
}
