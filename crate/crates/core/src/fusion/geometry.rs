//! Pinhole camera model and rigid transforms.

use super::{Detection2D, FusionError, PointCloud};

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn normalize(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

pub(crate) fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

/// Rigid transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0; 3],
    };

    pub fn translation(t: Vec3) -> Self {
        RigidTransform {
            translation: t,
            ..Self::IDENTITY
        }
    }

    /// Camera-to-world pose of a camera at `eye` looking at `target`, with the
    /// camera's y axis pointing away from world `up` (image rows grow downwards).
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Self {
        let forward = normalize(sub(target, eye));
        let right = normalize(cross(forward, up));
        let down = cross(forward, right);
        RigidTransform {
            rotation: [
                [right[0], down[0], forward[0]],
                [right[1], down[1], forward[1]],
                [right[2], down[2], forward[2]],
            ],
            translation: eye,
        }
    }

    /// Builds from 16 row-major values of a homogeneous 4×4 matrix.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self, FusionError> {
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(FusionError::InvalidCalibration(
                "extrinsic bottom row must be 0 0 0 1".into(),
            ));
        }
        let t = RigidTransform {
            rotation: [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]],
            translation: [m[3], m[7], m[11]],
        };
        t.check_rotation()?;
        Ok(t)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0], r[0][1], r[0][2], t[0], r[1][0], r[1][1], r[1][2], t[1], r[2][0], r[2][1], r[2][2], t[2], 0.0,
            0.0, 0.0, 1.0,
        ]
    }

    /// Orthonormal within 1e-6 and a proper rotation.
    pub fn check_rotation(&self) -> Result<(), FusionError> {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (d - want).abs() > 1e-6 || !d.is_finite() {
                    return Err(FusionError::InvalidCalibration(
                        "extrinsic rotation is not orthonormal".into(),
                    ));
                }
            }
        }
        let det = dot(r[0], cross(r[1], r[2]));
        if det < 0.0 {
            return Err(FusionError::InvalidCalibration(
                "extrinsic rotation has determinant -1".into(),
            ));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::InvalidCalibration(
                "extrinsic translation is not finite".into(),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        [
            dot(r[0], p) + self.translation[0],
            dot(r[1], p) + self.translation[1],
            dot(r[2], p) + self.translation[2],
        ]
    }

    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        let d = sub(p, self.translation);
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ]
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        [dot(r[0], v), dot(r[1], v), dot(r[2], v)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraCalibration {
    pub camera_id: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera to world.
    pub extrinsic: RigidTransform,
    /// Meters per stored depth unit.
    pub depth_scale: f64,
}

impl CameraCalibration {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: String| Err(FusionError::InvalidCalibration(format!("{}: {m}", self.camera_id)));
        if self.camera_id.is_empty() || self.camera_id.len() > 32 {
            return bad("camera id must be 1..=32 bytes".into());
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive, got {} {}", self.fx, self.fy));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return bad("principal point is not finite".into());
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return bad(format!("depth scale must be positive, got {}", self.depth_scale));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be nonzero".into());
        }
        self.extrinsic.check_rotation()
    }

    /// World point to `(u, v, depth_units)`. `None` behind the camera.
    pub fn project(&self, world: Vec3) -> Option<(f64, f64, f64)> {
        let c = self.extrinsic.apply_inverse(world);
        if c[2] <= 0.0 {
            return None;
        }
        Some((
            self.fx * c[0] / c[2] + self.cx,
            self.fy * c[1] / c[2] + self.cy,
            c[2] / self.depth_scale,
        ))
    }

    /// Pixel plus stored depth to a world point.
    pub fn unproject(&self, u: f64, v: f64, depth_units: f64) -> Vec3 {
        let z = depth_units * self.depth_scale;
        let cam = [z * (u - self.cx) / self.fx, z * (v - self.cy) / self.fy, z];
        self.extrinsic.apply(cam)
    }

    /// World-frame direction of the viewing ray through pixel `(u, v)`,
    /// scaled so that its camera-frame z component is 1.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        self.extrinsic
            .rotate([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])
    }

    pub fn center(&self) -> Vec3 {
        self.extrinsic.translation
    }
}

/// Back-projects every valid depth sample of a detection into world space.
pub fn backproject(det: &Detection2D, cal: &CameraCalibration) -> Result<PointCloud, FusionError> {
    let points: Vec<Vec3> = det
        .depth_samples
        .iter()
        .filter(|s| s.is_valid())
        .map(|s| cal.unproject(f64::from(s.u), f64::from(s.v), f64::from(s.depth)))
        .collect();
    if points.is_empty() {
        return Err(FusionError::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}
