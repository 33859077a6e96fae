//! Quaternion and rigid-transform algebra plus the pose error metrics.
//!
//! Rotations are stored as unit quaternions in (w, x, y, z) order; rotation
//! matrices are derived on demand. A [`Pose`] maps points from its own frame
//! into the parent frame: `p_parent = R p_local + t`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.normalize();
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, n.x * s, n.y * s, n.z * s).normalized()
    }

    /// Rotation about +z.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw / 2.0).sin_cos();
        Self::new(c, 0.0, 0.0, s).normalized()
    }

    /// Intrinsic z-y-x (yaw, pitch, roll) rotation.
    pub fn from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Self {
        let qz = Self::from_yaw(yaw);
        let qy = Self::from_axis_angle(&Vec3::y(), pitch);
        let qx = Self::from_axis_angle(&Vec3::x(), roll);
        qz.mul(&qy).mul(&qx)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Divides by the norm until the result is a bitwise fixed point, so that
    /// normalizing an already normalized quaternion never changes it.
    pub fn normalized(&self) -> Self {
        let mut q = *self;
        for _ in 0..4 {
            let n = q.norm();
            let next = Self::new(q.w / n, q.x / n, q.y / n, q.z / n);
            if next == q {
                break;
            }
            q = next;
        }
        q
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hamilton product `self ⊗ o`.
    pub fn mul(&self, o: &Self) -> Self {
        let (w1, x1, y1, z1) = (self.w, self.x, self.y, self.z);
        let (w2, x2, y2, z2) = (o.w, o.x, o.y, o.z);
        Self::new(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )
    }

    pub fn to_matrix(&self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Shepperd's method; the result has w ≥ 0.
    pub fn from_matrix(m: &Mat3) -> Self {
        let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Self::new(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self::new(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self::new(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        let q = if q.w < 0.0 { q.neg() } else { q };
        q.normalized()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.to_matrix() * v
    }

    /// Heading of the rotated x axis in the xy plane.
    pub fn yaw(&self) -> f64 {
        let m = self.to_matrix();
        m[(1, 0)].atan2(m[(0, 0)])
    }
}

/// Rigid transform: rotation followed by translation (meters).
/// Serializes as `[w, x, y, z, tx, ty, tz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 7]", from = "[f64; 7]")]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: Vec3,
}

impl From<Pose> for [f64; 7] {
    fn from(p: Pose) -> Self {
        p.to_array()
    }
}

impl From<[f64; 7]> for Pose {
    fn from(a: [f64; 7]) -> Self {
        Pose::from_array(a)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Self = Self {
        rotation: Quaternion::IDENTITY,
        translation: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn new(rotation: Quaternion, translation: Vec3) -> Self {
        Self {
            rotation: rotation.normalized(),
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Quaternion::IDENTITY, Vec3::new(x, y, z))
    }

    /// Planar pose: heading `yaw` about +z at `(x, y, z)`.
    pub fn planar(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::new(Quaternion::from_yaw(yaw), Vec3::new(x, y, z))
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_matrix()
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.mul(&other.rotation).normalized(),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.conjugate();
        Pose {
            rotation: inv.normalized(),
            translation: -(inv.rotate(&self.translation)),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Pose {
        let r: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        let t: Vec3 = m.fixed_view::<3, 1>(0, 3).into_owned();
        Pose::new(Quaternion::from_matrix(&r), t)
    }

    /// `[w, x, y, z, tx, ty, tz]`.
    pub fn to_array(&self) -> [f64; 7] {
        let q = self.rotation;
        let t = self.translation;
        [q.w, q.x, q.y, q.z, t.x, t.y, t.z]
    }

    /// Inverse of [`Pose::to_array`]; the quaternion is taken verbatim.
    pub fn from_array(a: [f64; 7]) -> Pose {
        Pose {
            rotation: Quaternion::new(a[0], a[1], a[2], a[3]),
            translation: Vec3::new(a[4], a[5], a[6]),
        }
    }

    pub fn yaw(&self) -> f64 {
        self.rotation.yaw()
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_array().iter().map(|v| format_f64(*v)).collect();
        f.write_str(&parts.join(" "))
    }
}

/// 17 significant digits, scientific notation; parses back bit-exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

/// `back⁻¹ ∘ front`.
pub fn relative_transform(front: &Pose, back: &Pose) -> Pose {
    back.inverse().compose(front)
}

/// World pose of a sibling camera rigidly attached to `rear` through `intra`.
pub fn propagate_rig(rear: &Pose, intra: &Pose) -> Pose {
    rear.compose(intra)
}

/// Geodesic angle between two rotation matrices.
///
/// Equals `arccos((tr(R̂ᵀR) − 1) / 2)` with the argument clamped to [−1, 1],
/// but is evaluated as `atan2(sin θ, cos θ)` where `sin θ` comes from the
/// skew part of `R̂ᵀR`. The arccos form loses half the digits near θ = 0.
pub fn rra(r_hat: &Mat3, r_gt: &Mat3) -> f64 {
    let m = r_hat.transpose() * r_gt;
    let cos = ((m[(0, 0)] + m[(1, 1)] + m[(2, 2)]) - 1.0) / 2.0;
    let axis = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = axis.norm() / 2.0;
    sin.atan2(cos.clamp(-1.0, 1.0))
}

/// [`rra`] on quaternions.
pub fn rra_quat(q_hat: &Quaternion, q_gt: &Quaternion) -> f64 {
    rra(&q_hat.to_matrix(), &q_gt.to_matrix())
}

/// Translation and rotation errors of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseError {
    pub delta_t: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_z: f64,
    pub rra: f64,
}

/// `(ΔT, Δx, Δy, Δz)`.
pub fn translation_error(t_hat: &Vec3, t_gt: &Vec3) -> (f64, f64, f64, f64) {
    let d = t_hat - t_gt;
    (d.norm(), d.x.abs(), d.y.abs(), d.z.abs())
}

pub fn pose_error(pred: &Pose, gt: &Pose) -> PoseError {
    let (delta_t, delta_x, delta_y, delta_z) = translation_error(&pred.translation, &gt.translation);
    PoseError {
        delta_t,
        delta_x,
        delta_y,
        delta_z,
        rra: rra_quat(&pred.rotation, &gt.rotation),
    }
}
