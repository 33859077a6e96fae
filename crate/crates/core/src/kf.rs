//! Extended Kalman filter over the planar poses of both truck bodies, fed by
//! dual GNSS positions and headings.
//!
//! State: `[x_t, y_t, ψ_t, x_r, y_r, ψ_r]` (tractor origin, trailer axle).
//! Prediction reuses the simulator's motion model; the trailer position is
//! advanced by the displacement of the hitch-derived axle point so that it
//! remains an independent, measurement-corrected state.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FrameRecord, Sequence};
use crate::geom::{wrap_angle, Pose};
use crate::kinematics::{CameraId, Control, RigGeometry, EULER_SUBSTEPS, FRAME_DT};

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KfError {
    #[error("frame {frame} lacks GNSS/heading readings; inject sensor noise first")]
    MissingSensorFields { frame: usize },
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite measurement at frame {frame}")]
    NonFiniteMeasurement { frame: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KfConfig {
    /// Position process noise spectral density (m²/s).
    pub q_pos: f64,
    /// Heading process noise spectral density (rad²/s).
    pub q_heading: f64,
    pub sigma_pos: f64,
    pub sigma_heading: f64,
    pub dt: f64,
}

impl Default for KfConfig {
    fn default() -> Self {
        Self {
            q_pos: 0.01,
            q_heading: 1e-4,
            sigma_pos: 0.020,
            sigma_heading: 0.0349,
            dt: FRAME_DT,
        }
    }
}

impl KfConfig {
    pub fn validate(&self) -> Result<(), KfError> {
        let all = [self.q_pos, self.q_heading, self.sigma_pos, self.sigma_heading, self.dt];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(KfError::InvalidConfig("all noise parameters and dt must be positive".into()))
        }
    }

    fn process_noise(&self) -> Mat6 {
        let p = self.q_pos * self.dt;
        let h = self.q_heading * self.dt;
        Mat6::from_diagonal(&Vec6::new(p, p, h, p, p, h))
    }

    fn measurement_noise(&self) -> Mat6 {
        let p = self.sigma_pos * self.sigma_pos;
        let h = self.sigma_heading * self.sigma_heading;
        Mat6::from_diagonal(&Vec6::new(p, p, h, p, p, h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfState {
    pub mean: Vec6,
    pub covariance: Mat6,
}

/// `(gnss_t, gnss_r, head_t, head_r)` stacked in state order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub gnss_tractor: [f64; 2],
    pub gnss_trailer: [f64; 2],
    pub heading_tractor: f64,
    pub heading_trailer: f64,
}

impl Measurement {
    pub fn as_vector(&self) -> Vec6 {
        Vec6::new(
            self.gnss_tractor[0],
            self.gnss_tractor[1],
            self.heading_tractor,
            self.gnss_trailer[0],
            self.gnss_trailer[1],
            self.heading_trailer,
        )
    }

    pub fn from_frame(f: &FrameRecord, frame: usize) -> Result<Self, KfError> {
        match (f.gnss_tractor, f.gnss_trailer, f.heading_tractor, f.heading_trailer) {
            (Some(gt), Some(gr), Some(ht), Some(hr)) => {
                let m = Self {
                    gnss_tractor: [gt.x, gt.y],
                    gnss_trailer: [gr.x, gr.y],
                    heading_tractor: ht,
                    heading_trailer: hr,
                };
                if m.as_vector().iter().all(|v| v.is_finite()) {
                    Ok(m)
                } else {
                    Err(KfError::NonFiniteMeasurement { frame })
                }
            }
            _ => Err(KfError::MissingSensorFields { frame }),
        }
    }
}

impl KfState {
    /// Mean from the measurement; covariance diag(1 m², 1 m², 0.1 rad²) per body.
    pub fn from_measurement(z: &Measurement) -> Self {
        let mut mean = z.as_vector();
        mean[2] = wrap_angle(mean[2]);
        mean[5] = wrap_angle(mean[5]);
        Self {
            mean,
            covariance: Mat6::from_diagonal(&Vec6::new(1.0, 1.0, 0.1, 1.0, 1.0, 0.1)),
        }
    }
}

/// Trailer axle position implied by the tractor pose and trailer heading.
fn axle_from_hitch(s: &Vec6, rig: &RigGeometry) -> (f64, f64) {
    let (a, d) = (rig.hitch_offset, rig.hitch_length_d);
    (
        s[0] - a * s[2].cos() - d * s[5].cos(),
        s[1] - a * s[2].sin() - d * s[5].sin(),
    )
}

/// ∂(axle point)/∂(x_t, y_t, ψ_t, ψ_r).
fn axle_jacobian(s: &Vec6, rig: &RigGeometry) -> [[f64; 4]; 2] {
    let (a, d) = (rig.hitch_offset, rig.hitch_length_d);
    [
        [1.0, 0.0, a * s[2].sin(), d * s[5].sin()],
        [0.0, 1.0, -a * s[2].cos(), -d * s[5].cos()],
    ]
}

/// State indices of `(x_t, y_t, ψ_t, ψ_r)`.
const DRIVER: [usize; 4] = [0, 1, 2, 5];

fn substep(s: &Vec6, control: Control, h: f64, rig: &RigGeometry) -> (Vec6, Mat6) {
    let (v, w) = (control.v, control.omega);
    let d = rig.hitch_length_d;
    let phi = s[2] - s[5];
    let mut n = *s;
    n[0] += v * s[2].cos() * h;
    n[1] += v * s[2].sin() * h;
    n[5] += v / d * phi.sin() * h;
    n[2] += w * h;
    let (ax0, ay0) = axle_from_hitch(s, rig);
    let (ax1, ay1) = axle_from_hitch(&n, rig);
    n[3] += ax1 - ax0;
    n[4] += ay1 - ay0;

    // Jacobian of (x_t, y_t, ψ_t, ψ_r) with respect to the same.
    let k = v / d * phi.cos() * h;
    let a = [
        [1.0, 0.0, -v * s[2].sin() * h, 0.0],
        [0.0, 1.0, v * s[2].cos() * h, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, k, 1.0 - k],
    ];
    let mut f = Mat6::zeros();
    for (i, &ri) in DRIVER.iter().enumerate() {
        for (j, &cj) in DRIVER.iter().enumerate() {
            f[(ri, cj)] = a[i][j];
        }
    }
    let g0 = axle_jacobian(s, rig);
    let g1 = axle_jacobian(&n, rig);
    for (row, axis) in [(3usize, 0usize), (4, 1)] {
        f[(row, row)] = 1.0;
        for (j, &cj) in DRIVER.iter().enumerate() {
            let chained: f64 = (0..4).map(|m| g1[axis][m] * a[m][j]).sum();
            f[(row, cj)] = chained - g0[axis][j];
        }
    }
    (n, f)
}

/// Mean propagated over `cfg.dt` and the Jacobian of that propagation.
pub fn motion_model(mean: &Vec6, control: Control, dt: f64, rig: &RigGeometry) -> (Vec6, Mat6) {
    let h = dt / EULER_SUBSTEPS as f64;
    let mut s = *mean;
    let mut jac = Mat6::identity();
    for _ in 0..EULER_SUBSTEPS {
        let (n, f) = substep(&s, control, h, rig);
        jac = f * jac;
        s = n;
    }
    (s, jac)
}

pub fn kf_predict(state: &KfState, control: Control, cfg: &KfConfig, rig: &RigGeometry) -> KfState {
    let (mut mean, f) = motion_model(&state.mean, control, cfg.dt, rig);
    mean[2] = wrap_angle(mean[2]);
    mean[5] = wrap_angle(mean[5]);
    let p = f * state.covariance * f.transpose() + cfg.process_noise();
    KfState {
        mean,
        covariance: (p + p.transpose()) * 0.5,
    }
}

/// Linear update observing all six components; Joseph-form covariance.
pub fn kf_update(state: &KfState, z: &Measurement, cfg: &KfConfig) -> KfState {
    let r = cfg.measurement_noise();
    let p = state.covariance;
    let mut innovation = z.as_vector() - state.mean;
    innovation[2] = wrap_angle(innovation[2]);
    innovation[5] = wrap_angle(innovation[5]);
    let s = p + r;
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| s.try_inverse())
        .expect("innovation covariance is positive definite");
    let k = p * s_inv;
    let mut mean = state.mean + k * innovation;
    mean[2] = wrap_angle(mean[2]);
    mean[5] = wrap_angle(mean[5]);
    let i_k = Mat6::identity() - k;
    let joseph = i_k * p * i_k.transpose() + k * r * k.transpose();
    KfState {
        mean,
        covariance: (joseph + joseph.transpose()) * 0.5,
    }
}

/// Rear camera world pose from the filtered trailer state.
pub fn rear_camera_pose(mean: &Vec6, rig: &RigGeometry) -> Pose {
    Pose::planar(mean[3], mean[4], 0.0, mean[5]).compose(rig.mount(CameraId::Rear))
}

/// Filtered states for every frame of a noise-injected sequence.
pub fn filter_sequence(seq: &Sequence, cfg: &KfConfig) -> Result<Vec<KfState>, KfError> {
    cfg.validate()?;
    let rig = seq.rig();
    let mut out: Vec<KfState> = Vec::with_capacity(seq.frames.len());
    for (k, frame) in seq.frames.iter().enumerate() {
        let z = Measurement::from_frame(frame, k)?;
        let state = match out.last() {
            None => KfState::from_measurement(&z),
            Some(prev) => {
                let predicted = kf_predict(prev, seq.frames[k - 1].control, cfg, rig);
                kf_update(&predicted, &z, cfg)
            }
        };
        out.push(state);
    }
    Ok(out)
}

/// Per-frame rear camera world pose estimates.
pub fn run_kf(seq: &Sequence, cfg: &KfConfig) -> Result<Vec<Pose>, KfError> {
    let rig = seq.rig();
    Ok(filter_sequence(seq, cfg)?
        .iter()
        .map(|s| rear_camera_pose(&s.mean, rig))
        .collect())
}
