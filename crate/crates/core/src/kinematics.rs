//! Planar kinematic tractor–trailer simulator.
//!
//! The tractor is a unicycle about its rear axle. The trailer hinges at a
//! hitch point `hitch_offset` behind the tractor origin and its heading
//! follows `ψ̇_trailer = (v / d) sin φ` with `φ = ψ_tractor − ψ_trailer`.
//! Each 0.1 s frame is integrated with 10 explicit Euler substeps.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Pose, Quaternion, Vec3};
use crate::seed::derive_seed;

pub const FRAME_RATE_HZ: f64 = 10.0;
pub const FRAME_DT: f64 = 1.0 / FRAME_RATE_HZ;
pub const EULER_SUBSTEPS: usize = 10;
pub const MAX_SPEED: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("articulation {phi:.4} rad exceeds jackknife limit {limit:.4} rad at t = {time_s:.2} s")]
    JackknifeExceeded { phi: f64, limit: f64, time_s: f64 },
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("invalid rig geometry: {0}")]
    InvalidRig(String),
    #[error("invalid scenario mix: {0}")]
    InvalidMix(String),
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraId {
    Front,
    FrontLeft,
    FrontRight,
    Rear,
    RearLeft,
    RearRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Tractor,
    Trailer,
}

impl CameraId {
    /// Canonical camera order used for tokens and record files.
    pub const ALL: [CameraId; 6] = [
        CameraId::Front,
        CameraId::FrontLeft,
        CameraId::FrontRight,
        CameraId::Rear,
        CameraId::RearLeft,
        CameraId::RearRight,
    ];
    pub const TRAILER: [CameraId; 3] = [CameraId::Rear, CameraId::RearLeft, CameraId::RearRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CameraId::Front => "front",
            CameraId::FrontLeft => "front_left",
            CameraId::FrontRight => "front_right",
            CameraId::Rear => "rear",
            CameraId::RearLeft => "rear_left",
            CameraId::RearRight => "rear_right",
        }
    }

    pub fn body(self) -> Body {
        match self {
            CameraId::Front | CameraId::FrontLeft | CameraId::FrontRight => Body::Tractor,
            _ => Body::Trailer,
        }
    }
}

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CameraId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CameraId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown camera `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMount {
    pub body: Body,
    /// Camera frame in its parent body frame (x forward along the optical axis, z up).
    pub mount: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMeta {
    pub width: u32,
    pub height: u32,
    pub fov_deg: f64,
}

/// Sinusoidal trailer pitch about the hitch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchPerturbation {
    pub amplitude: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigGeometry {
    /// Hitch point to trailer axle (m).
    pub hitch_length_d: f64,
    /// Tractor origin to hitch point along −x (m).
    pub hitch_offset: f64,
    /// Trailer axle to rear face along −x (m).
    pub trailer_rear_overhang: f64,
    pub jackknife_limit: f64,
    pub camera_mounts: BTreeMap<CameraId, CameraMount>,
    pub camera_meta: CameraMeta,
    #[serde(default)]
    pub pitch_perturbation: Option<PitchPerturbation>,
}

const SIDE_YAW: f64 = 55.0 * PI / 180.0;

impl Default for RigGeometry {
    fn default() -> Self {
        let overhang = 3.0;
        let tractor = |x, y, z, yaw| CameraMount {
            body: Body::Tractor,
            mount: Pose::planar(x, y, z, yaw),
        };
        let trailer = |y, yaw| CameraMount {
            body: Body::Trailer,
            mount: Pose::planar(-overhang, y, 4.0, yaw),
        };
        let camera_mounts = BTreeMap::from([
            (CameraId::Front, tractor(4.8, 0.0, 2.9, 0.0)),
            (CameraId::FrontLeft, tractor(4.6, 1.1, 2.9, SIDE_YAW)),
            (CameraId::FrontRight, tractor(4.6, -1.1, 2.9, -SIDE_YAW)),
            (CameraId::Rear, trailer(0.0, PI)),
            (CameraId::RearLeft, trailer(1.2, PI - SIDE_YAW)),
            (CameraId::RearRight, trailer(-1.2, -(PI - SIDE_YAW))),
        ]);
        Self {
            hitch_length_d: 8.0,
            hitch_offset: 1.5,
            trailer_rear_overhang: overhang,
            jackknife_limit: 1.31,
            camera_mounts,
            camera_meta: CameraMeta {
                width: 1600,
                height: 900,
                fov_deg: 110.0,
            },
            pitch_perturbation: None,
        }
    }
}

impl RigGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.hitch_length_d > 0.0) {
            return Err(KinematicsError::InvalidRig("hitch_length_d must be positive".into()));
        }
        if !(self.jackknife_limit > 0.0 && self.jackknife_limit < PI) {
            return Err(KinematicsError::InvalidRig("jackknife_limit must lie in (0, π)".into()));
        }
        if self.camera_mounts.len() != 6 {
            return Err(KinematicsError::InvalidRig(format!(
                "expected 6 cameras, found {}",
                self.camera_mounts.len()
            )));
        }
        for cam in CameraId::ALL {
            match self.camera_mounts.get(&cam) {
                Some(m) if m.body == cam.body() => {}
                Some(_) => return Err(KinematicsError::InvalidRig(format!("{cam} mounted on the wrong body"))),
                None => return Err(KinematicsError::InvalidRig(format!("missing camera {cam}"))),
            }
        }
        if let Some(p) = self.pitch_perturbation {
            if !(0.0..=0.02).contains(&p.amplitude) {
                return Err(KinematicsError::InvalidRig("pitch amplitude must be within [0, 0.02] rad".into()));
            }
        }
        Ok(())
    }

    pub fn mount(&self, cam: CameraId) -> &Pose {
        &self.camera_mounts[&cam].mount
    }

    /// Fixed transform from the rear camera to a sibling trailer camera.
    pub fn intra_trailer(&self, cam: CameraId) -> Pose {
        self.mount(CameraId::Rear).inverse().compose(self.mount(cam))
    }

    /// `(rear → rear_left, rear → rear_right)`.
    pub fn intra_trailer_pair(&self) -> (Pose, Pose) {
        (self.intra_trailer(CameraId::RearLeft), self.intra_trailer(CameraId::RearRight))
    }

    /// Trailer body pose in the tractor frame for articulation `phi` and pitch.
    pub fn trailer_in_tractor(&self, phi: f64, pitch: f64) -> Pose {
        let hitch = Vec3::new(-self.hitch_offset, 0.0, 0.0);
        let rotation = Quaternion::from_yaw(-phi).mul(&Quaternion::from_axis_angle(&Vec3::y(), pitch)).normalized();
        let origin = hitch - rotation.rotate(&Vec3::new(self.hitch_length_d, 0.0, 0.0));
        Pose::new(rotation, origin)
    }

    /// Camera pose in the tractor frame with the trailer aligned (φ = 0);
    /// this is the static calibration.
    pub fn nominal_extrinsic(&self, cam: CameraId) -> Pose {
        match cam.body() {
            Body::Tractor => *self.mount(cam),
            Body::Trailer => self.trailer_in_tractor(0.0, 0.0).compose(self.mount(cam)),
        }
    }

    pub fn trailer_pitch(&self, time_s: f64) -> f64 {
        self.pitch_perturbation
            .map_or(0.0, |p| p.amplitude * (2.0 * PI * p.frequency_hz * time_s).sin())
    }
}

/// Commanded tractor speed (m/s) and yaw rate (rad/s), held over one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

/// Planar state of the articulated truck. Headings are continuous (not
/// wrapped) so multi-turn maneuvers integrate without jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruckState {
    pub x: f64,
    pub y: f64,
    pub psi_tractor: f64,
    pub psi_trailer: f64,
    pub speed_v: f64,
    pub time_s: f64,
}

impl TruckState {
    /// Aligned truck at rest.
    pub fn at(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            psi_tractor: heading,
            psi_trailer: heading,
            speed_v: 0.0,
            time_s: 0.0,
        }
    }

    /// φ wrapped to (−π, π].
    pub fn articulation(&self) -> f64 {
        wrap_angle(self.psi_tractor - self.psi_trailer)
    }

    pub fn tractor_pose(&self) -> Pose {
        Pose::planar(self.x, self.y, 0.0, self.psi_tractor)
    }

    pub fn hitch_point(&self, rig: &RigGeometry) -> Vec3 {
        self.tractor_pose().transform_point(&Vec3::new(-rig.hitch_offset, 0.0, 0.0))
    }

    /// Trailer body frame: origin at the axle, hitch at `(d, 0, 0)`.
    pub fn trailer_pose(&self, rig: &RigGeometry) -> Pose {
        let pitch = rig.trailer_pitch(self.time_s);
        let rotation = Quaternion::from_yaw(self.psi_trailer)
            .mul(&Quaternion::from_axis_angle(&Vec3::y(), pitch))
            .normalized();
        let origin = self.hitch_point(rig) - rotation.rotate(&Vec3::new(rig.hitch_length_d, 0.0, 0.0));
        Pose::new(rotation, origin)
    }
}

/// Advances the truck by `dt` seconds under a constant control.
pub fn step(state: &TruckState, control: Control, dt: f64, rig: &RigGeometry) -> Result<TruckState, KinematicsError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(KinematicsError::InvalidControl(format!("dt must be positive, got {dt}")));
    }
    if !(control.v.abs() <= MAX_SPEED) || !control.omega.is_finite() {
        return Err(KinematicsError::InvalidControl(format!(
            "speed {} outside ±{MAX_SPEED} m/s or non-finite yaw rate",
            control.v
        )));
    }
    let h = dt / EULER_SUBSTEPS as f64;
    let d = rig.hitch_length_d;
    let mut s = *state;
    for _ in 0..EULER_SUBSTEPS {
        let phi = s.psi_tractor - s.psi_trailer;
        let (sin_t, cos_t) = s.psi_tractor.sin_cos();
        s.x += control.v * cos_t * h;
        s.y += control.v * sin_t * h;
        s.psi_trailer += control.v / d * phi.sin() * h;
        s.psi_tractor += control.omega * h;
    }
    s.speed_v = control.v;
    s.time_s = state.time_s + dt;
    let phi = s.articulation();
    if phi.abs() > rig.jackknife_limit {
        return Err(KinematicsError::JackknifeExceeded {
            phi,
            limit: rig.jackknife_limit,
            time_s: s.time_s,
        });
    }
    Ok(s)
}

/// World poses of all six cameras.
pub fn camera_extrinsics(state: &TruckState, rig: &RigGeometry) -> BTreeMap<CameraId, Pose> {
    let tractor = state.tractor_pose();
    let trailer = state.trailer_pose(rig);
    CameraId::ALL
        .into_iter()
        .map(|cam| {
            let parent = match cam.body() {
                Body::Tractor => &tractor,
                Body::Trailer => &trailer,
            };
            (cam, parent.compose(rig.mount(cam)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioKind {
    Straight,
    SingleTurn,
    LongCurve,
    TurnSequence,
    UTurn,
    LaneChange,
    Roundabout,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::Straight,
        ScenarioKind::SingleTurn,
        ScenarioKind::LongCurve,
        ScenarioKind::TurnSequence,
        ScenarioKind::UTurn,
        ScenarioKind::LaneChange,
        ScenarioKind::Roundabout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Straight => "Straight",
            ScenarioKind::SingleTurn => "SingleTurn",
            ScenarioKind::LongCurve => "LongCurve",
            ScenarioKind::TurnSequence => "TurnSequence",
            ScenarioKind::UTurn => "UTurn",
            ScenarioKind::LaneChange => "LaneChange",
            ScenarioKind::Roundabout => "Roundabout",
        }
    }

    pub fn is_turning(self) -> bool {
        self != ScenarioKind::Straight
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scenario kind `{s}`"))
    }
}

/// Kind-specific maneuver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub speed: f64,
    /// Arc radius of turns (m); unused for Straight and LaneChange.
    pub turn_radius: f64,
    /// Signed heading change of the main maneuver (rad).
    pub heading_change: f64,
    /// Signed lateral offset of a lane change (m).
    pub lane_offset: f64,
    /// Straight driving before the first maneuver (s).
    pub lead_in_s: f64,
    pub initial_heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub params: ScenarioParams,
    pub seed: u64,
}

/// Piecewise heading schedule: a sum of smooth heading changes.
#[derive(Debug, Clone)]
struct HeadingProfile {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    /// Yaw rate ramps up with a half cosine over `ramp`, holds, ramps down.
    Arc { start: f64, ramp: f64, hold: f64, rate: f64 },
    /// Heading rises to `peak` and returns to zero: ψ = peak (1 − cos 2πτ/T) / 2.
    Hump { start: f64, period: f64, peak: f64 },
}

impl Segment {
    fn end(&self) -> f64 {
        match *self {
            Segment::Arc { start, ramp, hold, .. } => start + 2.0 * ramp + hold,
            Segment::Hump { start, period, .. } => start + period,
        }
    }

    fn heading(&self, t: f64) -> f64 {
        match *self {
            Segment::Arc { start, ramp, hold, rate } => {
                let up = |u: f64| rate * (u - ramp / PI * (PI * u / ramp).sin()) / 2.0;
                let total = rate * (ramp + hold);
                let tau = t - start;
                let len = 2.0 * ramp + hold;
                if tau <= 0.0 {
                    0.0
                } else if tau < ramp {
                    up(tau)
                } else if tau <= ramp + hold {
                    rate * ramp / 2.0 + rate * (tau - ramp)
                } else if tau < len {
                    total - up(len - tau)
                } else {
                    total
                }
            }
            Segment::Hump { start, period, peak } => {
                let tau = t - start;
                if tau <= 0.0 || tau >= period {
                    0.0
                } else {
                    peak * (1.0 - (2.0 * PI * tau / period).cos()) / 2.0
                }
            }
        }
    }
}

impl HeadingProfile {
    fn heading(&self, t: f64) -> f64 {
        self.segments.iter().map(|s| s.heading(t)).sum()
    }

    fn end(&self) -> f64 {
        self.segments.iter().map(Segment::end).fold(0.0, f64::max)
    }
}

const TURN_RAMP_S: f64 = 1.5;
const GAP_S: f64 = 2.0;
const TAIL_S: f64 = 3.0;

/// Arc with heading change `delta` at radius `radius`, starting at `start`.
fn arc(start: f64, delta: f64, radius: f64, speed: f64, ramp: f64) -> Segment {
    let rate_mag = speed / radius;
    let mut ramp = ramp;
    // total = rate * (ramp + hold) must reach |delta| with hold ≥ 0
    if rate_mag * ramp > delta.abs() {
        ramp = delta.abs() / rate_mag;
    }
    let hold = delta.abs() / rate_mag - ramp;
    Segment::Arc {
        start,
        ramp,
        hold,
        rate: rate_mag * delta.signum(),
    }
}

impl ScenarioSpec {
    /// Draws kind-specific parameters from `seed`.
    pub fn sample(kind: ScenarioKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let initial_heading = rng.gen_range(-PI..PI);
        let lead_in_s = rng.gen_range(2.0..4.0);
        let mut params = ScenarioParams {
            speed: 10.0,
            turn_radius: 0.0,
            heading_change: 0.0,
            lane_offset: 0.0,
            lead_in_s,
            initial_heading,
        };
        match kind {
            ScenarioKind::Straight => {
                params.speed = rng.gen_range(8.0..14.0);
            }
            ScenarioKind::SingleTurn => {
                params.speed = rng.gen_range(5.0..8.0);
                params.turn_radius = rng.gen_range(14.0..24.0);
                params.heading_change = sign(&mut rng) * PI / 2.0;
            }
            ScenarioKind::LongCurve => {
                params.speed = rng.gen_range(8.0..13.0);
                params.turn_radius = rng.gen_range(40.0..90.0);
                params.heading_change = sign(&mut rng) * rng.gen_range(PI / 3.0..PI / 2.0);
            }
            ScenarioKind::TurnSequence => {
                params.speed = rng.gen_range(5.0..8.0);
                params.turn_radius = rng.gen_range(14.0..24.0);
                params.heading_change = sign(&mut rng) * PI / 2.0;
            }
            ScenarioKind::UTurn => {
                params.speed = rng.gen_range(4.0..6.0);
                params.turn_radius = rng.gen_range(12.0..16.0);
                params.heading_change = PI;
            }
            ScenarioKind::LaneChange => {
                params.speed = rng.gen_range(10.0..14.0);
                params.lane_offset = sign(&mut rng) * 3.5;
                params.heading_change = 0.0;
            }
            ScenarioKind::Roundabout => {
                params.speed = rng.gen_range(5.0..7.0);
                params.turn_radius = rng.gen_range(15.0..22.0);
                let exit = rng.gen_range(1..=3) as f64;
                params.heading_change = exit * PI / 2.0;
            }
        }
        let mut spec = Self {
            kind,
            duration_s: 0.0,
            rate_hz: FRAME_RATE_HZ,
            params,
            seed,
        };
        let end = spec.profile().end();
        let base = if kind == ScenarioKind::Straight { 15.0 } else { 0.0 };
        spec.duration_s = (end + TAIL_S).max(base).ceil();
        spec
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize
    }

    fn profile(&self) -> HeadingProfile {
        let p = &self.params;
        let t0 = p.lead_in_s;
        let segments = match self.kind {
            ScenarioKind::Straight => vec![],
            ScenarioKind::SingleTurn | ScenarioKind::UTurn => {
                vec![arc(t0, p.heading_change, p.turn_radius, p.speed, TURN_RAMP_S)]
            }
            ScenarioKind::LongCurve => vec![arc(t0, p.heading_change, p.turn_radius, p.speed, 3.0)],
            ScenarioKind::TurnSequence => {
                let mut segs = Vec::new();
                let mut start = t0;
                for i in 0..3 {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    let s = arc(start, sign * p.heading_change, p.turn_radius, p.speed, TURN_RAMP_S);
                    start = s.end() + GAP_S;
                    segs.push(s);
                }
                segs
            }
            ScenarioKind::LaneChange => {
                let period = 5.0;
                // lateral offset ≈ v ∫ψ dt = v · peak · T / 2
                let peak = 2.0 * p.lane_offset / (p.speed * period);
                vec![Segment::Hump { start: t0, period, peak }]
            }
            ScenarioKind::Roundabout => {
                let deflect = PI / 6.0;
                let r = p.turn_radius;
                let entry = arc(t0, -deflect, r, p.speed, 1.0);
                let ring = arc(entry.end(), p.heading_change + 2.0 * deflect, r, p.speed, 1.0);
                let exit = arc(ring.end(), -deflect, r, p.speed, 1.0);
                vec![entry, ring, exit]
            }
        };
        HeadingProfile { segments }
    }

    /// Control applied from frame `k` to frame `k + 1`.
    pub fn control(&self, k: usize) -> Control {
        let profile = self.profile();
        let dt = 1.0 / self.rate_hz;
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        Control {
            v: self.params.speed,
            omega: (profile.heading(t1) - profile.heading(t0)) / dt,
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if (self.rate_hz - FRAME_RATE_HZ).abs() > 1e-12 {
            return Err(KinematicsError::InvalidSpec(format!("rate must be {FRAME_RATE_HZ} Hz")));
        }
        if !(self.duration_s >= 0.0) {
            return Err(KinematicsError::InvalidSpec("duration must be non-negative".into()));
        }
        if self.kind == ScenarioKind::UTurn && (self.params.heading_change - PI).abs() > 1e-12 {
            return Err(KinematicsError::InvalidSpec("a U-turn changes heading by π".into()));
        }
        if self.kind.is_turning()
            && !matches!(self.kind, ScenarioKind::LaneChange)
            && !(self.params.turn_radius > 0.0)
        {
            return Err(KinematicsError::InvalidSpec("turn radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFrame {
    pub state: TruckState,
    pub control: Control,
    pub extrinsics: BTreeMap<CameraId, Pose>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSequence {
    pub spec: ScenarioSpec,
    pub frames: Vec<SimFrame>,
}

/// Simulates `spec.duration_s × 10` frames from an aligned start at the origin.
pub fn generate(spec: &ScenarioSpec, rig: &RigGeometry) -> Result<SimSequence, KinematicsError> {
    spec.validate()?;
    rig.validate()?;
    let n = spec.frame_count();
    let dt = 1.0 / spec.rate_hz;
    let mut frames = Vec::with_capacity(n);
    let mut state = TruckState::at(0.0, 0.0, spec.params.initial_heading);
    state.speed_v = spec.params.speed;
    for k in 0..n {
        let control = spec.control(k);
        frames.push(SimFrame {
            state,
            control,
            extrinsics: camera_extrinsics(&state, rig),
        });
        if k + 1 < n {
            state = step(&state, control, dt, rig)?;
        }
    }
    Ok(SimSequence { spec: *spec, frames })
}

/// Scenario composition: probability per kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    pub weights: BTreeMap<ScenarioKind, f64>,
}

/// Share of turning maneuvers and their internal split (percent).
const REFERENCE_TURNING_SHARE: f64 = 0.379;
const REFERENCE_TURNING_SPLIT: [(ScenarioKind, f64); 6] = [
    (ScenarioKind::LongCurve, 32.4),
    (ScenarioKind::SingleTurn, 23.8),
    (ScenarioKind::TurnSequence, 19.0),
    (ScenarioKind::UTurn, 9.6),
    (ScenarioKind::LaneChange, 8.2),
    (ScenarioKind::Roundabout, 7.1),
];

impl Mix {
    /// 62.1 % straight; the turning share split by the category
    /// percentages (renormalized, they sum to 100.1).
    pub fn reference() -> Self {
        let total: f64 = REFERENCE_TURNING_SPLIT.iter().map(|(_, p)| p).sum();
        let mut weights = BTreeMap::new();
        weights.insert(ScenarioKind::Straight, 1.0 - REFERENCE_TURNING_SHARE);
        for (kind, pct) in REFERENCE_TURNING_SPLIT {
            weights.insert(kind, REFERENCE_TURNING_SHARE * pct / total);
        }
        Self { weights }
    }

    pub fn only(kind: ScenarioKind) -> Self {
        Self {
            weights: BTreeMap::from([(kind, 1.0)]),
        }
    }

    /// `reference` or a comma-separated `Kind=weight` list.
    pub fn parse(s: &str) -> Result<Self, KinematicsError> {
        if s == "reference" {
            return Ok(Self::reference());
        }
        let mut weights = BTreeMap::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, w) = part
                .split_once('=')
                .ok_or_else(|| KinematicsError::InvalidMix(format!("expected Kind=weight, got `{part}`")))?;
            let kind: ScenarioKind = k.trim().parse().map_err(KinematicsError::InvalidMix)?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| KinematicsError::InvalidMix(format!("bad weight `{w}`")))?;
            weights.insert(kind, w);
        }
        let mix = Self { weights };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.weights.is_empty() {
            return Err(KinematicsError::InvalidMix("empty mix".into()));
        }
        if self.weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(KinematicsError::InvalidMix("weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.weights.values().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(KinematicsError::InvalidMix(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` sequences; ties go to the
    /// earlier kind.
    pub fn counts(&self, n: usize) -> Result<BTreeMap<ScenarioKind, usize>, KinematicsError> {
        self.validate()?;
        let quotas: Vec<(ScenarioKind, f64)> = self.weights.iter().map(|(k, w)| (*k, w * n as f64)).collect();
        let mut counts: BTreeMap<ScenarioKind, usize> =
            quotas.iter().map(|(k, q)| (*k, q.floor() as usize)).collect();
        let assigned: usize = counts.values().sum();
        let mut order: Vec<(ScenarioKind, f64)> = quotas.iter().map(|(k, q)| (*k, q - q.floor())).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (kind, _) in order.into_iter().take(n.saturating_sub(assigned)) {
            *counts.get_mut(&kind).expect("kind present") += 1;
        }
        Ok(counts)
    }
}

pub fn sequence_id(i: usize) -> String {
    format!("seq_{i:04}")
}

/// Specs for a corpus: kinds apportioned by `mix`, shuffled by `seed`, each
/// sequence seeded from `seed` and its id.
pub fn corpus_specs(n_sequences: usize, mix: &Mix, seed: u64) -> Result<Vec<(String, ScenarioSpec)>, KinematicsError> {
    if n_sequences == 0 {
        return Err(KinematicsError::InvalidMix("n_sequences must be at least 1".into()));
    }
    let counts = mix.counts(n_sequences)?;
    let mut kinds: Vec<ScenarioKind> = counts.iter().flat_map(|(k, c)| std::iter::repeat(*k).take(*c)).collect();
    kinds.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, "corpus.order")));
    Ok(kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            let id = sequence_id(i);
            let spec = ScenarioSpec::sample(kind, derive_seed(seed, &id));
            (id, spec)
        })
        .collect())
}

pub fn generate_corpus(
    n_sequences: usize,
    mix: &Mix,
    seed: u64,
    rig: &RigGeometry,
) -> Result<Vec<(String, SimSequence)>, KinematicsError> {
    corpus_specs(n_sequences, mix, seed)?
        .into_iter()
        .map(|(id, spec)| generate(&spec, rig).map(|s| (id, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{relative_transform, rra_quat};

    fn rig() -> RigGeometry {
        RigGeometry::default()
    }

    #[test]
    fn straight_driving_keeps_alignment() {
        let rig = rig();
        let mut s = TruckState::at(0.0, 0.0, 0.4);
        for _ in 0..300 {
            s = step(&s, Control { v: 12.0, omega: 0.0 }, FRAME_DT, &rig).unwrap();
            assert!(s.articulation().abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_speed_changes_only_heading() {
        let rig = rig();
        let s0 = TruckState::at(3.0, -2.0, 0.1);
        let s1 = step(&s0, Control { v: 0.0, omega: 0.0 }, FRAME_DT, &rig).unwrap();
        assert_eq!((s1.x, s1.y, s1.psi_tractor, s1.psi_trailer), (s0.x, s0.y, s0.psi_tractor, s0.psi_trailer));
        let s2 = step(&s0, Control { v: 0.0, omega: 0.3 }, FRAME_DT, &rig).unwrap();
        assert_eq!((s2.x, s2.y, s2.psi_trailer), (s0.x, s0.y, s0.psi_trailer));
        assert!((s2.psi_tractor - 0.13).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_controls_and_jackknife() {
        let rig = rig();
        let s = TruckState::at(0.0, 0.0, 0.0);
        assert!(step(&s, Control { v: 31.0, omega: 0.0 }, FRAME_DT, &rig).is_err());
        assert!(step(&s, Control { v: 1.0, omega: 0.0 }, 0.0, &rig).is_err());
        let mut s = s;
        let err = (0..100).find_map(|_| match step(&s, Control { v: 0.5, omega: 2.0 }, FRAME_DT, &rig) {
            Ok(n) => {
                s = n;
                None
            }
            Err(e) => Some(e),
        });
        assert!(matches!(err, Some(KinematicsError::JackknifeExceeded { .. })));
    }

    #[test]
    fn hitch_points_coincide() {
        let mut rig = rig();
        rig.pitch_perturbation = Some(PitchPerturbation { amplitude: 0.02, frequency_hz: 0.7 });
        let spec = ScenarioSpec::sample(ScenarioKind::TurnSequence, 5);
        let seq = generate(&spec, &rig).unwrap();
        for f in &seq.frames {
            let from_tractor = f.state.hitch_point(&rig);
            let from_trailer = f.state.trailer_pose(&rig).transform_point(&Vec3::new(rig.hitch_length_d, 0.0, 0.0));
            assert!((from_tractor - from_trailer).norm() < 1e-9);
        }
    }

    #[test]
    fn aligned_rear_camera_matches_static_calibration() {
        let rig = rig();
        let s = TruckState::at(10.0, 5.0, 1.1);
        let ext = camera_extrinsics(&s, &rig);
        let rel = s.tractor_pose().inverse().compose(&ext[&CameraId::Rear]);
        let nominal = rig.nominal_extrinsic(CameraId::Rear);
        assert!((rel.translation - nominal.translation).norm() < 1e-9);
        assert!(rra_quat(&rel.rotation, &nominal.rotation) < 1e-9);
    }

    #[test]
    fn articulation_carries_into_rear_rotation() {
        let rig = rig();
        let mut s = TruckState::at(-4.0, 2.0, 0.8);
        s.psi_trailer = s.psi_tractor - 0.3;
        let ext = camera_extrinsics(&s, &rig);
        let rel = s.tractor_pose().inverse().compose(&ext[&CameraId::Rear]);
        let nominal = rig.nominal_extrinsic(CameraId::Rear);
        assert!((rra_quat(&rel.rotation, &nominal.rotation) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn siblings_follow_intra_trailer_transform() {
        let rig = rig();
        let spec = ScenarioSpec::sample(ScenarioKind::Roundabout, 9);
        let seq = generate(&spec, &rig).unwrap();
        let (left, right) = rig.intra_trailer_pair();
        let first = relative_transform(&seq.frames[0].extrinsics[&CameraId::RearLeft], &seq.frames[0].extrinsics[&CameraId::Rear]);
        for f in &seq.frames {
            let rear = f.extrinsics[&CameraId::Rear];
            let l = crate::geom::propagate_rig(&rear, &left);
            let r = crate::geom::propagate_rig(&rear, &right);
            assert!((l.translation - f.extrinsics[&CameraId::RearLeft].translation).norm() < 1e-9);
            assert!((r.translation - f.extrinsics[&CameraId::RearRight].translation).norm() < 1e-9);
            let rel = relative_transform(&f.extrinsics[&CameraId::RearLeft], &rear);
            assert!((rel.translation - first.translation).norm() < 1e-9);
            assert!(rra_quat(&rel.rotation, &first.rotation) < 1e-9);
        }
    }

    #[test]
    fn stationary_truck_keeps_camera_poses() {
        let rig = rig();
        let mut s = TruckState::at(1.0, 1.0, 0.3);
        s.psi_trailer = 0.1;
        let before = camera_extrinsics(&s, &rig);
        for _ in 0..50 {
            s = step(&s, Control::default(), FRAME_DT, &rig).unwrap();
        }
        assert_eq!(camera_extrinsics(&s, &rig), before);
    }

    #[test]
    fn reference_mix_counts_for_100() {
        let counts = Mix::reference().counts(100).unwrap();
        assert_eq!(counts[&ScenarioKind::Straight], 62);
        assert_eq!(counts[&ScenarioKind::LongCurve], 12);
        assert_eq!(counts[&ScenarioKind::SingleTurn], 9);
        assert_eq!(counts[&ScenarioKind::TurnSequence], 7);
        assert_eq!(counts[&ScenarioKind::UTurn], 4);
        assert_eq!(counts[&ScenarioKind::LaneChange], 3);
        assert_eq!(counts[&ScenarioKind::Roundabout], 3);
        assert_eq!(counts.values().sum::<usize>(), 100);
    }

    #[test]
    fn malformed_mix_rejected() {
        assert!(Mix::parse("Straight=0.5").is_err());
        assert!(Mix::parse("Straight=0.5,UTurn=-0.5,LongCurve=1.0").is_err());
        assert!(Mix::parse("Bogus=1.0").is_err());
        assert!(Mix::parse("Straight=1.0").is_ok());
    }

    #[test]
    fn every_kind_generates_feasibly() {
        let rig = rig();
        for kind in ScenarioKind::ALL {
            for seed in 0..20 {
                let spec = ScenarioSpec::sample(kind, seed);
                let seq = generate(&spec, &rig).unwrap_or_else(|e| panic!("{kind} seed {seed}: {e}"));
                assert_eq!(seq.frames.len(), spec.frame_count());
            }
        }
    }
}
