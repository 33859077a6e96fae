//! Sequence records on disk, sensor noise and train/validation splits.
//!
//! Layout of a corpus directory:
//!
//! ```text
//! <out>/corpus.json
//! <out>/<seq_id>/manifest.json
//! <out>/<seq_id>/frames.ndrec
//! ```
//!
//! `frames.ndrec` holds one frame per line as whitespace-separated tokens in a
//! fixed order; reals use 17 significant digits, absent sensor readings are a
//! single `-`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{format_f64, wrap_angle, Pose, Quaternion, Vec3};
use crate::kinematics::{CameraId, Control, RigGeometry, ScenarioKind, ScenarioSpec, SimSequence};
use crate::seed::derive_seed;

pub const FORMAT_VERSION: u32 = 1;
pub const FRAME_INTERVAL_US: u64 = 100_000;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.ndrec";
pub const CORPUS_FILE: &str = "corpus.json";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("need at least 2 sequences to split, got {0}")]
    TooFewSequences(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

type Result<T, E = DatasetError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> DatasetError + '_ {
    move |source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub center: [f64; 3],
    /// `(w, l, h)` in meters.
    pub size: [f64; 3],
    pub orientation: Quaternion,
    pub track_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub timestamp_us: u64,
    pub scenario_kind: ScenarioKind,
    pub ego_pose: Pose,
    pub trailer_pose: Pose,
    pub gt_extrinsics: BTreeMap<CameraId, Pose>,
    pub gnss_tractor: Option<Vec3>,
    pub gnss_trailer: Option<Vec3>,
    pub heading_tractor: Option<f64>,
    pub heading_trailer: Option<f64>,
    /// Control applied from this frame to the next.
    pub control: Control,
    pub boxes: Vec<BoxAnnotation>,
}

impl FrameRecord {
    pub fn has_sensor_readings(&self) -> bool {
        self.gnss_tractor.is_some()
            && self.gnss_trailer.is_some()
            && self.heading_tractor.is_some()
            && self.heading_trailer.is_some()
    }

    pub fn extrinsic(&self, cam: CameraId) -> &Pose {
        &self.gt_extrinsics[&cam]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub sigma_pos: f64,
    pub sigma_heading: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub format_version: u32,
    pub sequence_id: String,
    pub spec: ScenarioSpec,
    pub rig: RigGeometry,
    pub frame_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseSettings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub manifest: SequenceManifest,
    pub frames: Vec<FrameRecord>,
}

impl Sequence {
    pub fn id(&self) -> &str {
        &self.manifest.sequence_id
    }

    pub fn kind(&self) -> ScenarioKind {
        self.manifest.spec.kind
    }

    pub fn rig(&self) -> &RigGeometry {
        &self.manifest.rig
    }

    /// Ground-truth records without sensor readings.
    pub fn from_sim(id: &str, sim: &SimSequence, rig: &RigGeometry) -> Self {
        let frames = sim
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| FrameRecord {
                timestamp_us: k as u64 * FRAME_INTERVAL_US,
                scenario_kind: sim.spec.kind,
                ego_pose: f.state.tractor_pose(),
                trailer_pose: f.state.trailer_pose(rig),
                gt_extrinsics: f.extrinsics.clone(),
                gnss_tractor: None,
                gnss_trailer: None,
                heading_tractor: None,
                heading_trailer: None,
                control: f.control,
                boxes: Vec::new(),
            })
            .collect::<Vec<_>>();
        Self {
            manifest: SequenceManifest {
                format_version: FORMAT_VERSION,
                sequence_id: id.to_string(),
                spec: sim.spec,
                rig: rig.clone(),
                frame_count: frames.len(),
                seed: sim.spec.seed,
                noise: None,
            },
            frames,
        }
    }
}

/// Noisy GNSS positions and headings for both bodies.
///
/// Positions get iid `N(0, sigma_pos²)` per axis; headings are the true yaw
/// plus `N(0, sigma_heading²)`, wrapped to (−π, π]. Ground-truth fields are
/// left untouched.
pub fn inject_sensor_noise(seq: &Sequence, sigma_pos: f64, sigma_heading: f64, seed: u64) -> Result<Sequence> {
    if !(sigma_pos >= 0.0 && sigma_pos.is_finite() && sigma_heading >= 0.0 && sigma_heading.is_finite()) {
        return Err(DatasetError::InvalidArgument("noise sigmas must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, seq.id()));
    let pos = Normal::new(0.0, sigma_pos).expect("sigma checked");
    let head = Normal::new(0.0, sigma_heading).expect("sigma checked");
    let mut out = seq.clone();
    for f in &mut out.frames {
        let mut noisy = |t: &Vec3| Vec3::new(t.x + pos.sample(&mut rng), t.y + pos.sample(&mut rng), t.z + pos.sample(&mut rng));
        f.gnss_tractor = Some(noisy(&f.ego_pose.translation));
        f.gnss_trailer = Some(noisy(&f.trailer_pose.translation));
        f.heading_tractor = Some(wrap_angle(f.ego_pose.yaw() + head.sample(&mut rng)));
        f.heading_trailer = Some(wrap_angle(f.trailer_pose.yaw() + head.sample(&mut rng)));
    }
    out.manifest.noise = Some(NoiseSettings {
        sigma_pos,
        sigma_heading,
        seed,
    });
    Ok(out)
}

/// Constant-velocity traffic boxes around the ego start, one track per agent.
pub fn add_agents(seq: &mut Sequence, n_agents: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("{}.agents", seq.id())));
    let origin = seq.frames.first().map_or(Vec3::zeros(), |f| f.ego_pose.translation);
    let agents: Vec<(Vec3, Vec3, [f64; 3], f64)> = (0..n_agents)
        .map(|_| {
            let r = rng.gen_range(10.0..60.0);
            let bearing = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let speed = rng.gen_range(0.0..12.0);
            let size = [rng.gen_range(1.7..2.1), rng.gen_range(4.0..5.2), rng.gen_range(1.4..1.9)];
            let start = origin + Vec3::new(r * bearing.cos(), r * bearing.sin(), size[2] / 2.0);
            let vel = Vec3::new(speed * heading.cos(), speed * heading.sin(), 0.0);
            (start, vel, size, heading)
        })
        .collect();
    for (k, f) in seq.frames.iter_mut().enumerate() {
        let t = k as f64 * FRAME_INTERVAL_US as f64 * 1e-6;
        f.boxes = agents
            .iter()
            .enumerate()
            .map(|(i, (start, vel, size, heading))| {
                let c = start + vel * t;
                BoxAnnotation {
                    center: [c.x, c.y, c.z],
                    size: *size,
                    orientation: Quaternion::from_yaw(*heading),
                    track_id: i as u32,
                }
            })
            .collect();
    }
}

fn push_vec(out: &mut Vec<String>, v: &[f64]) {
    out.extend(v.iter().map(|x| format_f64(*x)));
}

fn push_opt_vec(out: &mut Vec<String>, v: &Option<Vec3>) {
    match v {
        Some(v) => push_vec(out, v.as_slice()),
        None => out.push("-".into()),
    }
}

fn push_opt(out: &mut Vec<String>, v: Option<f64>) {
    out.push(v.map_or_else(|| "-".into(), format_f64));
}

/// One record line, without the trailing newline.
pub fn format_record(f: &FrameRecord) -> String {
    let mut t = Vec::with_capacity(80);
    t.push(f.timestamp_us.to_string());
    t.push(f.scenario_kind.as_str().to_string());
    push_vec(&mut t, &f.ego_pose.to_array());
    push_vec(&mut t, &f.trailer_pose.to_array());
    for cam in CameraId::ALL {
        push_vec(&mut t, &f.gt_extrinsics[&cam].to_array());
    }
    push_opt_vec(&mut t, &f.gnss_tractor);
    push_opt_vec(&mut t, &f.gnss_trailer);
    push_opt(&mut t, f.heading_tractor);
    push_opt(&mut t, f.heading_trailer);
    push_vec(&mut t, &[f.control.v, f.control.omega]);
    t.push(f.boxes.len().to_string());
    for b in &f.boxes {
        t.push(b.track_id.to_string());
        push_vec(&mut t, &b.center);
        push_vec(&mut t, &b.size);
        push_vec(&mut t, &b.orientation.to_array());
    }
    t.join(" ")
}

struct Tokens<'a> {
    it: std::str::SplitAsciiWhitespace<'a>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> DatasetError {
        DatasetError::CorruptRecord {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.it.next().ok_or_else(|| self.corrupt(format!("missing {what}")))
    }

    fn real(&mut self, what: &str) -> Result<f64> {
        let tok = self.next(what)?;
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.corrupt(format!("bad {what} `{tok}`")))
    }

    fn reals<const N: usize>(&mut self, what: &str) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.real(what)?;
        }
        Ok(out)
    }

    fn int<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.next(what)?;
        tok.parse().map_err(|_| self.corrupt(format!("bad {what} `{tok}`")))
    }

    fn opt_vec(&mut self, what: &str) -> Result<Option<Vec3>> {
        let tok = self.next(what)?;
        if tok == "-" {
            return Ok(None);
        }
        let x = tok.parse::<f64>().map_err(|_| self.corrupt(format!("bad {what} `{tok}`")))?;
        let [y, z] = self.reals::<2>(what)?;
        Ok(Some(Vec3::new(x, y, z)))
    }

    fn opt_real(&mut self, what: &str) -> Result<Option<f64>> {
        let tok = self.next(what)?;
        if tok == "-" {
            return Ok(None);
        }
        tok.parse().map(Some).map_err(|_| self.corrupt(format!("bad {what} `{tok}`")))
    }
}

/// Parses one record line; `line` (1-based) is used in error reports.
pub fn parse_record(text: &str, line: usize) -> Result<FrameRecord> {
    let mut tk = Tokens {
        it: text.split_ascii_whitespace(),
        line,
    };
    let timestamp_us = tk.int("timestamp")?;
    let kind_tok = tk.next("scenario kind")?;
    let scenario_kind: ScenarioKind = kind_tok.parse().map_err(|e: String| tk.corrupt(e))?;
    let ego_pose = Pose::from_array(tk.reals::<7>("ego pose")?);
    let trailer_pose = Pose::from_array(tk.reals::<7>("trailer pose")?);
    let mut gt_extrinsics = BTreeMap::new();
    for cam in CameraId::ALL {
        gt_extrinsics.insert(cam, Pose::from_array(tk.reals::<7>(cam.as_str())?));
    }
    let gnss_tractor = tk.opt_vec("tractor gnss")?;
    let gnss_trailer = tk.opt_vec("trailer gnss")?;
    let heading_tractor = tk.opt_real("tractor heading")?;
    let heading_trailer = tk.opt_real("trailer heading")?;
    let [v, omega] = tk.reals::<2>("control")?;
    let n_boxes: usize = tk.int("box count")?;
    let mut boxes = Vec::with_capacity(n_boxes.min(1024));
    for _ in 0..n_boxes {
        let track_id = tk.int("track id")?;
        let center = tk.reals::<3>("box center")?;
        let size = tk.reals::<3>("box size")?;
        let orientation = Quaternion::from_array(tk.reals::<4>("box orientation")?);
        boxes.push(BoxAnnotation {
            center,
            size,
            orientation,
            track_id,
        });
    }
    if let Some(extra) = tk.it.next() {
        return Err(tk.corrupt(format!("unexpected trailing token `{extra}`")));
    }
    Ok(FrameRecord {
        timestamp_us,
        scenario_kind,
        ego_pose,
        trailer_pose,
        gt_extrinsics,
        gnss_tractor,
        gnss_trailer,
        heading_tractor,
        heading_trailer,
        control: Control { v, omega },
        boxes,
    })
}

pub fn manifest_json(seq: &Sequence) -> String {
    let mut manifest = seq.manifest.clone();
    manifest.frame_count = seq.frames.len();
    let mut s = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn records_text(seq: &Sequence) -> String {
    let mut s = String::new();
    for f in &seq.frames {
        s.push_str(&format_record(f));
        s.push('\n');
    }
    s
}

/// Writes `<dir>/manifest.json` and `<dir>/frames.ndrec`.
pub fn write_sequence(seq: &Sequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = dir.join(MANIFEST_FILE);
    fs::write(&manifest, manifest_json(seq)).map_err(io_err(&manifest))?;
    let frames = dir.join(FRAMES_FILE);
    let mut file = fs::File::create(&frames).map_err(io_err(&frames))?;
    file.write_all(records_text(seq).as_bytes()).map_err(io_err(&frames))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<SequenceManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err(&path))?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(DatasetError::FormatVersionMismatch {
            found,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(json_err(&path))
}

pub fn read_sequence(dir: &Path) -> Result<Sequence> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(FRAMES_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut frames = Vec::with_capacity(manifest.frame_count);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line_no > manifest.frame_count {
            return Err(DatasetError::CorruptRecord {
                line: line_no,
                reason: format!("manifest declares {} frames", manifest.frame_count),
            });
        }
        let rec = parse_record(line, line_no)?;
        if let Some(prev) = frames.last() {
            let prev: &FrameRecord = prev;
            if rec.timestamp_us != prev.timestamp_us + FRAME_INTERVAL_US {
                return Err(DatasetError::CorruptRecord {
                    line: line_no,
                    reason: format!("timestamp {} does not follow {}", rec.timestamp_us, prev.timestamp_us),
                });
            }
        }
        frames.push(rec);
    }
    if frames.len() < manifest.frame_count {
        return Err(DatasetError::CorruptRecord {
            line: frames.len() + 1,
            reason: format!("manifest declares {} frames, file has {}", manifest.frame_count, frames.len()),
        });
    }
    Ok(Sequence { manifest, frames })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub format_version: u32,
    pub seed: u64,
    pub sequences: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub kind: ScenarioKind,
    pub frame_count: usize,
}

pub fn write_corpus(seqs: &[Sequence], seed: u64, dir: &Path) -> Result<()> {
    for s in seqs {
        write_sequence(s, &dir.join(s.id()))?;
    }
    let index = CorpusIndex {
        format_version: FORMAT_VERSION,
        seed,
        sequences: seqs
            .iter()
            .map(|s| CorpusEntry {
                id: s.id().to_string(),
                kind: s.kind(),
                frame_count: s.frames.len(),
            })
            .collect(),
    };
    write_json(&dir.join(CORPUS_FILE), &index)
}

pub fn read_corpus_index(dir: &Path) -> Result<CorpusIndex> {
    let index: CorpusIndex = read_json(&dir.join(CORPUS_FILE))?;
    if index.format_version != FORMAT_VERSION {
        return Err(DatasetError::FormatVersionMismatch {
            found: index.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(index)
}

pub fn read_sequences(dir: &Path, ids: &[String]) -> Result<Vec<Sequence>> {
    ids.iter().map(|id| read_sequence(&dir.join(id))).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut s = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    s.push('\n');
    fs::write(path, s).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

/// Sequence-level partition with `round(ratio · n)` training ids.
pub fn split_train_val(ids: &[String], ratio: f64, seed: u64) -> Result<Split> {
    if ids.len() < 2 {
        return Err(DatasetError::TooFewSequences(ids.len()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::InvalidArgument(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    let mut sorted = ids.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != ids.len() {
        return Err(DatasetError::InvalidArgument("duplicate sequence ids".into()));
    }
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, "split")));
    let n_train = (ratio * ids.len() as f64).round() as usize;
    let val = sorted.split_off(n_train);
    let mut train = sorted;
    train.sort();
    let mut val = val;
    val.sort();
    Ok(Split { train, val })
}

/// One line of a pose file: `<frame> <camera> <qw qx qy qz tx ty tz>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame: usize,
    pub camera: CameraId,
    pub pose: Pose,
}

pub fn format_poses(records: &[PoseRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&format!("{} {} {}\n", r.frame, r.camera.as_str(), r.pose));
    }
    s
}

pub fn parse_poses(text: &str) -> Result<Vec<PoseRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tk = Tokens {
            it: line.split_ascii_whitespace(),
            line: i + 1,
        };
        let frame = tk.int("frame")?;
        let cam_tok = tk.next("camera")?;
        let camera: CameraId = cam_tok.parse().map_err(|e: String| tk.corrupt(e))?;
        let pose = Pose::from_array(tk.reals::<7>("pose")?);
        if let Some(extra) = tk.it.next() {
            return Err(tk.corrupt(format!("unexpected trailing token `{extra}`")));
        }
        out.push(PoseRecord { frame, camera, pose });
    }
    Ok(out)
}

pub fn write_poses(path: &Path, records: &[PoseRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, format_poses(records)).map_err(io_err(path))
}

pub fn read_poses(path: &Path) -> Result<Vec<PoseRecord>> {
    parse_poses(&fs::read_to_string(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{generate, ScenarioSpec};

    fn small_sequence() -> Sequence {
        let rig = RigGeometry::default();
        let spec = ScenarioSpec::sample(ScenarioKind::SingleTurn, 3);
        Sequence::from_sim("seq_0000", &generate(&spec, &rig).unwrap(), &rig)
    }

    #[test]
    fn record_line_round_trips() {
        let mut seq = inject_sensor_noise(&small_sequence(), 0.02, 0.0349, 1).unwrap();
        add_agents(&mut seq, 2, 4);
        for (i, f) in seq.frames.iter().enumerate() {
            let line = format_record(f);
            assert_eq!(&parse_record(&line, i + 1).unwrap(), f);
        }
    }

    #[test]
    fn bad_token_reports_line() {
        let seq = small_sequence();
        let line = format_record(&seq.frames[0]).replacen("SingleTurn", "Hovercraft", 1);
        match parse_record(&line, 7) {
            Err(DatasetError::CorruptRecord { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_sigma_reproduces_truth() {
        let seq = inject_sensor_noise(&small_sequence(), 0.0, 0.0, 9).unwrap();
        for f in &seq.frames {
            assert_eq!(f.gnss_tractor.unwrap(), f.ego_pose.translation);
            assert_eq!(f.gnss_trailer.unwrap(), f.trailer_pose.translation);
            assert_eq!(f.heading_tractor.unwrap(), wrap_angle(f.ego_pose.yaw()));
        }
    }

    #[test]
    fn split_sizes() {
        let ids: Vec<String> = (0..10).map(crate::kinematics::sequence_id).collect();
        let s = split_train_val(&ids, 0.8, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (8, 2));
        assert!(matches!(split_train_val(&ids[..1], 0.8, 3), Err(DatasetError::TooFewSequences(1))));
    }
}
