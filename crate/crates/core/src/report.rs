//! Per-frame pose errors of every method, their per-scenario means and the
//! table renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sequence;
use crate::geom::{pose_error, Pose, PoseError};
use crate::kf::{run_kf, KfConfig, KfError};
use crate::kinematics::{CameraId, ScenarioKind};
use crate::scale::{recover_sequence, similarity_prediction, ScaleError};
use crate::model::{rear_in_tractor, Model, ModelConfig, ModelError, TrainReport, ABLATIONS};

pub const STATIC_METHOD: &str = "Static Calibration";
pub const KF_METHOD: &str = "GNSS-IMU (Kalman Filter)";
pub const SCALE_METHOD: &str = "Scale Recovery (oracle-assisted)";
pub const ALL_SCENARIOS: &str = "all";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no per-frame errors to aggregate")]
    Empty,
    #[error("{method}: expected {expected} poses for {sequence}, got {found}")]
    LengthMismatch {
        method: String,
        sequence: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kf(#[from] KfError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    pub method: String,
    pub sequence_id: String,
    pub frame: usize,
    pub scenario: ScenarioKind,
    pub error: PoseError,
}

/// Errors of rear-camera predictions expressed in the tractor frame.
pub fn errors_in_tractor_frame(method: &str, seq: &Sequence, preds: &[Pose]) -> Result<Vec<FrameError>, ReportError> {
    if preds.len() != seq.frames.len() {
        return Err(ReportError::LengthMismatch {
            method: method.to_string(),
            sequence: seq.id().to_string(),
            expected: seq.frames.len(),
            found: preds.len(),
        });
    }
    Ok(seq
        .frames
        .iter()
        .zip(preds)
        .enumerate()
        .map(|(k, (f, p))| FrameError {
            method: method.to_string(),
            sequence_id: seq.id().to_string(),
            frame: k,
            scenario: seq.kind(),
            error: pose_error(p, &rear_in_tractor(f)),
        })
        .collect())
}

/// Rear-camera world poses mapped into the ground-truth tractor frame.
pub fn world_to_tractor(seq: &Sequence, world: &[Pose]) -> Vec<Pose> {
    seq.frames
        .iter()
        .zip(world)
        .map(|(f, p)| f.ego_pose.inverse().compose(p))
        .collect()
}

/// The static calibration: the aligned-rig rear pose for every frame.
pub fn static_errors(seqs: &[Sequence]) -> Result<Vec<FrameError>, ReportError> {
    let mut out = Vec::new();
    for seq in seqs {
        let nominal = seq.rig().nominal_extrinsic(CameraId::Rear);
        out.extend(errors_in_tractor_frame(STATIC_METHOD, seq, &vec![nominal; seq.frames.len()])?);
    }
    Ok(out)
}

pub fn kf_errors(seqs: &[Sequence], cfg: &KfConfig) -> Result<Vec<FrameError>, ReportError> {
    let mut out = Vec::new();
    for seq in seqs {
        let world = run_kf(seq, cfg)?;
        out.extend(errors_in_tractor_frame(KF_METHOD, seq, &world_to_tractor(seq, &world))?);
    }
    Ok(out)
}

pub fn model_errors(model: &Model, seqs: &[Sequence], method: &str) -> Result<Vec<FrameError>, ReportError> {
    let mut out = Vec::new();
    for seq in seqs {
        let tokens = model.encode(seq);
        let preds: Vec<Pose> = model.predict_sequence(seq, &tokens)?.into_iter().map(|e| e.pose).collect();
        out.extend(errors_in_tractor_frame(method, seq, &preds)?);
    }
    Ok(out)
}

/// Oracle-assisted scale recovery of predictions that are the ground truth up
/// to a global scale `factor`. Discarded frames contribute no errors.
pub fn scale_errors(seqs: &[Sequence], factor: f64, threshold: f64) -> Result<Vec<FrameError>, ReportError> {
    let mut out = Vec::new();
    for seq in seqs {
        let preds: Vec<_> = seq
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| similarity_prediction(k, f, factor))
            .collect();
        for r in recover_sequence(seq, &preds, threshold)? {
            if r.discarded {
                continue;
            }
            let f = &seq.frames[r.frame];
            let pred = f.ego_pose.inverse().compose(&r.metric_poses[&CameraId::Rear]);
            out.push(FrameError {
                method: SCALE_METHOD.to_string(),
                sequence_id: seq.id().to_string(),
                frame: r.frame,
                scenario: seq.kind(),
                error: pose_error(&pred, &rear_in_tractor(f)),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub scenario: String,
    pub frames: usize,
    pub mean: PoseError,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub notes: Vec<String>,
}

/// Table position of a method; unknown methods sort after known ones.
fn method_rank(method: &str) -> usize {
    let mut known = vec![STATIC_METHOD.to_string(), SCALE_METHOD.to_string(), KF_METHOD.to_string()];
    known.extend(
        ABLATIONS
            .iter()
            .map(|&(cca, cta)| ModelConfig::default().with_ablation(cca, cta).ablation_label()),
    );
    known.iter().position(|m| m == method).unwrap_or(known.len())
}

fn mean_of(errors: &mut [&FrameError]) -> PoseError {
    // fixed summation order makes the means independent of input order
    errors.sort_by(|a, b| (&a.sequence_id, a.frame).cmp(&(&b.sequence_id, b.frame)));
    let n = errors.len() as f64;
    let mut m = PoseError::default();
    for e in errors.iter() {
        m.delta_t += e.error.delta_t;
        m.delta_x += e.error.delta_x;
        m.delta_y += e.error.delta_y;
        m.delta_z += e.error.delta_z;
        m.rra += e.error.rra;
    }
    PoseError {
        delta_t: m.delta_t / n,
        delta_x: m.delta_x / n,
        delta_y: m.delta_y / n,
        delta_z: m.delta_z / n,
        rra: m.rra / n,
    }
}

/// Per-method, per-scenario arithmetic means plus an `all` row per method.
/// Scenarios without frames have no row.
pub fn aggregate(errors: &[FrameError]) -> Result<MetricsReport, ReportError> {
    if errors.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut groups: BTreeMap<(usize, String, Option<ScenarioKind>), Vec<&FrameError>> = BTreeMap::new();
    for e in errors {
        let key = (method_rank(&e.method), e.method.clone());
        groups.entry((key.0, key.1.clone(), Some(e.scenario))).or_default().push(e);
        groups.entry((key.0, key.1, None)).or_default().push(e);
    }
    let rows = groups
        .into_iter()
        .map(|((_, method, scenario), mut group)| MetricsRow {
            method,
            scenario: scenario.map_or_else(|| ALL_SCENARIOS.to_string(), |s| s.to_string()),
            frames: group.len(),
            mean: mean_of(&mut group),
        })
        .collect();
    Ok(MetricsReport { rows, notes: Vec::new() })
}

impl MetricsReport {
    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    pub fn row(&self, method: &str, scenario: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method && r.scenario == scenario)
    }

    /// Rows only of the given scenario, in method order.
    pub fn scenario_rows(&self, scenario: &str) -> Vec<&MetricsRow> {
        self.rows.iter().filter(|r| r.scenario == scenario).collect()
    }

    /// Machine-readable table; values keep full precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,scenario,frames,delta_t,delta_x,delta_y,delta_z,rra\n");
        for r in &self.rows {
            let m = &r.mean;
            let _ = writeln!(
                s,
                "\"{}\",{},{},{:?},{:?},{:?},{:?},{:?}",
                r.method, r.scenario, r.frames, m.delta_t, m.delta_x, m.delta_y, m.delta_z, m.rra
            );
        }
        s
    }

    /// Aligned text table with three decimals; `*` marks the best value of
    /// each column among rows of the same scenario.
    pub fn to_text(&self) -> String {
        let metric = |m: &PoseError, c: usize| [m.delta_t, m.delta_x, m.delta_y, m.delta_z, m.rra][c];
        let mut best: BTreeMap<(&str, usize), f64> = BTreeMap::new();
        for r in &self.rows {
            for c in 0..5 {
                let v = metric(&r.mean, c);
                best.entry((&r.scenario, c)).and_modify(|b| *b = b.min(v)).or_insert(v);
            }
        }
        let header = ["Method", "Scenario", "Frames", "ΔT", "Δx", "Δy", "Δz", "RRA"];
        let mut table: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
        for r in &self.rows {
            let mut line = vec![r.method.clone(), r.scenario.clone(), r.frames.to_string()];
            let several = self.scenario_rows(&r.scenario).len() > 1;
            for c in 0..5 {
                let v = metric(&r.mean, c);
                let mark = if several && v == best[&(r.scenario.as_str(), c)] { "*" } else { "" };
                line.push(format!("{v:.3}{mark}"));
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| table.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::from("# means over frames; translations in m, RRA in rad; * = best per scenario\n");
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        for line in &table {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    let pad = widths[c] - cell.chars().count();
                    if c < 2 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(s, "{}", cells.join("  ").trim_end());
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub label: String,
    pub config: ModelConfig,
    pub training: TrainReport,
    pub model: Model,
    pub errors: Vec<FrameError>,
}

/// Trains and evaluates the four CCA × CTA configurations with one seed.
pub fn run_ablation(
    train: &[Sequence],
    val: &[Sequence],
    base: &ModelConfig,
    mut on_epoch: impl FnMut(&str, usize, f64),
) -> Result<(Vec<AblationRun>, MetricsReport), ReportError> {
    let mut runs = Vec::with_capacity(ABLATIONS.len());
    for (cca, cta) in ABLATIONS {
        let config = base.with_ablation(cca, cta);
        let label = config.ablation_label();
        let mut model = Model::new(&config)?;
        let training = model.train(train, |e, l| on_epoch(&label, e, l))?;
        let errors = model_errors(&model, val, &label)?;
        runs.push(AblationRun {
            label,
            config,
            training,
            model,
            errors,
        });
    }
    let all: Vec<FrameError> = runs.iter().flat_map(|r| r.errors.iter().cloned()).collect();
    let report = aggregate(&all)?;
    Ok((runs, report))
}

/// One report over every method whose errors are available; absent methods
/// are listed in the notes.
pub fn compare_baselines(methods: &[(&str, Option<Vec<FrameError>>)]) -> Result<MetricsReport, ReportError> {
    let mut all = Vec::new();
    let mut notes = Vec::new();
    for (name, errors) in methods {
        match errors {
            Some(e) if !e.is_empty() => all.extend(e.iter().cloned()),
            _ => notes.push(format!("{name}: not available, rows omitted")),
        }
    }
    let mut report = aggregate(&all)?;
    report.notes = notes;
    Ok(report)
}

/// Frames per scenario of a corpus, for the composition echo.
pub fn composition(seqs: &[Sequence]) -> BTreeMap<ScenarioKind, (usize, usize)> {
    let mut out: BTreeMap<ScenarioKind, (usize, usize)> = BTreeMap::new();
    for s in seqs {
        let e = out.entry(s.kind()).or_default();
        e.0 += 1;
        e.1 += s.frames.len();
    }
    out
}
