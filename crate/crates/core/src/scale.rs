//! Metric-scale recovery for predictors that only know poses up to a global
//! similarity scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FrameRecord, PoseRecord, Sequence};
use crate::geom::{propagate_rig, relative_transform, Pose, Vec3};
use crate::kinematics::{CameraId, RigGeometry};

pub const DEFAULT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("predicted baseline is degenerate: |t̂|² = {norm_sq:e} < {threshold:e}")]
    DegenerateBaseline { norm_sq: f64, threshold: f64 },
    #[error("prediction for frame {frame} lacks camera {camera}")]
    MissingCamera { frame: usize, camera: CameraId },
    #[error("non-finite input")]
    NonFinite,
    #[error("prediction for frame {frame} but the sequence has {frames} frames")]
    UnknownFrame { frame: usize, frames: usize },
}

/// Scale-ambiguous camera poses of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPrediction {
    pub frame: usize,
    pub poses: BTreeMap<CameraId, Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub frame: usize,
    pub s: f64,
    pub discarded: bool,
    /// World poses of the trailer cameras; empty when discarded.
    pub metric_poses: BTreeMap<CameraId, Pose>,
}

/// Least-squares scale `s = t⋆·t̂ / t̂·t̂` minimizing `‖t⋆ − s t̂‖²`.
pub fn estimate_scale(t_star: &Vec3, t_hat: &Vec3, threshold: f64) -> Result<f64, ScaleError> {
    if !(t_star.iter().chain(t_hat.iter()).all(|v| v.is_finite())) {
        return Err(ScaleError::NonFinite);
    }
    let norm_sq = t_hat.dot(t_hat);
    if norm_sq < threshold {
        return Err(ScaleError::DegenerateBaseline { norm_sq, threshold });
    }
    Ok(t_star.dot(t_hat) / norm_sq)
}

/// Rescales the predicted front→trailer relative poses with the scale fitted
/// on the front→rear baseline and maps them into the world through the
/// ground-truth front pose. Trailer cameras absent from `pred` are derived
/// from the recovered rear pose through the rig.
pub fn recover_metric_trailer_poses(
    pred: &ScaledPrediction,
    gt_front: &Pose,
    gt_rear: &Pose,
    rig: &RigGeometry,
    threshold: f64,
) -> Result<ScaleResult, ScaleError> {
    let get = |camera| {
        pred.poses.get(&camera).ok_or(ScaleError::MissingCamera {
            frame: pred.frame,
            camera,
        })
    };
    let front = get(CameraId::Front)?;
    let rear = get(CameraId::Rear)?;
    let t_star = relative_transform(gt_front, gt_rear).translation;
    let t_hat = relative_transform(front, rear).translation;
    let s = match estimate_scale(&t_star, &t_hat, threshold) {
        Ok(s) => s,
        Err(ScaleError::DegenerateBaseline { .. }) => {
            return Ok(ScaleResult {
                frame: pred.frame,
                s: f64::NAN,
                discarded: true,
                metric_poses: BTreeMap::new(),
            })
        }
        Err(e) => return Err(e),
    };
    let mut metric_poses = BTreeMap::new();
    for cam in CameraId::TRAILER {
        let Some(pose_j) = pred.poses.get(&cam) else {
            continue;
        };
        let rel = relative_transform(front, pose_j);
        let scaled = Pose {
            rotation: rel.rotation,
            translation: rel.translation * s,
        };
        metric_poses.insert(cam, gt_front.compose(&scaled.inverse()));
    }
    let metric_rear = metric_poses[&CameraId::Rear];
    for cam in [CameraId::RearLeft, CameraId::RearRight] {
        metric_poses
            .entry(cam)
            .or_insert_with(|| propagate_rig(&metric_rear, &rig.intra_trailer(cam)));
    }
    Ok(ScaleResult {
        frame: pred.frame,
        s,
        discarded: false,
        metric_poses,
    })
}

/// Ground-truth world poses of every camera with all translations multiplied
/// by `factor`: an exact similarity transform of the truth.
pub fn similarity_prediction(frame: usize, record: &FrameRecord, factor: f64) -> ScaledPrediction {
    let poses = record
        .gt_extrinsics
        .iter()
        .map(|(&cam, p)| {
            (
                cam,
                Pose {
                    rotation: p.rotation,
                    translation: p.translation * factor,
                },
            )
        })
        .collect();
    ScaledPrediction { frame, poses }
}

/// Groups pose-file records by frame.
pub fn predictions_from_records(records: &[PoseRecord]) -> Vec<ScaledPrediction> {
    let mut by_frame: BTreeMap<usize, BTreeMap<CameraId, Pose>> = BTreeMap::new();
    for r in records {
        by_frame.entry(r.frame).or_default().insert(r.camera, r.pose);
    }
    by_frame
        .into_iter()
        .map(|(frame, poses)| ScaledPrediction { frame, poses })
        .collect()
}

/// Recovers every prediction against the ground truth of `seq`.
pub fn recover_sequence(seq: &Sequence, preds: &[ScaledPrediction], threshold: f64) -> Result<Vec<ScaleResult>, ScaleError> {
    preds
        .iter()
        .map(|p| {
            let f = seq.frames.get(p.frame).ok_or(ScaleError::UnknownFrame {
                frame: p.frame,
                frames: seq.frames.len(),
            })?;
            recover_metric_trailer_poses(p, f.extrinsic(CameraId::Front), f.extrinsic(CameraId::Rear), seq.rig(), threshold)
        })
        .collect()
}
