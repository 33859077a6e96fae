use std::collections::BTreeMap;

use dcap_core::dataset::Sequence;
use dcap_core::geom::{pose_error, Pose, Quaternion, Vec3};
use dcap_core::kinematics::{generate, CameraId, RigGeometry, ScenarioKind, ScenarioSpec};
use dcap_core::scale::{
    estimate_scale, recover_metric_trailer_poses, recover_sequence, similarity_prediction, ScaleError, ScaledPrediction,
    DEFAULT_THRESHOLD,
};
use proptest::prelude::*;

fn sequence(kind: ScenarioKind, seed: u64) -> Sequence {
    let rig = RigGeometry::default();
    Sequence::from_sim(&format!("seq_{seed:04}"), &generate(&ScenarioSpec::sample(kind, seed), &rig).unwrap(), &rig)
}

fn residual(t_star: &Vec3, t_hat: &Vec3, s: f64) -> f64 {
    (t_star - t_hat * s).norm_squared()
}

#[test]
fn least_squares_scale_is_the_minimizer() {
    let t_star = Vec3::new(1.0, 1.0, 0.0);
    let t_hat = Vec3::new(0.0, 2.0, 0.0);
    let s = estimate_scale(&t_star, &t_hat, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(s, 0.5);
    assert!((residual(&t_star, &t_hat, s) - 1.0).abs() < 1e-15);
    for k in 1..=100 {
        let d = k as f64 * 1e-4;
        assert!(residual(&t_star, &t_hat, s) <= residual(&t_star, &t_hat, s + d));
        assert!(residual(&t_star, &t_hat, s) <= residual(&t_star, &t_hat, s - d));
    }
}

#[test]
fn similarity_scaled_truth_is_recovered() {
    let seq = sequence(ScenarioKind::Roundabout, 1);
    let preds: Vec<ScaledPrediction> =
        seq.frames.iter().enumerate().map(|(k, f)| similarity_prediction(k, f, 0.37)).collect();
    let results = recover_sequence(&seq, &preds, DEFAULT_THRESHOLD).unwrap();
    for (r, f) in results.iter().zip(&seq.frames) {
        assert!(!r.discarded);
        assert!((r.s - 1.0 / 0.37).abs() < 1e-12);
        for cam in CameraId::TRAILER {
            let e = pose_error(&r.metric_poses[&cam], f.extrinsic(cam));
            assert!(e.delta_t < 1e-9 && e.rra < 1e-9, "{cam}: {e:?}");
        }
    }
}

#[test]
fn unscaled_truth_gives_unit_scale() {
    let seq = sequence(ScenarioKind::UTurn, 2);
    let f = &seq.frames[40];
    let r = recover_metric_trailer_poses(&similarity_prediction(40, f, 1.0), f.extrinsic(CameraId::Front), f.extrinsic(CameraId::Rear), seq.rig(), DEFAULT_THRESHOLD).unwrap();
    assert!((r.s - 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_baseline_is_discarded() {
    let seq = sequence(ScenarioKind::Straight, 3);
    let f = &seq.frames[0];
    let front = Pose::planar(0.0, 0.0, 0.0, 0.0);
    let mut poses = BTreeMap::new();
    poses.insert(CameraId::Front, front);
    poses.insert(CameraId::Rear, Pose::new(Quaternion::from_yaw(3.0), Vec3::new(3.0e-5, 0.0, 0.0)));
    let pred = ScaledPrediction { frame: 0, poses };
    let r = recover_metric_trailer_poses(&pred, f.extrinsic(CameraId::Front), f.extrinsic(CameraId::Rear), seq.rig(), DEFAULT_THRESHOLD).unwrap();
    assert!(r.discarded && r.metric_poses.is_empty() && r.s.is_nan());
    assert!(matches!(
        estimate_scale(&Vec3::x(), &Vec3::new(1e-5, 0.0, 0.0), DEFAULT_THRESHOLD),
        Err(ScaleError::DegenerateBaseline { .. })
    ));
}

#[test]
fn missing_rear_camera_is_an_error() {
    let seq = sequence(ScenarioKind::Straight, 4);
    let f = &seq.frames[0];
    let mut pred = similarity_prediction(0, f, 0.5);
    pred.poses.remove(&CameraId::Rear);
    assert!(matches!(
        recover_metric_trailer_poses(&pred, f.extrinsic(CameraId::Front), f.extrinsic(CameraId::Rear), seq.rig(), DEFAULT_THRESHOLD),
        Err(ScaleError::MissingCamera { camera: CameraId::Rear, .. })
    ));
}

#[test]
fn siblings_come_from_the_rig_when_absent() {
    let seq = sequence(ScenarioKind::SingleTurn, 5);
    let f = &seq.frames[60];
    let mut pred = similarity_prediction(60, f, 2.0);
    pred.poses.remove(&CameraId::RearLeft);
    let r = recover_metric_trailer_poses(&pred, f.extrinsic(CameraId::Front), f.extrinsic(CameraId::Rear), seq.rig(), DEFAULT_THRESHOLD).unwrap();
    let e = pose_error(&r.metric_poses[&CameraId::RearLeft], f.extrinsic(CameraId::RearLeft));
    assert!(e.delta_t < 1e-9 && e.rra < 1e-9);
}

fn scaled(pred: &ScaledPrediction, k: f64) -> ScaledPrediction {
    let poses = pred
        .poses
        .iter()
        .map(|(c, p)| (*c, Pose::new(p.rotation, p.translation * k)))
        .collect();
    ScaledPrediction { frame: pred.frame, poses }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scale_equivariance(k in 0.05..20.0f64, frame in 0usize..150, noise in 0.0..0.5f64) {
        let seq = sequence(ScenarioKind::TurnSequence, 6);
        let f = &seq.frames[frame];
        let mut pred = similarity_prediction(frame, f, 0.6);
        // break exactness so the test is not only about the oracle
        for p in pred.poses.values_mut() {
            p.translation.z += noise;
        }
        let go = |p: &ScaledPrediction| recover_metric_trailer_poses(p, f.extrinsic(CameraId::Front), f.extrinsic(CameraId::Rear), seq.rig(), DEFAULT_THRESHOLD).unwrap();
        let a = go(&pred);
        let b = go(&scaled(&pred, k));
        prop_assert!((b.s * k - a.s).abs() < 1e-9 * a.s.abs().max(1.0));
        for cam in CameraId::TRAILER {
            let e = pose_error(&a.metric_poses[&cam], &b.metric_poses[&cam]);
            prop_assert!(e.delta_t < 1e-9 && e.rra < 1e-9);
        }
    }

    #[test]
    fn rotations_pass_through(dx in -3.0..3.0f64, dy in -3.0..3.0f64, frame in 0usize..150) {
        let seq = sequence(ScenarioKind::TurnSequence, 7);
        let f = &seq.frames[frame];
        let pred = similarity_prediction(frame, f, 0.9);
        let mut moved = pred.clone();
        moved.poses.get_mut(&CameraId::RearRight).unwrap().translation += Vec3::new(dx, dy, 0.0);
        let go = |p: &ScaledPrediction| recover_metric_trailer_poses(p, f.extrinsic(CameraId::Front), f.extrinsic(CameraId::Rear), seq.rig(), DEFAULT_THRESHOLD).unwrap();
        let (a, b) = (go(&pred), go(&moved));
        for cam in CameraId::TRAILER {
            prop_assert_eq!(a.metric_poses[&cam].rotation, b.metric_poses[&cam].rotation);
        }
    }

    #[test]
    fn frames_are_independent(frame in 1usize..100) {
        let seq = sequence(ScenarioKind::LongCurve, 8);
        let preds: Vec<ScaledPrediction> = seq.frames.iter().enumerate().map(|(k, f)| similarity_prediction(k, f, 0.37)).collect();
        let all = recover_sequence(&seq, &preds, DEFAULT_THRESHOLD).unwrap();
        let one = recover_sequence(&seq, &preds[frame..=frame], DEFAULT_THRESHOLD).unwrap();
        prop_assert_eq!(&all[frame], &one[0]);
    }
}
