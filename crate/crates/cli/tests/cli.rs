use std::path::Path;
use std::process::{Command, Output};

use dcap_core::dataset::{read_poses, read_sequence, write_poses, PoseRecord};
use dcap_core::geom::pose_error;
use dcap_core::kinematics::CameraId;
use dcap_core::scale::similarity_prediction;

fn dcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcap")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = dcap(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, n: &str, seed: &str) {
    ok(&["gen", "--n", n, "--seed", seed, "--out", s(dir)]);
}

#[test]
fn every_run_echoes_its_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["gen", "--n", "2", "--seed", "4", "--mix", "UTurn=1", "--out", s(&tmp.path().join("c"))]);
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(first["command"], "gen");
    assert_eq!(first["config"]["seed"], 4);
    assert_eq!(first["config"]["mix"], "UTurn=1");
    assert!(out.contains("UTurn"));
}

#[test]
fn usage_and_data_errors_have_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(dcap(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dcap(&["gen", "--n", "2", "--mix", "Nope=1", "--out", s(tmp.path())]).status.code(), Some(1));
    assert_eq!(dcap(&["--help"]).status.code(), Some(0));
    let missing = tmp.path().join("missing");
    assert_eq!(dcap(&["kf", "--seq", s(&missing), "--out", s(&tmp.path().join("p"))]).status.code(), Some(2));
}

#[test]
fn kf_writes_one_rear_pose_per_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("c");
    ok(&["gen", "--n", "1", "--seed", "1", "--sigma-pos", "0", "--sigma-heading", "0", "--out", s(&c)]);
    let out = ok(&["kf", "--seq", s(&c.join("seq_0000")), "--out", s(&tmp.path().join("kf.poses"))]);
    assert!(out.contains("frames"));
    let poses = read_poses(&tmp.path().join("kf.poses")).unwrap();
    let seq = read_sequence(&c.join("seq_0000")).unwrap();
    assert_eq!(poses.len(), seq.frames.len());
    assert!(poses.iter().all(|r| r.camera == CameraId::Rear));
}

#[test]
fn scale_recover_restores_metric_poses() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("c");
    gen(&c, "1", "2");
    let seq_dir = c.join("seq_0000");
    let seq = read_sequence(&seq_dir).unwrap();
    let records: Vec<PoseRecord> = seq
        .frames
        .iter()
        .enumerate()
        .flat_map(|(k, f)| {
            similarity_prediction(k, f, 0.37)
                .poses
                .into_iter()
                .map(move |(camera, pose)| PoseRecord { frame: k, camera, pose })
        })
        .collect();
    let pred = tmp.path().join("pred.poses");
    write_poses(&pred, &records).unwrap();
    let metric = tmp.path().join("metric.poses");
    let out = ok(&["scale-recover", "--pred", s(&pred), "--seq", s(&seq_dir), "--out", s(&metric)]);
    assert!(out.contains("0 discarded"), "{out}");
    let back = read_poses(&metric).unwrap();
    assert_eq!(back.len(), seq.frames.len() * CameraId::TRAILER.len());
    for r in back {
        let e = pose_error(&r.pose, seq.frames[r.frame].extrinsic(r.camera));
        assert!(e.delta_t < 1e-9 && e.rra < 1e-9);
    }
}

#[test]
fn train_eval_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name);
    gen(&p("c"), "5", "3");
    ok(&["split", "--corpus", s(&p("c")), "--seed", "1", "--out", s(&p("split.json"))]);
    let cfg = serde_json::json!({
        "d": 16, "heads": 2, "n_blocks": 1, "refine_steps": 2, "queue_len": 3, "w_trans": 1.0, "w_rot": 1.0,
        "lr": 1e-3, "batch": 4, "epochs": 1, "window": 3, "n_landmarks": 16, "landmark_radius": [150.0, 250.0],
        "encoder_noise": 0.001, "encoder_gain": 1.0, "use_cca": true, "use_cta": true, "seed": 0
    });
    std::fs::write(p("model.json"), cfg.to_string()).unwrap();
    let corpus = s(&p("c")).to_string();
    let split = s(&p("split.json")).to_string();
    ok(&["train", "--corpus", &corpus, "--split", &split, "--config", s(&p("model.json")), "--seed", "2", "--out", s(&p("m.ckpt"))]);
    for (method, out) in [("dcap", "d.json"), ("static", "s.json"), ("kf", "k.json"), ("scale", "r.json")] {
        ok(&["eval", "--corpus", &corpus, "--split", &split, "--method", method, "--ckpt", s(&p("m.ckpt")), "--out", s(&p(out))]);
    }
    let text = ok(&[
        "report", "--in", s(&p("d.json")), s(&p("s.json")), s(&p("k.json")), s(&p("r.json")), "--out", s(&p("rep")),
    ]);
    assert!(text.contains("Static Calibration") && text.contains("dCAP (w/ CCA, w/ CTA)"));
    let csv = std::fs::read_to_string(p("rep").join("metrics.csv")).unwrap();
    assert!(csv.starts_with("method,scenario,frames,delta_t"));
    assert_eq!(csv.lines().filter(|l| l.contains(",all,")).count(), 4);
    assert!(p("rep").join("metrics.txt").exists() && p("rep").join("frame_errors.csv").exists());
}

#[test]
fn dcap_eval_without_checkpoint_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    gen(&tmp.path().join("c"), "2", "1");
    let out = dcap(&["eval", "--corpus", s(&tmp.path().join("c")), "--method", "dcap", "--out", s(&tmp.path().join("e.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn grad_check_passes_on_defaults() {
    let out = ok(&["grad-check", "--coords", "50", "--seed", "3"]);
    assert_eq!(out.lines().filter(|l| l.contains("max rel error")).count(), 4);
    assert!(out.trim_end().ends_with("ok"));
    assert_eq!(dcap(&["grad-check", "--coords", "20", "--tolerance", "0"]).status.code(), Some(2));
}
