use std::fs;

use dcap_core::dataset::{
    add_agents, format_poses, inject_sensor_noise, parse_poses, read_corpus_index, read_sequence, read_sequences,
    split_train_val, write_corpus, write_sequence, DatasetError, PoseRecord, Sequence, FRAMES_FILE, MANIFEST_FILE,
};
use dcap_core::geom::Pose;
use dcap_core::kinematics::{generate, generate_corpus, CameraId, Mix, RigGeometry, ScenarioKind, ScenarioSpec};
use proptest::prelude::*;

fn sequence(kind: ScenarioKind, seed: u64) -> Sequence {
    let rig = RigGeometry::default();
    Sequence::from_sim(&format!("seq_{seed:04}"), &generate(&ScenarioSpec::sample(kind, seed), &rig).unwrap(), &rig)
}

fn noisy(kind: ScenarioKind, seed: u64) -> Sequence {
    let mut s = inject_sensor_noise(&sequence(kind, seed), 0.02, 0.0349, 9).unwrap();
    add_agents(&mut s, 3, 9);
    s
}

#[test]
fn write_read_write_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let seq = noisy(ScenarioKind::Roundabout, 1);
    write_sequence(&seq, &dir.path().join("a")).unwrap();
    let back = read_sequence(&dir.path().join("a")).unwrap();
    assert_eq!(back, seq);
    write_sequence(&back, &dir.path().join("b")).unwrap();
    for file in [MANIFEST_FILE, FRAMES_FILE] {
        assert_eq!(
            fs::read(dir.path().join("a").join(file)).unwrap(),
            fs::read(dir.path().join("b").join(file)).unwrap()
        );
    }
}

#[test]
fn sequences_without_sensors_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let seq = sequence(ScenarioKind::Straight, 2);
    write_sequence(&seq, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join(FRAMES_FILE)).unwrap();
    assert!(text.lines().next().unwrap().contains(" - - - - "));
    assert_eq!(read_sequence(dir.path()).unwrap(), seq);
}

#[test]
fn empty_sequence_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut seq = sequence(ScenarioKind::Straight, 3);
    seq.frames.clear();
    write_sequence(&seq, dir.path()).unwrap();
    let back = read_sequence(dir.path()).unwrap();
    assert!(back.frames.is_empty());
    assert_eq!(back.manifest.frame_count, 0);
}

#[test]
fn truncated_file_reports_the_missing_line() {
    let dir = tempfile::tempdir().unwrap();
    let seq = sequence(ScenarioKind::UTurn, 4);
    write_sequence(&seq, dir.path()).unwrap();
    let path = dir.path().join(FRAMES_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().take(10).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();
    match read_sequence(dir.path()) {
        Err(DatasetError::CorruptRecord { line, .. }) => assert_eq!(line, 11),
        other => panic!("unexpected {other:?}"),
    }

    // a half-written final line
    let cut = &text[..text.find('\n').unwrap() + 40];
    fs::write(&path, cut).unwrap();
    match read_sequence(dir.path()) {
        Err(DatasetError::CorruptRecord { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_format_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let seq = sequence(ScenarioKind::Straight, 5);
    write_sequence(&seq, dir.path()).unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 99");
    fs::write(&path, text).unwrap();
    assert!(matches!(
        read_sequence(dir.path()),
        Err(DatasetError::FormatVersionMismatch { found: 99, expected: 1 })
    ));
}

#[test]
fn sensor_noise_has_the_requested_spread() {
    let seq = sequence(ScenarioKind::Straight, 6);
    let mut residuals = Vec::new();
    let mut seed = 0;
    while residuals.len() < 10_000 {
        let n = inject_sensor_noise(&seq, 0.02, 0.0349, seed).unwrap();
        for f in &n.frames {
            residuals.push(f.gnss_tractor.unwrap().x - f.ego_pose.translation.x);
        }
        seed += 1;
    }
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (residuals.len() - 1) as f64;
    let std = var.sqrt();
    assert!((0.019..=0.021).contains(&std), "{std}");
}

#[test]
fn noise_leaves_ground_truth_alone_and_commutes_with_storage() {
    let dir = tempfile::tempdir().unwrap();
    let clean = sequence(ScenarioKind::SingleTurn, 7);
    let direct = inject_sensor_noise(&clean, 0.02, 0.0349, 3).unwrap();
    for (a, b) in direct.frames.iter().zip(&clean.frames) {
        assert_eq!(a.gt_extrinsics, b.gt_extrinsics);
        assert_eq!(a.ego_pose, b.ego_pose);
    }
    write_sequence(&clean, dir.path()).unwrap();
    let via_disk = inject_sensor_noise(&read_sequence(dir.path()).unwrap(), 0.02, 0.0349, 3).unwrap();
    assert_eq!(via_disk, direct);
}

#[test]
fn corpus_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rig = RigGeometry::default();
    let seqs: Vec<Sequence> = generate_corpus(5, &Mix::reference(), 11, &rig)
        .unwrap()
        .iter()
        .map(|(id, sim)| Sequence::from_sim(id, sim, &rig))
        .collect();
    write_corpus(&seqs, 11, dir.path()).unwrap();
    let index = read_corpus_index(dir.path()).unwrap();
    let ids: Vec<String> = index.sequences.iter().map(|e| e.id.clone()).collect();
    assert_eq!(read_sequences(dir.path(), &ids).unwrap(), seqs);
}

#[test]
fn eight_two_split_on_ten() {
    let ids: Vec<String> = (0..10).map(|i| format!("seq_{i:04}")).collect();
    let split = split_train_val(&ids, 0.8, 5).unwrap();
    assert_eq!((split.train.len(), split.val.len()), (8, 2));
    let mut all: Vec<String> = split.train.iter().chain(&split.val).cloned().collect();
    all.sort();
    assert_eq!(all, ids);
    assert_eq!(split_train_val(&ids, 0.8, 5).unwrap(), split);
    assert!(split_train_val(&ids[..1], 0.8, 5).is_err());
}

#[test]
fn pose_file_round_trips() {
    let records: Vec<PoseRecord> = (0..4)
        .map(|k| PoseRecord {
            frame: k,
            camera: CameraId::ALL[k],
            pose: Pose::planar(k as f64 * 0.1, -1.0 / 3.0, 2.0, 0.7 * k as f64),
        })
        .collect();
    let text = format_poses(&records);
    assert_eq!(parse_poses(&text).unwrap(), records);
    assert!(parse_poses("0 rear 1 0 0").is_err());
    assert!(parse_poses("0 roof 1 0 0 0 0 0 0").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn split_is_a_partition(n in 2usize..60, ratio in 0.1..0.9f64, seed: u64) {
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let split = split_train_val(&ids, ratio, seed).unwrap();
        prop_assert_eq!(split.train.len(), (ratio * n as f64).round() as usize);
        prop_assert_eq!(split.train.len() + split.val.len(), n);
        prop_assert!(split.train.iter().all(|t| !split.val.contains(t)));
    }

    #[test]
    fn record_lines_round_trip(kind_idx in 0usize..7, seed in 0u64..1000) {
        let seq = noisy(ScenarioKind::ALL[kind_idx], seed);
        for (i, f) in seq.frames.iter().enumerate().step_by(17) {
            let line = dcap_core::dataset::format_record(f);
            prop_assert_eq!(&dcap_core::dataset::parse_record(&line, i + 1).unwrap(), f);
        }
    }
}
