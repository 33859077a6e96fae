use dcap_core::dataset::{inject_sensor_noise, Sequence};
use dcap_core::geom::PoseError;
use dcap_core::kf::KfConfig;
use dcap_core::kinematics::{generate, RigGeometry, ScenarioKind, ScenarioSpec};
use dcap_core::model::{ModelConfig, ABLATIONS};
use dcap_core::report::{
    aggregate, compare_baselines, composition, kf_errors, run_ablation, scale_errors, static_errors, FrameError,
    ReportError, KF_METHOD, SCALE_METHOD, STATIC_METHOD,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sequence(kind: ScenarioKind, seed: u64) -> Sequence {
    let rig = RigGeometry::default();
    Sequence::from_sim(&format!("seq_{seed:04}"), &generate(&ScenarioSpec::sample(kind, seed), &rig).unwrap(), &rig)
}

fn frame(method: &str, seq: &str, k: usize, kind: ScenarioKind, v: [f64; 5]) -> FrameError {
    FrameError {
        method: method.to_string(),
        sequence_id: seq.to_string(),
        frame: k,
        scenario: kind,
        error: PoseError {
            delta_t: v[0],
            delta_x: v[1],
            delta_y: v[2],
            delta_z: v[3],
            rra: v[4],
        },
    }
}

/// Reference rows: ΔT, Δx, Δy, Δz, RRA.
const REFERENCE_ROWS: [(&str, [f64; 5]); 6] = [
    ("Static Calibration", [1.284, 0.210, 1.120, 0.356, 0.148]),
    ("GNSS-IMU (Kalman Filter)", [1.379, 0.309, 1.116, 0.431, 0.129]),
    ("dCAP (w/o CCA, w/o CTA)", [0.632, 0.076, 0.600, 0.087, 0.073]),
    ("dCAP (w/ CCA, w/o CTA)", [0.505, 0.069, 0.475, 0.074, 0.048]),
    ("dCAP (w/o CCA, w/ CTA)", [0.452, 0.125, 0.395, 0.090, 0.058]),
    ("dCAP (w/ CCA, w/ CTA)", [0.452, 0.061, 0.421, 0.085, 0.042]),
];

#[test]
fn reference_rows_render_verbatim() {
    let errors: Vec<FrameError> = REFERENCE_ROWS
        .iter()
        .map(|(m, v)| frame(m, "seq_0000", 0, ScenarioKind::UTurn, *v))
        .collect();
    let report = aggregate(&errors).unwrap();
    let text = report.to_text();
    for (method, values) in REFERENCE_ROWS {
        let line = text
            .lines()
            .find(|l| l.starts_with(method) && l.contains("all"))
            .unwrap_or_else(|| panic!("no row for {method}:\n{text}"));
        for v in values {
            assert!(line.contains(&format!("{v:.3}")), "{method}: {line}");
        }
    }
    // table order follows the reference order for these methods
    let methods = report.methods();
    let expected: Vec<&str> = REFERENCE_ROWS.iter().map(|(m, _)| *m).collect();
    assert_eq!(methods, expected);
    let full = text.lines().find(|l| l.starts_with("dCAP (w/ CCA, w/ CTA)") && l.contains("all")).unwrap();
    assert!(full.contains("0.452*") && full.contains("0.042*") && full.contains("0.061*"));
    assert!(text.lines().next().unwrap().starts_with('#'));
}

#[test]
fn single_frame_means_are_the_frame() {
    let e = frame("m", "s", 0, ScenarioKind::Straight, [0.1, 0.2, 0.3, 0.4, 0.5]);
    let r = aggregate(&[e.clone()]).unwrap();
    assert_eq!(r.row("m", "Straight").unwrap().mean, e.error);
    assert_eq!(r.row("m", "all").unwrap().mean, e.error);
}

#[test]
fn two_frame_mean() {
    let a = frame("m", "s", 0, ScenarioKind::Straight, [1.0, 0.0, 0.0, 0.0, 0.0]);
    let b = frame("m", "s", 1, ScenarioKind::Straight, [2.0, 0.0, 0.0, 0.0, 0.0]);
    let r = aggregate(&[a, b]).unwrap();
    assert_eq!(r.row("m", "Straight").unwrap().mean.delta_t, 1.5);
    assert_eq!(r.row("m", "Straight").unwrap().frames, 2);
}

#[test]
fn empty_groups_have_no_rows() {
    let r = aggregate(&[frame("m", "s", 0, ScenarioKind::Straight, [1.0; 5])]).unwrap();
    assert!(r.row("m", "UTurn").is_none());
    assert!(matches!(aggregate(&[]), Err(ReportError::Empty)));
}

#[test]
fn identical_canned_errors_give_identical_ablation_rows() {
    let labels: Vec<String> = ABLATIONS
        .iter()
        .map(|&(a, b)| ModelConfig::default().with_ablation(a, b).ablation_label())
        .collect();
    let errors: Vec<FrameError> = labels
        .iter()
        .flat_map(|l| (0..5).map(move |k| frame(l, "s", k, ScenarioKind::UTurn, [0.1 * k as f64, 0.2, 0.3, 0.4, 0.05])))
        .collect();
    let r = aggregate(&errors).unwrap();
    let rows: Vec<_> = labels.iter().map(|l| r.row(l, "UTurn").unwrap().mean).collect();
    assert!(rows.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn csv_values_reproduce_the_raw_means() {
    let seqs = vec![sequence(ScenarioKind::UTurn, 1), sequence(ScenarioKind::Straight, 2)];
    let errors = static_errors(&seqs).unwrap();
    let r = aggregate(&errors).unwrap();
    let csv = r.to_csv();
    let line = csv.lines().find(|l| l.contains(",UTurn,")).unwrap();
    let fields: Vec<&str> = line.rsplit(',').collect();
    let dt: f64 = fields[4].parse().unwrap();
    let raw: Vec<f64> = errors.iter().filter(|e| e.scenario == ScenarioKind::UTurn).map(|e| e.error.delta_t).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    assert!((dt - mean).abs() < 1e-12);
    let total: usize = r.rows.iter().filter(|row| row.scenario != "all").map(|row| row.frames).sum();
    assert_eq!(total, errors.len());
}

#[test]
fn static_error_grows_with_articulation() {
    let turning: Vec<Sequence> = (0..3).map(|s| sequence(ScenarioKind::UTurn, 10 + s)).collect();
    let straight: Vec<Sequence> = (0..3).map(|s| sequence(ScenarioKind::Straight, 20 + s)).collect();
    let t = aggregate(&static_errors(&turning).unwrap()).unwrap();
    let s = aggregate(&static_errors(&straight).unwrap()).unwrap();
    assert!(t.row(STATIC_METHOD, "all").unwrap().mean.delta_t > s.row(STATIC_METHOD, "all").unwrap().mean.delta_t);
}

#[test]
fn baselines_compare_in_one_table() {
    let seqs: Vec<Sequence> = [ScenarioKind::UTurn, ScenarioKind::Straight]
        .iter()
        .enumerate()
        .map(|(i, &k)| inject_sensor_noise(&sequence(k, 30 + i as u64), 0.02, 0.0349, 1).unwrap())
        .collect();
    let r = compare_baselines(&[
        (STATIC_METHOD, Some(static_errors(&seqs).unwrap())),
        (KF_METHOD, Some(kf_errors(&seqs, &KfConfig::default()).unwrap())),
        (SCALE_METHOD, Some(scale_errors(&seqs, 0.37, 1e-6).unwrap())),
        ("dCAP (w/ CCA, w/ CTA)", None),
    ])
    .unwrap();
    assert_eq!(r.methods(), vec![STATIC_METHOD, SCALE_METHOD, KF_METHOD]);
    assert_eq!(r.notes.len(), 1);
    assert!(r.to_text().contains("not available"));
    assert!(r.row(SCALE_METHOD, "all").unwrap().mean.delta_t < 1e-9);
    let frames: usize = seqs.iter().map(|s| s.frames.len()).sum();
    assert_eq!(r.row(STATIC_METHOD, "all").unwrap().frames, frames);
    let comp = composition(&seqs);
    assert_eq!(comp.values().map(|c| c.1).sum::<usize>(), frames);
}

#[test]
fn ablation_runner_emits_four_rows_and_is_reproducible() {
    let mut a = sequence(ScenarioKind::UTurn, 40);
    a.frames.truncate(30);
    let mut b = sequence(ScenarioKind::SingleTurn, 41);
    b.frames.truncate(30);
    let cfg = ModelConfig {
        epochs: 1,
        d: 16,
        ..ModelConfig::default()
    };
    let (runs, report) = run_ablation(&[a.clone()], &[b.clone()], &cfg, |_, _, _| {}).unwrap();
    assert_eq!(runs.len(), 4);
    assert_eq!(report.scenario_rows("all").len(), 4);
    let (_, again) = run_ablation(&[a], &[b], &cfg, |_, _, _| {}).unwrap();
    assert_eq!(report.to_csv(), again.to_csv());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn aggregation_ignores_input_order(seed: u64, n in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let errors: Vec<FrameError> = (0..n)
            .map(|k| {
                let kind = ScenarioKind::ALL[rng.gen_range(0..7)];
                let m = ["a", "b"][rng.gen_range(0..2)];
                frame(m, &format!("s{}", k % 5), k, kind, [rng.gen(), rng.gen(), rng.gen(), rng.gen(), rng.gen()])
            })
            .collect();
        let mut shuffled = errors.clone();
        shuffled.shuffle(&mut rng);
        prop_assert_eq!(aggregate(&errors).unwrap(), aggregate(&shuffled).unwrap());
    }
}
