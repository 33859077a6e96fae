//! `dcap`: corpus generation, baselines, training, evaluation and reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error
//! (including a failed gradient check).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dcap_core::dataset::{
    self, inject_sensor_noise, read_corpus_index, read_json, read_poses, read_sequence, read_sequences,
    split_train_val, write_corpus, write_json, write_poses, PoseRecord, Sequence, Split,
};
use dcap_core::kf::{run_kf, KfConfig};
use dcap_core::kinematics::{generate_corpus, CameraId, Mix, RigGeometry, ScenarioKind, ScenarioSpec};
use dcap_core::model::{gradient_check, Model, ModelConfig, ABLATIONS};
use dcap_core::report::{
    aggregate, composition, kf_errors, model_errors, scale_errors, static_errors, FrameError, MetricsReport,
};
use dcap_core::scale::{predictions_from_records, recover_sequence};
use dcap_core::seed::derive_seed;
use dcap_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(name = "dcap", version, about = "Dynamic trailer camera calibration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a corpus of sequences with noisy GNSS and heading readings.
    Gen(GenArgs),
    /// Sequence-level train/validation split of a corpus.
    Split(SplitArgs),
    /// Kalman filter rear camera poses for one sequence.
    Kf(KfArgs),
    /// Metric trailer poses from scale-ambiguous predictions.
    ScaleRecover(ScaleArgs),
    /// Train the decoder on the training split.
    Train(TrainArgs),
    /// Per-frame pose errors of one method on the validation split.
    Eval(EvalArgs),
    /// Per-scenario tables from per-frame error files.
    Report(ReportArgs),
    /// Finite-difference check of the decoder gradients, all four ablations.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    /// `reference` or `Kind=weight,...`.
    #[arg(long, default_value = "reference")]
    mix: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.020)]
    sigma_pos: f64,
    #[arg(long, default_value_t = 0.0349)]
    sigma_heading: f64,
    #[arg(long, default_value_t = 0)]
    agents: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct KfArgs {
    #[arg(long)]
    seq: PathBuf,
    #[arg(long, default_value_t = 0.020)]
    sigma_pos: f64,
    #[arg(long, default_value_t = 0.0349)]
    sigma_heading: f64,
    #[arg(long, default_value_t = 0.01)]
    q_pos: f64,
    #[arg(long, default_value_t = 1e-4)]
    q_heading: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ScaleArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    seq: PathBuf,
    #[arg(long, default_value_t = dcap_core::scale::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Split file from `split`; without it every sequence is used.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Model config JSON, or `default`.
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Dcap,
    Static,
    Kf,
    Scale,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Split file; the validation ids are evaluated. Without it, every sequence.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dcap")]
    method: Method,
    /// Checkpoint, required for `--method dcap`.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Global scale of the synthetic predictions for `--method scale`.
    #[arg(long, default_value_t = 0.37)]
    scale_factor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GradCheckArgs {
    /// Model config JSON, or `default`.
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long, default_value_t = 200)]
    coords: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into().to_string())
    }
}

fn echo<T: Serialize>(command: &str, args: &T) {
    let value = serde_json::json!({ "command": command, "config": args });
    println!("{value}");
}

fn load_model_config(arg: &str) -> Result<ModelConfig, Failure> {
    if arg == "default" {
        return Ok(ModelConfig::default());
    }
    let cfg: ModelConfig = read_json(Path::new(arg))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Sequences of a corpus, optionally restricted to one side of a split.
fn load_split(corpus: &Path, split: Option<&Path>, train: bool) -> Result<Vec<Sequence>, Failure> {
    let ids: Vec<String> = match split {
        Some(p) => {
            let s: Split = read_json(p)?;
            if train {
                s.train
            } else {
                s.val
            }
        }
        None => read_corpus_index(corpus)?.sequences.into_iter().map(|e| e.id).collect(),
    };
    Ok(read_sequences(corpus, &ids)?)
}

fn gen(a: &GenArgs) -> Result<(), Failure> {
    let mix = Mix::parse(&a.mix).map_err(|e| Failure::Usage(e.to_string()))?;
    let rig = RigGeometry::default();
    let mut seqs = Vec::with_capacity(a.n);
    for (id, sim) in generate_corpus(a.n, &mix, a.seed, &rig)? {
        let clean = Sequence::from_sim(&id, &sim, &rig);
        let mut seq = inject_sensor_noise(&clean, a.sigma_pos, a.sigma_heading, derive_seed(a.seed, "noise"))?;
        if a.agents > 0 {
            dataset::add_agents(&mut seq, a.agents, derive_seed(a.seed, "agents"));
        }
        seqs.push(seq);
    }
    write_corpus(&seqs, a.seed, &a.out)?;
    print_composition(&seqs);
    Ok(())
}

fn print_composition(seqs: &[Sequence]) {
    let comp = composition(seqs);
    let total: usize = comp.values().map(|c| c.1).sum();
    for (kind, (n, frames)) in &comp {
        println!(
            "{:<13} {n:>4} sequences {frames:>7} frames {:>6.1}%",
            kind.to_string(),
            100.0 * *frames as f64 / total.max(1) as f64
        );
    }
}

fn split(a: &SplitArgs) -> Result<(), Failure> {
    let index = read_corpus_index(&a.corpus)?;
    let ids: Vec<String> = index.sequences.into_iter().map(|e| e.id).collect();
    let s = split_train_val(&ids, a.ratio, a.seed)?;
    write_json(&a.out, &s)?;
    println!("train {} val {}", s.train.len(), s.val.len());
    Ok(())
}

fn kf(a: &KfArgs) -> Result<(), Failure> {
    let seq = read_sequence(&a.seq)?;
    let cfg = KfConfig {
        q_pos: a.q_pos,
        q_heading: a.q_heading,
        sigma_pos: a.sigma_pos,
        sigma_heading: a.sigma_heading,
        ..KfConfig::default()
    };
    let poses = run_kf(&seq, &cfg)?;
    let records: Vec<PoseRecord> = poses
        .into_iter()
        .enumerate()
        .map(|(frame, pose)| PoseRecord {
            frame,
            camera: CameraId::Rear,
            pose,
        })
        .collect();
    write_poses(&a.out, &records)?;
    println!("{} frames", records.len());
    Ok(())
}

fn scale_recover(a: &ScaleArgs) -> Result<(), Failure> {
    let seq = read_sequence(&a.seq)?;
    let preds = predictions_from_records(&read_poses(&a.pred)?);
    let results = recover_sequence(&seq, &preds, a.threshold)?;
    let mut records = Vec::new();
    let mut discarded = 0;
    for r in &results {
        if r.discarded {
            discarded += 1;
        }
        for (cam, pose) in &r.metric_poses {
            records.push(PoseRecord {
                frame: r.frame,
                camera: *cam,
                pose: *pose,
            });
        }
    }
    write_poses(&a.out, &records)?;
    println!("{} frames recovered, {discarded} discarded", results.len() - discarded);
    Ok(())
}

fn train(a: &TrainArgs) -> Result<(), Failure> {
    let cfg = ModelConfig {
        seed: a.seed,
        ..load_model_config(&a.config)?
    };
    echo("train.model", &cfg);
    let seqs = load_split(&a.corpus, a.split.as_deref(), true)?;
    let mut model = Model::new(&cfg)?;
    let report = model.train(&seqs, |epoch, loss| eprintln!("epoch {:>3} loss {loss:.6}", epoch + 1))?;
    model.save(&a.out, Some(&report))?;
    println!("initial loss {:.6} final loss {:.6}", report.initial_loss, report.final_loss);
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<(), Failure> {
    let seqs = load_split(&a.corpus, a.split.as_deref(), false)?;
    let errors = match a.method {
        Method::Static => static_errors(&seqs)?,
        Method::Kf => kf_errors(&seqs, &KfConfig::default())?,
        Method::Scale => scale_errors(&seqs, a.scale_factor, dcap_core::scale::DEFAULT_THRESHOLD)?,
        Method::Dcap => {
            let path = a
                .ckpt
                .as_deref()
                .ok_or_else(|| Failure::Usage("--ckpt is required for --method dcap".into()))?;
            let (model, _) = Model::load(path)?;
            echo("eval.model", &model.config);
            model_errors(&model, &seqs, &model.config.ablation_label())?
        }
    };
    write_json(&a.out, &errors)?;
    if let Ok(r) = aggregate(&errors) {
        print!("{}", r.to_text());
    }
    Ok(())
}

fn frame_errors_csv(errors: &[FrameError]) -> String {
    let mut s = String::from("method,sequence_id,frame,scenario,delta_t,delta_x,delta_y,delta_z,rra\n");
    for e in errors {
        let m = &e.error;
        s.push_str(&format!(
            "\"{}\",{},{},{},{:?},{:?},{:?},{:?},{:?}\n",
            e.method, e.sequence_id, e.frame, e.scenario, m.delta_t, m.delta_x, m.delta_y, m.delta_z, m.rra
        ));
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn report(a: &ReportArgs) -> Result<(), Failure> {
    let mut errors: Vec<FrameError> = Vec::new();
    for p in &a.inputs {
        let part: Vec<FrameError> = read_json(p)?;
        errors.extend(part);
    }
    let r: MetricsReport = aggregate(&errors)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    write_text(&a.out.join("metrics.csv"), &r.to_csv())?;
    write_text(&a.out.join("metrics.txt"), &r.to_text())?;
    write_text(&a.out.join("frame_errors.csv"), &frame_errors_csv(&errors))?;
    print!("{}", r.to_text());
    Ok(())
}

fn grad_check(a: &GradCheckArgs) -> Result<bool, Failure> {
    let base = ModelConfig {
        seed: a.seed,
        ..load_model_config(&a.config)?
    };
    let rig = RigGeometry::default();
    let spec = ScenarioSpec::sample(ScenarioKind::UTurn, derive_seed(a.seed, "gradcheck.sequence"));
    let sim = dcap_core::kinematics::generate(&spec, &rig)?;
    let mut seq = Sequence::from_sim("gradcheck", &sim, &rig);
    seq.frames.truncate(40);
    let mut worst: f64 = 0.0;
    for (cca, cta) in ABLATIONS {
        let cfg = base.with_ablation(cca, cta);
        let r = gradient_check(&cfg, &seq, 2, a.coords, a.seed)?;
        println!(
            "{:<26} max rel error {:.3e} over {} coords (worst {}[{}])",
            cfg.ablation_label(),
            r.max_rel_error,
            r.coords_checked,
            r.worst_param,
            r.worst_index
        );
        worst = worst.max(r.max_rel_error);
    }
    let ok = worst < a.tolerance;
    println!("max relative error {worst:.3e}: {}", if ok { "ok" } else { "FAILED" });
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Gen(a) => {
            echo("gen", a);
            gen(a)?
        }
        Command::Split(a) => {
            echo("split", a);
            split(a)?
        }
        Command::Kf(a) => {
            echo("kf", a);
            kf(a)?
        }
        Command::ScaleRecover(a) => {
            echo("scale-recover", a);
            scale_recover(a)?
        }
        Command::Train(a) => {
            echo("train", a);
            train(a)?
        }
        Command::Eval(a) => {
            echo("eval", a);
            eval(a)?
        }
        Command::Report(a) => {
            echo("report", a);
            report(a)?
        }
        Command::GradCheck(a) => {
            echo("grad-check", a);
            return grad_check(a);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_DATA),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
