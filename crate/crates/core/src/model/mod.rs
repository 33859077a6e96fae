//! The dCAP decoder over stub encoder tokens, with training, evaluation and
//! checkpoints.

mod config;
pub mod decoder;
pub mod encoder;

use std::path::{Path, PathBuf};

use nn::{Adam, AdamConfig, GradCheckReport, Graph, NnError, ParamStore, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ModelConfig, ABLATIONS};
pub use decoder::{DcapParams, ForwardOutput, PoseVars, QueueEntry, TemporalQueue};
pub use encoder::{Encoder, TokenSet};

use crate::dataset::{FrameRecord, Sequence};
use crate::geom::Pose;
use crate::kinematics::CameraId;
use crate::seed::derive_seed;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const GRAD_CHECK_EPS: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite activation in refinement step {step}: {source}")]
    NonFiniteActivation {
        step: usize,
        #[source]
        source: NnError,
    },
    #[error("split `{0}` has no usable sequences")]
    EmptySplit(&'static str),
    #[error("checkpoint does not match: {0}")]
    CheckpointMismatch(String),
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
}

/// Rear camera pose in the tractor frame: the regression target.
pub fn rear_in_tractor(frame: &FrameRecord) -> Pose {
    frame.ego_pose.inverse().compose(frame.extrinsic(CameraId::Rear))
}

fn stream_key(seq: &Sequence, k: usize) -> String {
    format!("{}/{k}", seq.id())
}

/// Encoder tokens of every frame of a sequence.
pub fn encode_sequence(encoder: &Encoder, seq: &Sequence) -> Vec<TokenSet> {
    seq.frames
        .iter()
        .enumerate()
        .map(|(k, f)| encoder.encode(f, &stream_key(seq, k)))
        .collect()
}

/// Loss of the window of `cfg.window` frames ending at `end`. Earlier frames
/// of the window only fill the queue.
pub fn window_loss(
    g: &mut Graph,
    params: &DcapParams,
    cfg: &ModelConfig,
    seq: &Sequence,
    tokens: &[TokenSet],
    end: usize,
) -> Result<nn::Var, ModelError> {
    let start = end + 1 - cfg.window;
    let mut queue = TemporalQueue::new(cfg.queue_len);
    for k in start..end {
        queue.push(QueueEntry::rear(&tokens[k], &seq.frames[k].ego_pose));
    }
    let frame = &seq.frames[end];
    let init = seq.rig().nominal_extrinsic(CameraId::Rear);
    let out = decoder::forward(g, params, cfg, &tokens[end], &queue, &frame.ego_pose, &init)?;
    decoder::pose_loss(g, out.prediction(), &rear_in_tractor(frame), cfg)
}

fn as_nn_error(e: ModelError) -> NnError {
    match e {
        ModelError::Nn(e) | ModelError::NonFiniteActivation { source: e, .. } => e,
        other => NnError::InvalidTensor(other.to_string()),
    }
}

/// Central-difference check of the full decoder on the summed loss of a few
/// windows of `seq`, after perturbing every parameter away from its
/// zero-initialized gates.
pub fn gradient_check(
    cfg: &ModelConfig,
    seq: &Sequence,
    n_windows: usize,
    n_coords: usize,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    let mut model = Model::new(cfg)?;
    perturb_params(&mut model.store, 0.1, derive_seed(seed, "gradcheck.perturb"));
    let tokens = model.encode(seq);
    let ends: Vec<usize> = (cfg.window.saturating_sub(1)..seq.frames.len())
        .step_by(7)
        .take(n_windows)
        .collect();
    if ends.is_empty() {
        return Err(ModelError::EmptySplit("gradient check"));
    }
    let Model { config, params, mut store, .. } = model;
    let f = |g: &mut Graph| -> Result<nn::Var, NnError> {
        let mut total = None;
        for &end in &ends {
            let l = window_loss(g, &params, &config, seq, &tokens, end).map_err(as_nn_error)?;
            total = Some(match total {
                None => l,
                Some(t) => g.add(t, l)?,
            });
        }
        Ok(total.expect("non-empty windows"))
    };
    Ok(nn::grad_check(&mut store, f, GRAD_CHECK_EPS, n_coords, derive_seed(seed, "gradcheck.coords"))?)
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub store: ParamStore,
    pub params: DcapParams,
}

/// Per-frame prediction with its refinement trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose,
    pub trace: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
    pub windows_per_epoch: usize,
}

impl Model {
    pub fn new(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let encoder = Encoder::new(config);
        let mut store = ParamStore::new();
        let params = DcapParams::register(&mut store, config)?;
        Ok(Self {
            config: config.clone(),
            encoder,
            store,
            params,
        })
    }

    pub fn encode(&self, seq: &Sequence) -> Vec<TokenSet> {
        encode_sequence(&self.encoder, seq)
    }

    /// Full pass for one frame; pushes the frame's rear token into `queue`.
    pub fn step(
        &self,
        tokens: &TokenSet,
        queue: &mut TemporalQueue,
        ego: &Pose,
        init: &Pose,
    ) -> Result<PoseEstimate, ModelError> {
        let mut g = Graph::new(&self.store);
        let out = decoder::forward(&mut g, &self.params, &self.config, tokens, queue, ego, init)?;
        let trace: Vec<Pose> = out.trace.iter().map(|p| p.read(&g)).collect();
        queue.push(QueueEntry::rear(tokens, ego));
        Ok(PoseEstimate {
            pose: *trace.last().expect("non-empty trace"),
            trace,
        })
    }

    /// Streams a sequence in order with a fresh queue.
    pub fn predict_sequence(&self, seq: &Sequence, tokens: &[TokenSet]) -> Result<Vec<PoseEstimate>, ModelError> {
        let init = seq.rig().nominal_extrinsic(CameraId::Rear);
        let mut queue = TemporalQueue::new(self.config.queue_len);
        seq.frames
            .iter()
            .zip(tokens)
            .map(|(f, t)| self.step(t, &mut queue, &f.ego_pose, &init))
            .collect()
    }

    /// Loss of one training window ending at frame `end` of `seq`.
    pub fn window_loss<'a>(
        &'a self,
        g: &mut Graph<'a>,
        seq: &Sequence,
        tokens: &[TokenSet],
        end: usize,
    ) -> Result<nn::Var, ModelError> {
        window_loss(g, &self.params, &self.config, seq, tokens, end)
    }

    fn mean_loss(&self, data: &[(&Sequence, Vec<TokenSet>)], windows: &[(usize, usize)]) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for &(s, end) in windows {
            let mut g = Graph::new(&self.store);
            let loss = self.window_loss(&mut g, data[s].0, &data[s].1, end)?;
            total += g.scalar(loss);
        }
        Ok(total / windows.len() as f64)
    }

    /// Adam over shuffled windows of `window` consecutive frames, `batch`
    /// windows per step; every valid window is visited once per epoch.
    pub fn train(&mut self, train: &[Sequence], mut on_epoch: impl FnMut(usize, f64)) -> Result<TrainReport, ModelError> {
        let data: Vec<(&Sequence, Vec<TokenSet>)> = train.iter().map(|s| (s, self.encode(s))).collect();
        let w = self.config.window;
        let windows: Vec<(usize, usize)> = data
            .iter()
            .enumerate()
            .flat_map(|(s, (seq, _))| (w.saturating_sub(1)..seq.frames.len()).map(move |end| (s, end)))
            .collect();
        if windows.is_empty() {
            return Err(ModelError::EmptySplit("train"));
        }
        let initial_loss = self.mean_loss(&data, &windows)?;
        self.params.freeze_unused(&mut self.store, &self.config);
        self.store.zero_grad();
        let mut adam = Adam::new(
            &self.store,
            AdamConfig {
                lr: self.config.lr,
                ..AdamConfig::default()
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, "train.shuffle"));
        let mut order = windows.clone();
        let mut epoch_losses = Vec::with_capacity(self.config.epochs);
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut rng);
            let mut sum = 0.0;
            for batch in order.chunks(self.config.batch) {
                let scale = 1.0 / batch.len() as f64;
                for &(s, end) in batch {
                    let grads = {
                        let mut g = Graph::new(&self.store);
                        let loss = self.window_loss(&mut g, data[s].0, &data[s].1, end)?;
                        sum += g.scalar(loss);
                        g.backward(loss)?
                    };
                    grads.accumulate_into(&mut self.store, scale);
                }
                adam.step(&mut self.store)?;
            }
            let mean = sum / order.len() as f64;
            epoch_losses.push(mean);
            on_epoch(epoch, mean);
        }
        let final_loss = self.mean_loss(&data, &windows)?;
        Ok(TrainReport {
            initial_loss,
            final_loss,
            epoch_losses,
            steps: adam.steps(),
            windows_per_epoch: windows.len(),
        })
    }

    pub fn save(&self, path: &Path, training: Option<&TrainReport>) -> Result<(), ModelError> {
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            encoder: self.encoder.clone(),
            params: self
                .store
                .iter()
                .map(|(_, name, t)| NamedArray {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    values: t.values().to_vec(),
                })
                .collect(),
            training: training.cloned(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| ModelError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let text = serde_json::to_string(&ckpt).map_err(|source| ModelError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Option<TrainReport>), ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|source| ModelError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok((Self::from_checkpoint(&ckpt)?, ckpt.training))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ModelError> {
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::CheckpointMismatch(format!(
                "version {} (expected {CHECKPOINT_VERSION})",
                ckpt.format_version
            )));
        }
        let mut model = Self::new(&ckpt.config)?;
        ckpt.encoder.validate()?;
        if ckpt.encoder.d != ckpt.config.d || ckpt.encoder.landmarks.len() != ckpt.config.n_landmarks {
            return Err(ModelError::CheckpointMismatch("encoder does not match config".into()));
        }
        model.encoder = ckpt.encoder.clone();
        if ckpt.params.len() != model.store.len() {
            return Err(ModelError::CheckpointMismatch(format!(
                "{} parameters stored, model has {}",
                ckpt.params.len(),
                model.store.len()
            )));
        }
        for arr in &ckpt.params {
            let id = model
                .store
                .id(&arr.name)
                .map_err(|_| ModelError::CheckpointMismatch(format!("unknown parameter `{}`", arr.name)))?;
            if model.store.get(id).shape() != arr.shape.as_slice() {
                return Err(ModelError::CheckpointMismatch(format!("shape of `{}`", arr.name)));
            }
            model.store.set_values(id, &arr.values)?;
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub params: Vec<NamedArray>,
    #[serde(default)]
    pub training: Option<TrainReport>,
}

/// Random perturbation of every parameter, used to take gradient checks
/// away from the zero-initialized gates.
pub fn perturb_params(store: &mut ParamStore, scale: f64, seed: u64) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
    for id in ids {
        let t: &mut Tensor = store.get_mut(id);
        for v in t.values_mut() {
            *v += rng.gen_range(-scale..scale);
        }
    }
}
