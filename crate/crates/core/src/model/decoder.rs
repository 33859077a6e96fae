//! The decoder: rear-camera query with camera cross-attention, ego-motion
//! aligned temporal attention and AdaLN-modulated pose refinement.

use std::collections::VecDeque;

use nn::{mha, Graph, Linear, MhaParams, ParamId, ParamStore, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encoder::TokenSet;
use super::{ModelConfig, ModelError};
use crate::geom::{wrap_angle, Pose, Quaternion, Vec3};
use crate::seed::derive_seed;

/// Translations enter the pose embedding scaled by this factor.
const POSE_EMBED_T_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct AdaLnBlock {
    pub alpha: Linear,
    pub beta: Linear,
    pub gamma: Linear,
}

#[derive(Debug, Clone)]
pub struct DcapParams {
    pub query: ParamId,
    pub pos_embed: ParamId,
    pub cca: MhaParams,
    pub cta: MhaParams,
    pub w_delta: ParamId,
    pub b_delta: ParamId,
    pub pose_embed: Linear,
    pub blocks: Vec<AdaLnBlock>,
    pub head_hidden: Linear,
    pub head_out: Linear,
}

fn small_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    let values = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::matrix(rows, cols, values).expect("shape matches")
}

impl DcapParams {
    /// Registers every parameter. Gate heads and the final pose layer start
    /// at zero, so an untrained model returns its initial pose. Parameters of
    /// a disabled branch are frozen.
    pub fn register(store: &mut ParamStore, cfg: &ModelConfig) -> Result<Self, ModelError> {
        let d = cfg.d;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "decoder.init"));
        let bound = 1.0 / (d as f64).sqrt();
        let query = store.add("query", small_uniform(&mut rng, 1, d, bound))?;
        let pos_embed = store.add("pos_embed", small_uniform(&mut rng, 6, d, bound))?;
        let cca = MhaParams::register(store, "cca", d, cfg.heads, &mut rng)?;
        let cta = MhaParams::register(store, "cta", d, cfg.heads, &mut rng)?;
        let w_delta = store.add_fan_in("delta.w", 3, d, &mut rng)?;
        let b_delta = store.add_zeros("delta.b", 1, d)?;
        let pose_embed = Linear::register(store, "pose_embed", 7, d, &mut rng)?;
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for l in 0..cfg.n_blocks {
            blocks.push(AdaLnBlock {
                alpha: Linear::register(store, &format!("block{l}.alpha"), d, d, &mut rng)?,
                beta: Linear::register(store, &format!("block{l}.beta"), d, d, &mut rng)?,
                gamma: Linear::register_zeros(store, &format!("block{l}.gamma"), d, d)?,
            });
        }
        let head_hidden = Linear::register(store, "head.hidden", d, d, &mut rng)?;
        let head_out = Linear::register_zeros(store, "head.out", d, 7)?;
        let params = Self {
            query,
            pos_embed,
            cca,
            cta,
            w_delta,
            b_delta,
            pose_embed,
            blocks,
            head_hidden,
            head_out,
        };
        params.freeze_unused(store, cfg);
        Ok(params)
    }

    fn cca_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.query, self.pos_embed];
        ids.extend(mha_ids(&self.cca));
        ids
    }

    fn cta_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.w_delta, self.b_delta];
        ids.extend(mha_ids(&self.cta));
        ids
    }

    pub fn freeze_unused(&self, store: &mut ParamStore, cfg: &ModelConfig) {
        for (ids, on) in [(self.cca_ids(), cfg.use_cca), (self.cta_ids(), cfg.use_cta)] {
            for id in ids {
                store.get_mut(id).set_requires_grad(on);
            }
        }
    }
}

fn mha_ids(p: &MhaParams) -> [ParamId; 8] {
    [p.q.w, p.q.b, p.k.w, p.k.b, p.v.w, p.v.b, p.o.w, p.o.b]
}

/// Rear camera token and ego pose of an earlier frame.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueEntry {
    pub token: Vec<f64>,
    pub ego_pose: Pose,
}

impl QueueEntry {
    pub fn rear(tokens: &TokenSet, ego_pose: &Pose) -> Self {
        Self {
            token: tokens.row(tokens.rear_index).to_vec(),
            ego_pose: *ego_pose,
        }
    }
}

/// FIFO of the most recent rear camera tokens of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalQueue {
    capacity: usize,
    entries: VecDeque<QueueEntry>,
}

impl TemporalQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn push(&mut self, entry: QueueEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &QueueEntry> {
        self.entries.iter()
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut QueueEntry> {
        self.entries.iter_mut()
    }
}

/// `Q' = MHA(Q, T + pos, T + pos) + T_rear`, or `T_rear` with CCA disabled.
pub fn cca(g: &mut Graph, p: &DcapParams, cfg: &ModelConfig, tokens: &TokenSet) -> Result<Var, ModelError> {
    let rear = g.constant_row(tokens.row(tokens.rear_index));
    if !cfg.use_cca {
        return Ok(rear);
    }
    let t = g.constant(&tokens.tokens);
    let pos = g.param(p.pos_embed);
    let keys = g.add(t, pos)?;
    let q = g.param(p.query);
    let attended = mha(g, &p.cca, q, keys, keys)?;
    Ok(g.add(attended, rear)?)
}

/// Planar motion `(Δx, Δy, Δψ)` from `then` to `now`, in the frame of `then`.
pub fn ego_motion(then: &Pose, now: &Pose) -> [f64; 3] {
    let rel = then.inverse().compose(now);
    [rel.translation.x, rel.translation.y, wrap_angle(rel.yaw())]
}

/// `T + Δp W_Δ + b_Δ`.
pub fn align_history(g: &mut Graph, p: &DcapParams, entry: &QueueEntry, ego_now: &Pose) -> Result<Var, ModelError> {
    let token = g.constant_row(&entry.token);
    let dp = g.constant_row(&ego_motion(&entry.ego_pose, ego_now));
    let w = g.param(p.w_delta);
    let b = g.param(p.b_delta);
    let offset = nn::linear(g, dp, w, b)?;
    Ok(g.add(token, offset)?)
}

/// `G' = G + MHA(G, aligned history)`; an empty queue attends to `G` itself.
pub fn cta(
    g: &mut Graph,
    p: &DcapParams,
    cfg: &ModelConfig,
    global: Var,
    queue: &TemporalQueue,
    ego_now: &Pose,
) -> Result<Var, ModelError> {
    if !cfg.use_cta {
        return Ok(global);
    }
    let keys = if queue.is_empty() {
        global
    } else {
        let rows = queue
            .entries()
            .map(|e| align_history(g, p, e, ego_now))
            .collect::<Result<Vec<_>, _>>()?;
        if rows.len() == 1 {
            rows[0]
        } else {
            g.concat_rows(&rows)?
        }
    };
    let attended = mha(g, &p.cta, global, keys, keys)?;
    Ok(g.add(global, attended)?)
}

/// One pose of the refinement trace as graph values.
#[derive(Debug, Clone, Copy)]
pub struct PoseVars {
    pub t: Var,
    pub q: Var,
}

impl PoseVars {
    pub fn constant(g: &mut Graph, pose: &Pose) -> Self {
        let t = pose.translation;
        Self {
            t: g.constant_row(&[t.x, t.y, t.z]),
            q: g.constant_row(&pose.rotation.to_array()),
        }
    }

    pub fn read(&self, g: &Graph) -> Pose {
        let t = g.value(self.t);
        let q = g.value(self.q);
        Pose {
            rotation: Quaternion::new(q[0], q[1], q[2], q[3]),
            translation: Vec3::new(t[0], t[1], t[2]),
        }
    }
}

/// `x̂ = γ ⊙ (LN(x) ⊙ (1 + β) + α) + x` with `(α, β, γ)` from the pose embedding.
pub fn adaln_block(g: &mut Graph, block: &AdaLnBlock, x: Var, cond: Var) -> Result<Var, ModelError> {
    let alpha = block.alpha.forward(g, cond)?;
    let beta = block.beta.forward(g, cond)?;
    let gamma = block.gamma.forward(g, cond)?;
    let normed = g.layer_norm(x)?;
    let one_plus_beta = g.add_const(beta, 1.0)?;
    let modulated = g.mul(normed, one_plus_beta)?;
    let shifted = g.add(modulated, alpha)?;
    let gated = g.mul(gamma, shifted)?;
    Ok(g.add(gated, x)?)
}

/// Iterative refinement from `init`; returns every intermediate pose, the
/// last one being the prediction.
pub fn refine_pose(
    g: &mut Graph,
    p: &DcapParams,
    cfg: &ModelConfig,
    global: Var,
    init: &Pose,
) -> Result<Vec<PoseVars>, ModelError> {
    let mut pose = PoseVars::constant(g, init);
    let identity = g.constant_row(&Quaternion::IDENTITY.to_array());
    let mut trace = Vec::with_capacity(cfg.refine_steps + 1);
    trace.push(pose);
    for step in 0..cfg.refine_steps {
        let scaled_t = g.scale(pose.t, POSE_EMBED_T_SCALE)?;
        let pose_in = g.concat_cols(&[scaled_t, pose.q])?;
        let embed = p.pose_embed.forward(g, pose_in)?;
        let cond = g.silu(embed)?;
        let mut x = global;
        for block in &p.blocks {
            x = adaln_block(g, block, x, cond)?;
        }
        let hidden = p.head_hidden.forward(g, x)?;
        let hidden = g.silu(hidden)?;
        let delta = p.head_out.forward(g, hidden)?;
        let dt = g.slice_cols(delta, 0, 3)?;
        let dq = g.slice_cols(delta, 3, 4)?;
        let t = g.add(pose.t, dt)?;
        let dq = g.add(dq, identity)?;
        let dq = g.normalize_rows(dq)?;
        let q = g.quat_mul(pose.q, dq)?;
        let q = g.normalize_rows(q).map_err(|e| ModelError::NonFiniteActivation {
            step,
            source: e,
        })?;
        pose = PoseVars { t, q };
        trace.push(pose);
    }
    Ok(trace)
}

pub struct ForwardOutput {
    /// Post-CTA global token `G'`.
    pub global: Var,
    pub trace: Vec<PoseVars>,
}

impl ForwardOutput {
    pub fn prediction(&self) -> PoseVars {
        *self.trace.last().expect("trace holds the initial pose")
    }
}

/// CCA then CTA: the global token of the current frame.
pub fn global_token(
    g: &mut Graph,
    p: &DcapParams,
    cfg: &ModelConfig,
    tokens: &TokenSet,
    queue: &TemporalQueue,
    ego_now: &Pose,
) -> Result<Var, ModelError> {
    let fused = cca(g, p, cfg, tokens)?;
    cta(g, p, cfg, fused, queue, ego_now)
}

/// Full decoder pass for one frame. The caller pushes the frame into the queue.
pub fn forward(
    g: &mut Graph,
    p: &DcapParams,
    cfg: &ModelConfig,
    tokens: &TokenSet,
    queue: &TemporalQueue,
    ego_now: &Pose,
    init: &Pose,
) -> Result<ForwardOutput, ModelError> {
    let global = global_token(g, p, cfg, tokens, queue, ego_now)?;
    let trace = refine_pose(g, p, cfg, global, init)?;
    Ok(ForwardOutput { global, trace })
}

/// `w_trans Σ|t̂ − t⋆| + w_rot Σ|q̂ − σ q⋆|` with σ = ±1 aligning the
/// quaternion signs.
pub fn pose_loss(g: &mut Graph, pred: PoseVars, gt: &Pose, cfg: &ModelConfig) -> Result<Var, ModelError> {
    let q_hat = g.value(pred.q).to_vec();
    let q_gt = gt.rotation.to_array();
    let dot: f64 = q_hat.iter().zip(&q_gt).map(|(a, b)| a * b).sum();
    let sigma = if dot < 0.0 { -1.0 } else { 1.0 };
    let q_target: Vec<f64> = q_gt.iter().map(|v| sigma * v).collect();
    let t = gt.translation;
    let t_target = g.constant_row(&[t.x, t.y, t.z]);
    let q_target = g.constant_row(&q_target);
    let dt = g.sub(pred.t, t_target)?;
    let dt = g.abs(dt)?;
    let l_trans = g.sum(dt)?;
    let dq = g.sub(pred.q, q_target)?;
    let dq = g.abs(dq)?;
    let l_rot = g.sum(dq)?;
    let l_trans = g.scale(l_trans, cfg.w_trans)?;
    let l_rot = g.scale(l_rot, cfg.w_rot)?;
    Ok(g.add(l_trans, l_rot)?)
}
