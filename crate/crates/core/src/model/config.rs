use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub heads: usize,
    /// AdaLN blocks per refinement step.
    pub n_blocks: usize,
    pub refine_steps: usize,
    pub queue_len: usize,
    pub w_trans: f64,
    pub w_rot: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Consecutive frames per training window.
    pub window: usize,
    pub n_landmarks: usize,
    /// Landmarks are scattered uniformly over an annulus around the origin (m).
    pub landmark_radius: [f64; 2],
    /// Std of Gaussian noise on the encoder's bearing/inverse-distance inputs.
    pub encoder_noise: f64,
    /// Scale of the fixed encoder projection.
    pub encoder_gain: f64,
    pub use_cca: bool,
    pub use_cta: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 64,
            heads: 4,
            n_blocks: 2,
            refine_steps: 3,
            queue_len: 3,
            w_trans: 1.0,
            w_rot: 1.0,
            lr: 1e-4,
            batch: 4,
            epochs: 24,
            window: 3,
            n_landmarks: 16,
            landmark_radius: [150.0, 250.0],
            encoder_noise: 0.001,
            encoder_gain: 1.0,
            use_cca: true,
            use_cta: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.d == 0 || self.heads == 0 || self.d % self.heads != 0 {
            return bad("d must be a positive multiple of heads");
        }
        if self.refine_steps == 0 || self.n_blocks == 0 {
            return bad("refine_steps and n_blocks must be positive");
        }
        if self.batch == 0 || self.window == 0 {
            return bad("batch and window must be positive");
        }
        if self.n_landmarks == 0 {
            return bad("n_landmarks must be positive");
        }
        if !(self.landmark_radius[0] > 0.0 && self.landmark_radius[1] >= self.landmark_radius[0]) {
            return bad("landmark_radius must be an increasing positive pair");
        }
        if !(self.lr > 0.0 && self.w_trans >= 0.0 && self.w_rot >= 0.0 && self.encoder_noise >= 0.0) {
            return bad("lr must be positive; weights and noise non-negative");
        }
        Ok(())
    }

    /// Short label of the CCA/CTA combination.
    pub fn ablation_label(&self) -> String {
        let w = |on: bool| if on { "w/" } else { "w/o" };
        format!("dCAP ({} CCA, {} CTA)", w(self.use_cca), w(self.use_cta))
    }

    pub fn with_ablation(&self, use_cca: bool, use_cta: bool) -> Self {
        Self {
            use_cca,
            use_cta,
            ..self.clone()
        }
    }
}

/// The four CCA × CTA configurations in table order.
pub const ABLATIONS: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];
