//! Frozen geometric stand-in for the image backbone.
//!
//! Each camera observes `K` world landmarks: the bearing (azimuth in the
//! camera frame, divided by π) and a scaled inverse distance of every
//! landmark. With the camera one-hot these `6 + 2K` values are projected by a
//! fixed random matrix and squashed with `tanh`.

use std::f64::consts::PI;

use nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError};
use crate::dataset::FrameRecord;
use crate::geom::Vec3;
use crate::kinematics::CameraId;
use crate::seed::derive_seed;

/// Inverse distances are reported relative to this range (m).
const INV_DIST_REF: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub landmarks: Vec<[f64; 3]>,
    /// Row-major `[6 + 2K, d]`.
    pub projection: Vec<f64>,
    pub d: usize,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

/// Six camera tokens in canonical camera order plus the rear row index.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    pub tokens: Tensor,
    pub rear_index: usize,
}

impl TokenSet {
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.tokens.dims2().1;
        &self.tokens.values()[i * d..(i + 1) * d]
    }
}

impl Encoder {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "encoder.landmarks"));
        let [r_min, r_max] = cfg.landmark_radius;
        let landmarks = (0..cfg.n_landmarks)
            .map(|_| {
                // uniform over the annulus area
                let u: f64 = rng.gen();
                let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
                let a = rng.gen_range(-PI..PI);
                [r * a.cos(), r * a.sin(), rng.gen_range(0.0..10.0)]
            })
            .collect();
        let fan_in = 6 + 2 * cfg.n_landmarks;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "encoder.projection"));
        let normal = Normal::new(0.0, cfg.encoder_gain / (fan_in as f64).sqrt()).expect("finite gain");
        let projection = (0..fan_in * cfg.d).map(|_| normal.sample(&mut rng)).collect();
        Self {
            landmarks,
            projection,
            d: cfg.d,
            noise_sigma: cfg.encoder_noise,
            noise_seed: derive_seed(cfg.seed, "encoder.noise"),
        }
    }

    pub fn input_len(&self) -> usize {
        6 + 2 * self.landmarks.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.projection.len() != self.input_len() * self.d {
            return Err(ModelError::CheckpointMismatch(format!(
                "encoder projection has {} values, expected {}",
                self.projection.len(),
                self.input_len() * self.d
            )));
        }
        Ok(())
    }

    /// Noise-free observation vector of one camera.
    pub fn observation(&self, cam: CameraId, frame: &FrameRecord) -> Vec<f64> {
        let pose = frame.extrinsic(cam);
        let inv = pose.inverse();
        let mut obs = vec![0.0; self.input_len()];
        obs[cam.index()] = 1.0;
        let k = self.landmarks.len();
        for (j, l) in self.landmarks.iter().enumerate() {
            let p = inv.transform_point(&Vec3::new(l[0], l[1], l[2]));
            obs[6 + j] = p.y.atan2(p.x) / PI;
            obs[6 + k + j] = INV_DIST_REF / p.norm();
        }
        obs
    }

    /// Tokens of one frame. `stream` identifies the frame (sequence and
    /// index) so that observation noise is reproducible.
    pub fn encode(&self, frame: &FrameRecord, stream: &str) -> TokenSet {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.noise_seed, stream));
        let noise = (self.noise_sigma > 0.0).then(|| Normal::new(0.0, self.noise_sigma).expect("finite sigma"));
        let d = self.d;
        let n_in = self.input_len();
        let mut values = Vec::with_capacity(6 * d);
        for cam in CameraId::ALL {
            let mut obs = self.observation(cam, frame);
            if let Some(n) = &noise {
                for v in &mut obs[6..] {
                    *v += n.sample(&mut rng);
                }
            }
            let mut row = vec![0.0; d];
            for (i, o) in obs.iter().enumerate().take(n_in) {
                if *o == 0.0 {
                    continue;
                }
                let w = &self.projection[i * d..(i + 1) * d];
                for (r, wv) in row.iter_mut().zip(w) {
                    *r += o * wv;
                }
            }
            values.extend(row.into_iter().map(f64::tanh));
        }
        TokenSet {
            tokens: Tensor::matrix(6, d, values).expect("6 x d tokens"),
            rear_index: CameraId::Rear.index(),
        }
    }
}
