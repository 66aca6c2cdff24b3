//! Mini-batch training of the reconstruction model.
//!
//! Parallelism is deterministic: a batch is split into `threads` contiguous
//! chunks, each chunk accumulates its gradients sequentially, and the chunk
//! sums merge in a fixed order. With the same resolved configuration (seed
//! and thread count included) two runs produce bit-identical parameters;
//! `threads = 1` is the fully single-threaded mode.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::model::{Autoencoder, Gradients};
use super::NnError;
use crate::metrics::{combined_loss, LossWeights, SsimConfig};
use crate::num::Real;

/// In-memory stack of frames in the on-disk byte format (channel-major
/// uint8), normalized to [0, 1] on access.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub dim: usize,
    pub data: Vec<u8>,
}

impl FrameSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn frame_len(&self) -> usize {
        3 * self.dim * self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.frame_len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, frame: &[u8]) {
        assert_eq!(frame.len(), self.frame_len(), "frame byte length mismatch");
        self.data.extend_from_slice(frame);
    }

    pub fn frame_bytes(&self, i: usize) -> &[u8] {
        let n = self.frame_len();
        &self.data[i * n..(i + 1) * n]
    }

    /// Frame `i` as scalars in [0, 1].
    pub fn frame_scalars<T: Real>(&self, i: usize) -> Vec<T> {
        self.frame_bytes(i).iter().map(|&b| T::of(b as f64 / 255.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Deterministic worker count; 1 = single-threaded.
    pub threads: usize,
    pub adam: AdamConfig,
    pub ssim_weight: f64,
    pub mse_weight: f64,
    /// Uniform SSIM window instead of the default Gaussian.
    pub ssim_uniform_window: bool,
    /// Optional global gradient-norm clip; off by default.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 64,
            seed: 0,
            threads: 1,
            adam: AdamConfig::default(),
            ssim_weight: 0.9,
            mse_weight: 0.1,
            ssim_uniform_window: false,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.epochs == 0 || self.batch_size == 0 || self.threads == 0 {
            return Err("epochs, batch_size and threads must be positive".into());
        }
        if (self.ssim_weight + self.mse_weight - 1.0).abs() > 1e-9 {
            return Err(format!(
                "loss weights must sum to 1, got {} + {}",
                self.ssim_weight, self.mse_weight
            ));
        }
        Ok(())
    }

    pub fn ssim_config<T: Real>(&self) -> SsimConfig<T> {
        SsimConfig { uniform: self.ssim_uniform_window, ..SsimConfig::default() }
    }

    pub fn loss_weights<T: Real>(&self) -> LossWeights<T> {
        LossWeights { ssim: T::of(self.ssim_weight), mse: T::of(self.mse_weight) }
    }
}

/// Loss trace of a run: one row per batch plus per-epoch means.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    /// (epoch, batch, mean loss of the batch)
    pub rows: Vec<(usize, usize, f64)>,
    pub epoch_means: Vec<f64>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,batch,loss\n");
        for (e, b, l) in &self.rows {
            s.push_str(&format!("{e},{b},{l:.8}\n"));
        }
        s
    }
}

fn chunk_grads<T: Real>(
    model: &Autoencoder<T>,
    frames: &FrameSet,
    idxs: &[usize],
    ssim_cfg: &SsimConfig<T>,
    weights: &LossWeights<T>,
) -> (Gradients<T>, f64) {
    let (c, h, w) = model.input_dims();
    let mut acc = Gradients::zeros_like(model);
    let mut loss_sum = 0.0f64;
    for &i in idxs {
        let x: Vec<T> = frames.frame_scalars(i);
        let acts = model.forward(&x);
        let (loss, d_out) = combined_loss(&acts.output, &x, c, h, w, ssim_cfg, weights);
        let g = model.backward(&acts, &d_out);
        acc.add_assign(&g);
        loss_sum += loss.to_f64().unwrap_or(f64::NAN);
    }
    (acc, loss_sum)
}

/// Trains in place. `on_epoch` runs after each epoch with the epoch's mean
/// loss (the CLI uses it to write checkpoints).
pub fn train<T: Real>(
    model: &mut Autoencoder<T>,
    frames: &FrameSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &Autoencoder<T>, f64),
) -> Result<TrainLog, NnError> {
    cfg.validate().map_err(NnError::BadCheckpoint)?;
    let n = frames.len();
    if n == 0 {
        return Err(NnError::EmptyDataset);
    }
    let ssim_cfg = cfg.ssim_config::<T>();
    let weights = cfg.loss_weights::<T>();
    let mut adam = AdamState::new(model, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_frames = 0usize;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let chunk_len = batch.len().div_ceil(cfg.threads);
            let parts: Vec<(Gradients<T>, f64)> = if cfg.threads == 1 {
                vec![chunk_grads(model, frames, batch, &ssim_cfg, &weights)]
            } else {
                batch
                    .chunks(chunk_len)
                    .collect::<Vec<_>>()
                    .par_iter()
                    .map(|idxs| chunk_grads(model, frames, idxs, &ssim_cfg, &weights))
                    .collect()
            };
            let mut grads = Gradients::zeros_like(model);
            let mut loss_sum = 0.0;
            for (g, l) in &parts {
                grads.add_assign(g);
                loss_sum += l;
            }
            grads.scale(T::of(1.0 / batch.len() as f64));
            if let Some(clip) = cfg.grad_clip {
                clip_by_norm(&mut grads, clip);
            }
            adam.step(model, &grads)?;
            let mean = loss_sum / batch.len() as f64;
            log.rows.push((epoch, batch_idx, mean));
            epoch_loss += loss_sum;
            epoch_frames += batch.len();
        }
        let epoch_mean = epoch_loss / epoch_frames as f64;
        log.epoch_means.push(epoch_mean);
        on_epoch(epoch, model, epoch_mean);
    }
    Ok(log)
}

fn clip_by_norm<T: Real>(grads: &mut Gradients<T>, clip: f64) {
    let mut sq = 0.0f64;
    for a in grads.weights.iter().chain(grads.biases.iter()) {
        for v in a {
            let x = v.to_f64().unwrap_or(0.0);
            sq += x * x;
        }
    }
    let norm = sq.sqrt();
    if norm > clip && norm > 0.0 {
        grads.scale(T::of(clip / norm));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{LayerKind, LayerSpec};
    use rand::Rng;

    fn tiny_model(seed: u64) -> Autoencoder<f32> {
        let enc = [
            LayerSpec { kind: LayerKind::Conv, in_c: 3, out_c: 4, k: 4, stride: 2, leaky: true },
            LayerSpec { kind: LayerKind::Conv, in_c: 4, out_c: 6, k: 3, stride: 1, leaky: false },
        ];
        let dec = [
            LayerSpec { kind: LayerKind::ConvTransposed, in_c: 6, out_c: 4, k: 3, stride: 1, leaky: true },
            LayerSpec { kind: LayerKind::ConvTransposed, in_c: 4, out_c: 3, k: 4, stride: 2, leaky: false },
        ];
        Autoencoder::from_specs(&enc, &dec, 12, seed)
    }

    fn synthetic_frames(n: usize, dim: usize, seed: u64) -> FrameSet {
        // smooth-ish frames: vertical gradients with a random hue
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fs = FrameSet::new(dim);
        for _ in 0..n {
            let base: [f32; 3] = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
            let mut frame = vec![0u8; 3 * dim * dim];
            for c in 0..3 {
                for y in 0..dim {
                    for x in 0..dim {
                        let v = base[c] + 0.3 * (y as f32 / dim as f32) - 0.15;
                        frame[c * dim * dim + y * dim + x] = (v.clamp(0.0, 1.0) * 255.0) as u8;
                    }
                }
            }
            fs.push(&frame);
        }
        fs
    }

    #[test]
    fn loss_decreases_over_epochs() {
        let mut model = tiny_model(1);
        let frames = synthetic_frames(120, 12, 2);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 16,
            seed: 3,
            adam: AdamConfig { learning_rate: 2e-3, ..AdamConfig::default() },
            ..TrainConfig::default()
        };
        let log = train(&mut model, &frames, &cfg, |_, _, _| {}).unwrap();
        assert_eq!(log.epoch_means.len(), 2);
        assert!(
            log.epoch_means[1] < log.epoch_means[0],
            "means: {:?}",
            log.epoch_means
        );
    }

    #[test]
    fn training_is_bitwise_deterministic_per_seed() {
        let frames = synthetic_frames(48, 12, 7);
        let cfg = TrainConfig { epochs: 1, batch_size: 16, seed: 11, ..TrainConfig::default() };
        let mut a = tiny_model(5);
        let mut b = tiny_model(5);
        train(&mut a, &frames, &cfg, |_, _, _| {}).unwrap();
        train(&mut b, &frames, &cfg, |_, _, _| {}).unwrap();
        assert_eq!(a, b);

        // chunked mode is deterministic with itself too
        let cfg2 = TrainConfig { threads: 2, ..cfg };
        let mut c = tiny_model(5);
        let mut d = tiny_model(5);
        train(&mut c, &frames, &cfg2, |_, _, _| {}).unwrap();
        train(&mut d, &frames, &cfg2, |_, _, _| {}).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let mut model = tiny_model(1);
        let frames = FrameSet::new(12);
        assert!(matches!(
            train(&mut model, &frames, &TrainConfig::default(), |_, _, _| {}),
            Err(NnError::EmptyDataset)
        ));
    }

    #[test]
    fn csv_log_shape() {
        let mut model = tiny_model(2);
        let frames = synthetic_frames(20, 12, 3);
        let cfg = TrainConfig { epochs: 1, batch_size: 8, seed: 1, ..TrainConfig::default() };
        let log = train(&mut model, &frames, &cfg, |_, _, _| {}).unwrap();
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,batch,loss");
        assert_eq!(lines.len(), 1 + log.rows.len());
    }
}
