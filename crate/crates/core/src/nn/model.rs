//! The convolutional autoencoder: a fixed 6+6 layer table, reverse-mode
//! gradients across the whole stack, checkpointing, and the anomaly score.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::*;
use super::NnError;
use crate::num::Real;

/// Trainable parameters of the stock architecture.
pub const EXPECTED_PARAM_COUNT: usize = 2_225_379;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    ConvTransposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    /// LeakyReLU after this layer (the last layer of each half has none).
    pub leaky: bool,
}

const fn conv(in_c: usize, out_c: usize, k: usize, stride: usize, leaky: bool) -> LayerSpec {
    LayerSpec { kind: LayerKind::Conv, in_c, out_c, k, stride, leaky }
}

const fn convt(in_c: usize, out_c: usize, k: usize, stride: usize, leaky: bool) -> LayerSpec {
    LayerSpec { kind: LayerKind::ConvTransposed, in_c, out_c, k, stride, leaky }
}

/// Encoder half: 3x84x84 down to 128x2x2.
pub fn encoder_spec() -> [LayerSpec; 6] {
    [
        conv(3, 16, 6, 1, true),
        conv(16, 32, 5, 2, true),
        conv(32, 64, 6, 1, true),
        conv(64, 128, 5, 2, true),
        conv(128, 128, 5, 2, true),
        conv(128, 128, 5, 1, false),
    ]
}

/// Decoder half: 128x2x2 back to 3x84x84.
pub fn decoder_spec() -> [LayerSpec; 6] {
    [
        convt(128, 128, 5, 1, true),
        convt(128, 128, 5, 2, true),
        convt(128, 64, 5, 2, true),
        convt(64, 32, 6, 1, true),
        convt(32, 16, 5, 2, true),
        convt(16, 3, 6, 1, false),
    ]
}

impl LayerSpec {
    pub fn weight_len(&self) -> usize {
        self.in_c * self.out_c * self.k * self.k
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.out_c
    }

    pub fn out_dims(&self, (c, h, w): (usize, usize, usize)) -> (usize, usize, usize) {
        assert_eq!(c, self.in_c, "layer expects {} input channels, got {c}", self.in_c);
        match self.kind {
            LayerKind::Conv => {
                (self.out_c, conv_out_dim(h, self.k, self.stride), conv_out_dim(w, self.k, self.stride))
            }
            LayerKind::ConvTransposed => (
                self.out_c,
                convt_out_dim(h, self.k, self.stride),
                convt_out_dim(w, self.k, self.stride),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Encoder + decoder with an output clamp to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    pub layers: Vec<Layer<T>>,
    /// Spatial input size (height = width); 84 for the dataset contract.
    pub input_dim: usize,
}

/// Cached per-layer values from a forward pass, consumed by `backward`.
pub struct Activations<T> {
    /// Input to each layer (so `inputs[0]` is the network input).
    inputs: Vec<Vec<T>>,
    input_dims: Vec<(usize, usize, usize)>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<T>>,
    /// Final output after the clamp.
    pub output: Vec<T>,
}

/// Per-layer parameter gradients, same ordering as `Autoencoder::layers`.
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Autoencoder<T>) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![T::zero(); l.weight.len()]).collect(),
            biases: model.layers.iter().map(|l| vec![T::zero(); l.bias.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn all_finite(&self) -> Option<usize> {
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if !w.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
                return Some(i);
            }
        }
        None
    }
}

impl<T: Real> Autoencoder<T> {
    /// Stock architecture with Kaiming-style uniform fan-in init.
    pub fn new_seeded(seed: u64) -> Self {
        Self::from_specs(&encoder_spec(), &decoder_spec(), crate::FRAME_DIM, seed)
    }

    /// Builds a model from explicit layer tables (reduced stacks are used by
    /// the gradient-oracle tests).
    pub fn from_specs(enc: &[LayerSpec], dec: &[LayerSpec], input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = enc
            .iter()
            .chain(dec.iter())
            .map(|&spec| {
                let fan_in = spec.in_c * spec.k * spec.k;
                let bound = (6.0 / fan_in as f64).sqrt();
                let weight =
                    (0..spec.weight_len()).map(|_| T::of(rng.gen_range(-bound..bound))).collect();
                let bias = vec![T::zero(); spec.out_c];
                Layer { spec, weight, bias }
            })
            .collect();
        Self { layers, input_dim }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.layers[0].spec.in_c, self.input_dim, self.input_dim)
    }

    fn encoder_len(&self) -> usize {
        self.layers.iter().filter(|l| l.spec.kind == LayerKind::Conv).count()
    }

    /// Shape of the bottleneck for the configured input size.
    pub fn encoded_dims(&self) -> (usize, usize, usize) {
        let mut dims = self.input_dims();
        for l in self.layers.iter().take(self.encoder_len()) {
            dims = l.spec.out_dims(dims);
        }
        dims
    }

    /// Forward pass, caching what `backward` needs.
    pub fn forward(&self, input: &[T]) -> Activations<T> {
        let (c, h, w) = self.input_dims();
        assert_eq!(input.len(), c * h * w, "model input shape mismatch");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut input_dims = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        let mut dims = (c, h, w);
        for layer in &self.layers {
            inputs.push(x.clone());
            input_dims.push(dims);
            let (z, out_dims) = match layer.spec.kind {
                LayerKind::Conv => conv2d_forward(
                    &x, dims, &layer.weight, &layer.bias, layer.spec.out_c, layer.spec.k,
                    layer.spec.stride,
                ),
                LayerKind::ConvTransposed => convt2d_forward(
                    &x, dims, &layer.weight, &layer.bias, layer.spec.out_c, layer.spec.k,
                    layer.spec.stride,
                ),
            };
            pre.push(z.clone());
            x = z;
            if layer.spec.leaky {
                leaky_relu_forward(&mut x);
            }
            dims = out_dims;
        }
        clamp01_forward(&mut x);
        Activations { inputs, input_dims, pre, output: x }
    }

    /// Reconstruction only.
    pub fn reconstruct(&self, input: &[T]) -> Vec<T> {
        self.forward(input).output
    }

    /// Bottleneck features for an input.
    pub fn encode(&self, input: &[T]) -> (Vec<T>, (usize, usize, usize)) {
        let (c, h, w) = self.input_dims();
        assert_eq!(input.len(), c * h * w, "model input shape mismatch");
        let mut x = input.to_vec();
        let mut dims = (c, h, w);
        for layer in self.layers.iter().take(self.encoder_len()) {
            let (z, out_dims) = conv2d_forward(
                &x, dims, &layer.weight, &layer.bias, layer.spec.out_c, layer.spec.k,
                layer.spec.stride,
            );
            x = z;
            if layer.spec.leaky {
                leaky_relu_forward(&mut x);
            }
            dims = out_dims;
        }
        (x, dims)
    }

    /// Exact reverse-mode gradients of a scalar loss given its gradient at
    /// the model output.
    pub fn backward(&self, acts: &Activations<T>, d_output: &[T]) -> Gradients<T> {
        assert_eq!(d_output.len(), acts.output.len(), "loss gradient shape mismatch");
        let mut grads = Gradients::zeros_like(self);
        let last = self.layers.len() - 1;
        let mut d = d_output.to_vec();
        clamp01_backward(&acts.pre[last], &mut d);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.spec.leaky {
                leaky_relu_backward(&acts.pre[i], &mut d);
            }
            let (d_in, d_w, d_b) = match layer.spec.kind {
                LayerKind::Conv => conv2d_backward(
                    &acts.inputs[i], acts.input_dims[i], &layer.weight, layer.spec.out_c,
                    layer.spec.k, layer.spec.stride, &d,
                ),
                LayerKind::ConvTransposed => convt2d_backward(
                    &acts.inputs[i], acts.input_dims[i], &layer.weight, layer.spec.out_c,
                    layer.spec.k, layer.spec.stride, &d,
                ),
            };
            grads.weights[i] = d_w;
            grads.biases[i] = d_b;
            d = d_in;
        }
        grads
    }

    /// Anomaly score: squared L2 distance between the input and its
    /// reconstruction, summed over every value.
    pub fn score(&self, input: &[T]) -> T {
        let recon = self.reconstruct(input);
        let mut acc = T::zero();
        for (&x, &r) in input.iter().zip(&recon) {
            let d = x - r;
            acc += d * d;
        }
        acc
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    layers: Vec<LayerSpec>,
    input_dim: usize,
    param_count: usize,
    seed: u64,
    epoch: usize,
}

const CHECKPOINT_MAGIC: &[u8] = b"GLITCHLAB-CKPT-1\n";

impl Autoencoder<f32> {
    /// Writes a checkpoint: magic, one-line JSON header, then the raw
    /// little-endian f32 parameter blob in layer order (weight then bias).
    pub fn save(&self, path: &Path, seed: u64, epoch: usize) -> Result<(), NnError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let header = CheckpointHeader {
            format: "autoencoder".into(),
            layers: self.layers.iter().map(|l| l.spec).collect(),
            input_dim: self.input_dim,
            param_count: self.param_count(),
            seed,
            epoch,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(CHECKPOINT_MAGIC)?;
        serde_json::to_writer(&mut f, &header)
            .map_err(|e| NnError::BadCheckpoint(e.to_string()))?;
        f.write_all(b"\n")?;
        for layer in &self.layers {
            for &v in layer.weight.iter().chain(layer.bias.iter()) {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, usize), NnError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if !bytes.starts_with(CHECKPOINT_MAGIC) {
            return Err(NnError::BadCheckpoint("missing magic".into()));
        }
        let rest = &bytes[CHECKPOINT_MAGIC.len()..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| NnError::BadCheckpoint("missing header terminator".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&rest[..nl])
            .map_err(|e| NnError::BadCheckpoint(e.to_string()))?;
        let blob = &rest[nl + 1..];
        let expected = header.param_count * 4;
        if blob.len() != expected {
            return Err(NnError::BadCheckpoint(format!(
                "parameter blob is {} bytes, header says {expected}",
                blob.len()
            )));
        }
        let mut offset = 0usize;
        let mut read = |n: usize| -> Vec<f32> {
            let out = blob[offset..offset + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            offset += 4 * n;
            out
        };
        let layers = header
            .layers
            .iter()
            .map(|&spec| Layer { spec, weight: read(spec.weight_len()), bias: read(spec.out_c) })
            .collect();
        let model = Autoencoder { layers, input_dim: header.input_dim };
        if model.param_count() != header.param_count {
            return Err(NnError::BadCheckpoint("layer table disagrees with param count".into()));
        }
        Ok((model, header.epoch))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn stock_architecture_has_expected_parameters_and_shapes() {
        let model = Autoencoder::<f32>::new_seeded(0);
        assert_eq!(model.param_count(), EXPECTED_PARAM_COUNT);
        assert_eq!(model.encoded_dims(), (128, 2, 2));
        // flattened bottleneck is 512
        assert_eq!(128 * 2 * 2, 512);
    }

    #[test]
    fn layer_one_output_shape() {
        // 3x84x84 through conv(k6, s1) -> 16x79x79
        let spec = encoder_spec()[0];
        assert_eq!(spec.out_dims((3, 84, 84)), (16, 79, 79));
    }

    #[test]
    fn full_shape_round_trip_at_contract_resolution() {
        let model = Autoencoder::<f32>::new_seeded(1);
        let input = vec![0.5f32; 3 * 84 * 84];
        let out = model.reconstruct(&input);
        assert_eq!(out.len(), input.len());
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        let (enc, dims) = model.encode(&input);
        assert_eq!(dims, (128, 2, 2));
        assert_eq!(enc.len(), 512);
    }

    fn tiny_model(seed: u64) -> Autoencoder<f64> {
        // 3x12x12 -> 4x5x5 -> 6x3x3 -> 4x5x5(wait) ... mirrored tiny stack
        let enc = [conv(3, 4, 4, 2, true), conv(4, 6, 3, 1, false)];
        let dec = [convt(6, 4, 3, 1, true), convt(4, 3, 4, 2, false)];
        Autoencoder::from_specs(&enc, &dec, 12, seed)
    }

    #[test]
    fn tiny_model_round_trips_shapes() {
        let m = tiny_model(3);
        let x = vec![0.3f64; 3 * 12 * 12];
        assert_eq!(m.reconstruct(&x).len(), x.len());
    }

    #[test]
    fn whole_model_gradients_match_finite_differences() {
        let model = tiny_model(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..3 * 12 * 12).map(|_| rng.gen_range(0.2..0.8)).collect();
        let target: Vec<f64> = (0..3 * 12 * 12).map(|_| rng.gen_range(0.2..0.8)).collect();

        // plain squared-error loss keeps the oracle independent of metrics
        let loss_of = |m: &Autoencoder<f64>| -> f64 {
            let out = m.reconstruct(&x);
            out.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let acts = model.forward(&x);
        let d_out: Vec<f64> =
            acts.output.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
        let grads = model.backward(&acts, &d_out);

        let eps = 1e-4;
        let mut worst = 0.0f64;
        for li in 0..model.layers.len() {
            for wi in 0..20 {
                let idx = (wi * 37) % model.layers[li].weight.len();
                let mut mp = model.clone();
                mp.layers[li].weight[idx] += eps;
                let mut mm = model.clone();
                mm.layers[li].weight[idx] -= eps;
                let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * eps);
                let g = grads.weights[li][idx];
                let denom = fd.abs().max(g.abs()).max(1e-6);
                worst = worst.max((fd - g).abs() / denom);
            }
            for bi in 0..model.layers[li].bias.len().min(4) {
                let mut mp = model.clone();
                mp.layers[li].bias[bi] += eps;
                let mut mm = model.clone();
                mm.layers[li].bias[bi] -= eps;
                let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * eps);
                let g = grads.biases[li][bi];
                let denom = fd.abs().max(g.abs()).max(1e-6);
                worst = worst.max((fd - g).abs() / denom);
            }
        }
        assert!(worst < 1e-3, "max relative gradient error {worst}");
    }

    #[test]
    fn zero_loss_gradient_means_zero_parameter_gradients() {
        let model = tiny_model(7);
        let x = vec![0.4f64; 3 * 12 * 12];
        let acts = model.forward(&x);
        let grads = model.backward(&acts, &vec![0.0; acts.output.len()]);
        assert!(grads.weights.iter().flatten().all(|&v| v == 0.0));
        assert!(grads.biases.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn score_properties() {
        let model = Autoencoder::<f32>::new_seeded(2);
        let x = vec![0.5f32; 3 * 84 * 84];
        assert!(model.score(&x) >= 0.0);
        // an input equal to its own reconstruction scores zero
        let recon = model.reconstruct(&x);
        let s = model.score(&recon);
        // not exactly zero (recon of recon differs) but finite and >= 0
        assert!(s.is_finite() && s >= 0.0);
    }

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = Autoencoder::<f32>::new_seeded(11);
        model.save(&path, 11, 3).unwrap();
        let (back, epoch) = Autoencoder::load(&path).unwrap();
        assert_eq!(epoch, 3);
        assert_eq!(model, back);

        // truncation is detected
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(Autoencoder::load(&path), Err(NnError::BadCheckpoint(_))));
    }
}
