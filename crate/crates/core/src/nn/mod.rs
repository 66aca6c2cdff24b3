//! From-scratch neural-network core: exactly the ops the reconstruction
//! model needs — valid 2D convolution, transposed convolution, LeakyReLU,
//! an output clamp, reverse-mode gradients, and Adam.

mod adam;
mod conv;
mod model;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use conv::{
    clamp01_backward, clamp01_forward, conv2d_backward, conv2d_forward, convt2d_backward,
    convt2d_forward, leaky_relu_backward, leaky_relu_forward, LEAKY_SLOPE,
};
pub use model::{
    decoder_spec, encoder_spec, Activations, Autoencoder, Gradients, LayerKind, LayerSpec,
    EXPECTED_PARAM_COUNT,
};
pub use train::{train, FrameSet, TrainConfig, TrainLog};

use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("non-finite gradient in layer {layer} at step {step}")]
    NonFiniteGradient { layer: usize, step: u64 },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("empty training set")]
    EmptyDataset,
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "tensor data length does not match shape {shape:?}"
        );
        Self { shape: shape.to_vec(), data }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_accounting() {
        let t = Tensor::<f32>::zeros(&[3, 4, 5]);
        assert_eq!(t.numel(), 60);
        assert!(t.all_finite());
    }

    #[test]
    #[should_panic(expected = "does not match shape")]
    fn tensor_rejects_wrong_length() {
        let _ = Tensor::<f32>::from_vec(&[2, 2], vec![0.0; 5]);
    }
}
