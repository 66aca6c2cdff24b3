//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use super::model::{Autoencoder, Gradients};
use super::NnError;
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 5e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 0.0 }
    }
}

/// First/second moment estimates per parameter tensor plus the step count.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(model: &Autoencoder<T>, config: AdamConfig) -> Self {
        let mut m = Vec::new();
        for l in &model.layers {
            m.push(vec![T::zero(); l.weight.len()]);
            m.push(vec![T::zero(); l.bias.len()]);
        }
        Self { config, v: m.clone(), m, step: 0 }
    }

    /// One bias-corrected update. Gradients must be finite.
    pub fn step(&mut self, model: &mut Autoencoder<T>, grads: &Gradients<T>) -> Result<(), NnError> {
        if let Some(layer) = grads.all_finite() {
            return Err(NnError::NonFiniteGradient { layer, step: self.step });
        }
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::one();
        // lr * sqrt(1 - b2^t) / (1 - b1^t)
        let lr_t = T::of(c.learning_rate * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t)));
        let eps = T::of(c.epsilon);
        let wd = T::of(c.weight_decay);

        let mut slot = 0usize;
        for (li, layer) in model.layers.iter_mut().enumerate() {
            for (params, grad) in [
                (&mut layer.weight, &grads.weights[li]),
                (&mut layer.bias, &grads.biases[li]),
            ] {
                let m = &mut self.m[slot];
                let v = &mut self.v[slot];
                slot += 1;
                for i in 0..params.len() {
                    let mut g = grad[i];
                    if c.weight_decay != 0.0 {
                        g += wd * params[i];
                    }
                    m[i] = b1 * m[i] + (one - b1) * g;
                    v[i] = b2 * v[i] + (one - b2) * g * g;
                    params[i] -= lr_t * m[i] / (v[i].sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{decoder_spec, encoder_spec, LayerSpec};
    use crate::nn::LayerKind;

    fn one_param_model() -> Autoencoder<f64> {
        // single 1x1 conv on a 1x1 input: the parameter pair (w, b)
        let spec = LayerSpec { kind: LayerKind::Conv, in_c: 1, out_c: 1, k: 1, stride: 1, leaky: false };
        Autoencoder::from_specs(&[spec], &[], 1, 0)
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut model = Autoencoder::<f32>::from_specs(&encoder_spec()[..2], &decoder_spec()[4..], 84, 3);
        let before = model.clone();
        let mut adam = AdamState::new(&model, AdamConfig::default());
        let grads = Gradients::zeros_like(&model);
        adam.step(&mut model, &grads).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        let mut model = one_param_model();
        model.layers[0].weight[0] = 1.0;
        let mut adam = AdamState::new(&model, AdamConfig::default());
        let mut grads = Gradients::zeros_like(&model);
        grads.weights[0][0] = 0.37; // any constant gradient
        let w0 = model.layers[0].weight[0];
        adam.step(&mut model, &grads).unwrap();
        let delta = model.layers[0].weight[0] - w0;
        // bias-corrected first step moves by ~lr against the gradient sign
        assert!(delta < 0.0);
        assert!((delta.abs() - 5e-4).abs() < 5e-6, "delta = {delta}");
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // minimize f(w) = w^2 from w = 1, comparing against the scalar
        // recurrence computed independently; lr raised so 100 steps can
        // move w well below 0.9 (steps are bounded by ~lr each)
        let cfg = AdamConfig { learning_rate: 1e-2, ..AdamConfig::default() };
        let mut model = one_param_model();
        model.layers[0].weight[0] = 1.0;
        let mut adam = AdamState::new(&model, cfg);
        for _ in 0..100 {
            let w = model.layers[0].weight[0];
            let mut grads = Gradients::zeros_like(&model);
            grads.weights[0][0] = 2.0 * w;
            adam.step(&mut model, &grads).unwrap();
        }
        let got = model.layers[0].weight[0];

        // independent scalar oracle
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=100 {
            let g = 2.0 * w;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let lr_t =
                cfg.learning_rate * (1.0 - cfg.beta2.powi(t)).sqrt() / (1.0 - cfg.beta1.powi(t));
            w -= lr_t * m / (v.sqrt() + cfg.epsilon);
        }
        assert!((got - w).abs() < 1e-12, "{got} vs oracle {w}");
        assert!(got.abs() < 0.9, "after 100 steps |w| should shrink, got {got}");
    }

    #[test]
    fn non_finite_gradients_abort() {
        let mut model = one_param_model();
        let mut adam = AdamState::new(&model, AdamConfig::default());
        let mut grads = Gradients::zeros_like(&model);
        grads.weights[0][0] = f64::NAN;
        assert!(matches!(
            adam.step(&mut model, &grads),
            Err(NnError::NonFiniteGradient { layer: 0, .. })
        ));
    }
}
