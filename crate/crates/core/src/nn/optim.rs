use serde::{Deserialize, Serialize};

use super::net::{Grads, NetParams};
use super::scalar::Scalar;
use super::NnError;

/// Mini-batch SGD hyperparameters for the block classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Loss weight per class, indexed by class id (non-texture = 0, texture = 1).
    pub class_weights: Vec<f64>,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 512,
            epochs: 100,
            class_weights: vec![1.0, 1.0],
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::Config(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.class_weights.len() != 2 || self.class_weights.iter().any(|w| !(*w > 0.0)) {
            return bad("class weights must be two positive values");
        }
        Ok(())
    }
}

/// Momentum buffers, one per learnable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Scalar> Velocity<T> {
    pub fn zeros_like(params: &NetParams<T>) -> Self {
        Velocity {
            tensors: params.learnable().iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }
}

/// Classic momentum with weight decay folded into the gradient:
///
/// ```text
/// v <- momentum * v + grad + weight_decay * w
/// w <- w - learning_rate * v
/// ```
///
/// The decay term is the gradient of `weight_decay / 2 * |w|^2`.
pub fn sgd_update<T: Scalar>(param: &mut [T], grad: &[T], velocity: &mut [T], cfg: &TrainConfig) {
    let (mom, wd, lr) = (T::of(cfg.momentum), T::of(cfg.weight_decay), T::of(cfg.learning_rate));
    for ((w, &g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = mom * *v + g + wd * *w;
        *w = *w - lr * *v;
    }
}

pub fn sgd_step<T: Scalar>(params: &mut NetParams<T>, grads: &Grads<T>, velocity: &mut Velocity<T>, cfg: &TrainConfig) {
    let tensors = params.learnable_mut();
    assert_eq!(tensors.len(), grads.tensors.len(), "gradient count");
    assert_eq!(tensors.len(), velocity.tensors.len(), "velocity count");
    for ((w, g), v) in tensors.into_iter().zip(&grads.tensors).zip(velocity.tensors.iter_mut()) {
        sgd_update(w, g, v, cfg);
    }
}
