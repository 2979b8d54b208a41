//! A small CPU neural-network kit: exactly the layers needed by the
//! 16x16 texture block classifier, with analytic backward passes,
//! momentum SGD and a binary weight format.

use thiserror::Error;

mod io;
pub mod layers;
mod net;
mod optim;
mod scalar;
mod tensor;

pub use io::{load_params, load_params_for, save_params, MAGIC as WEIGHTS_MAGIC, VERSION as WEIGHTS_VERSION};
pub use layers::CrossEntropy;
pub use net::{ForwardCache, Grads, LayerParams, LayerSpec, NetParams, NetSpec, INPUT_DIMS, NUM_CLASSES};
pub use optim::{sgd_step, sgd_update, TrainConfig, Velocity};
pub use scalar::Scalar;
pub use tensor::Tensor4;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {layer}: {detail}")]
    Shape { layer: &'static str, detail: String },
    #[error("batchnorm in training mode needs a batch of at least 2")]
    BatchTooSmall,
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),
    #[error("non-finite gradient at layer {index} ({layer})")]
    NonFinite { index: usize, layer: String },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("architecture mismatch: weights built for {found:016x}, expected {expected:016x}")]
    ArchitectureMismatch { found: u64, expected: u64 },
    #[error("bad weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
