//! Rate-distortion evaluation: non-texture PSNR, bits per frame,
//! Bjøntegaard deltas and the q-level sweep comparing baseline and texture
//! coding.

mod bd;
mod metrics;
mod sweep;

pub use bd::{bd_psnr, bd_rate, BdMethod, Cubic, RdCurve, RdPoint};
pub use metrics::{bits_per_frame, data_rate_saving, psnr_nontexture, Saving, Smaller, PSNR_CAP};
pub use sweep::{rd_sweep, RdReport, RdRow, SweepConfig, SweepEncode, DEFAULT_Q_LEVELS};

use thiserror::Error;

use crate::codec::CodecError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sequences differ: {0}")]
    Mismatch(String),
    #[error("empty evaluation region: every cell is texture")]
    EmptyRegion,
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("frame count must be at least 1")]
    NoFrames,
    #[error("invalid RD curve: {0}")]
    Curve(String),
    #[error("curves do not overlap in {0}")]
    NoOverlap(&'static str),
    #[error(transparent)]
    Codec(#[from] CodecError),
}
