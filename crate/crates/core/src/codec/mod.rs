//! Quadtree block codec with texture synthesis: texture blocks are
//! predicted by warping the group's key frame with frame-level motion
//! parameters and carry no residual.

pub mod bits;
mod block;
mod decoder;
mod encoder;
mod stream;
mod texture;
pub mod transform;

pub use block::{BlockMode, MIN_BLOCK, SUPERBLOCK};
pub use decoder::{decode_padded, decode_sequence, DecodedStream};
pub use encoder::{
    encode_sequence, encode_with_motion, plan_motion, BlockDecision, EncodeOutput, EncoderConfig, FrameMotion,
    FrameStats, LeafOption, ModeCounts, NodeAnalysis, NodeChoice, SequenceStats,
};
pub use stream::{overhead_bytes, recon_crc, FrameType, StreamHeader, FRAME_HEADER_BYTES, MAGIC, MOTION_BYTES, VERSION};
pub use texture::is_texture_block;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("not a TXC1 stream")]
    BadMagic,
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),
    #[error("stream truncated in {0}")]
    Truncated(&'static str),
    #[error("invalid stream: {0}")]
    Invalid(String),
    #[error("stream checksum mismatch")]
    StreamChecksum,
    #[error("reconstruction checksum mismatch in frame {frame}")]
    ReconMismatch { frame: usize },
    #[error("texture mode needs one mask per frame: got {masks} for {frames} frames")]
    MissingMask { masks: usize, frames: usize },
    #[error("mask for frame {frame} is {mask:?} cells, frame needs {grid:?}")]
    MaskSize {
        frame: usize,
        mask: (usize, usize),
        grid: (usize, usize),
    },
    #[error("invalid encoder configuration: {0}")]
    Config(String),
    #[error("cannot encode an empty sequence")]
    EmptySequence,
}
