//! Texture analysis/synthesis video coding.
//!
//! The pipeline classifies every 16x16 luma block of a frame as texture or
//! non-texture with a small CNN ([`analyzer`], built on [`nn`]), fits a
//! parametric motion model to the texture region only ([`motion`]), and
//! codes texture blocks in a block codec ([`codec`]) as unsplit,
//! warp-predicted blocks with no residual. [`eval`] measures the result
//! with non-texture PSNR, bits per frame and Bjøntegaard deltas.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analyzer;
pub mod codec;
pub mod eval;
pub mod frame;
pub mod motion;
pub mod nn;
pub mod synth;
pub mod y4m;

pub use frame::{BlockRect, Frame, Plane, PlaneKind, Sequence};
