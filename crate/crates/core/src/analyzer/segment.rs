//! Per-frame texture masks from a trained classifier.

use rayon::prelude::*;

use super::mask::{clean_mask, TextureMask};
use super::patches::{frame_block_rgb, normalize, PATCH, PATCH_LEN};
use super::train::texture_probs;
use super::AnalyzerError;
use crate::frame::{pad_frame, Frame, Sequence};
use crate::nn::{NetParams, Tensor4};

/// Network input for every 16x16 cell of the padded frame, raster order.
pub fn frame_cells(frame: &Frame) -> Tensor4<f32> {
    let f = pad_frame(frame);
    let (gw, gh) = f.grid_dims();
    let mut data = Vec::with_capacity(gw * gh * PATCH_LEN);
    for cy in 0..gh {
        for cx in 0..gw {
            let rgb = frame_block_rgb(&f, cx * PATCH, cy * PATCH, PATCH, PATCH);
            data.extend(rgb.to_chw().iter().map(|&v| normalize(v)));
        }
    }
    Tensor4::from_vec([gw * gh, 3, PATCH, PATCH], data)
}

/// Classify every cell of `frame` in eval mode. A cell is texture when
/// its texture probability is at least `threshold`.
pub fn segment_frame(frame: &Frame, params: &NetParams<f32>, threshold: f64) -> Result<TextureMask, AnalyzerError> {
    let (gw, gh) = pad_frame(frame).grid_dims();
    let probs = texture_probs(&params.forward_eval(&frame_cells(frame))?);
    Ok(TextureMask::from_probs(gw, gh, probs, threshold, frame.index))
}

/// Segment every frame, then drop texture regions smaller than
/// `min_region_blocks` cells. Frames are classified in parallel; each
/// frame's result does not depend on scheduling.
pub fn segment_sequence(
    seq: &Sequence,
    params: &NetParams<f32>,
    threshold: f64,
    min_region_blocks: usize,
) -> Result<Vec<TextureMask>, AnalyzerError> {
    seq.frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut m = segment_frame(f, params, threshold)?;
            m.frame_index = i;
            Ok(clean_mask(&m, min_region_blocks))
        })
        .collect()
}
