//! Per-sequence quality and rate measures.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::analyzer::TextureMask;
use crate::frame::BLOCK;
use crate::Sequence;

/// PSNR reported for a zero-error region.
pub const PSNR_CAP: f64 = 100.0;

/// Luma PSNR over the pixels of non-texture cells, pooling the squared
/// error of all frames before taking one logarithm.
pub fn psnr_nontexture(orig: &Sequence, decoded: &Sequence, masks: &[TextureMask]) -> Result<f64, EvalError> {
    if orig.len() != decoded.len() || orig.len() != masks.len() {
        return Err(EvalError::Mismatch(format!(
            "{} original frames, {} decoded frames, {} masks",
            orig.len(),
            decoded.len(),
            masks.len()
        )));
    }
    let (mut sse, mut n) = (0u64, 0u64);
    for (i, ((a, b), m)) in orig.frames.iter().zip(&decoded.frames).zip(masks).enumerate() {
        if (a.width, a.height) != (b.width, b.height) {
            return Err(EvalError::Mismatch(format!(
                "frame {i} is {}x{} vs {}x{}",
                a.width, a.height, b.width, b.height
            )));
        }
        if (m.grid_w, m.grid_h) != a.grid_dims() {
            return Err(EvalError::Mismatch(format!("mask {i} does not cover frame {i}")));
        }
        let (ya, yb) = (a.y(), b.y());
        for y in 0..a.height {
            let (ra, rb) = (ya.row(y), yb.row(y));
            for x in 0..a.width {
                if !m.is_texture(x / BLOCK, y / BLOCK) {
                    sse += (ra[x] as i64 - rb[x] as i64).pow(2) as u64;
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        return Err(EvalError::EmptyRegion);
    }
    if sse == 0 {
        return Ok(PSNR_CAP);
    }
    let mse = sse as f64 / n as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP))
}

/// Average coded size in bits per frame.
pub fn bits_per_frame(file_bytes: usize, frame_count: usize) -> Result<f64, EvalError> {
    if frame_count == 0 {
        return Err(EvalError::NoFrames);
    }
    Ok(8.0 * file_bytes as f64 / frame_count as f64)
}

/// Which argument of [`data_rate_saving`] had the lower rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smaller {
    First,
    Second,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saving {
    pub percent: f64,
    pub smaller: Smaller,
}

/// Relative difference of two rates against the larger one, in percent.
pub fn data_rate_saving(a: f64, b: f64) -> Result<Saving, EvalError> {
    for r in [a, b] {
        if !(r > 0.0 && r.is_finite()) {
            return Err(EvalError::NonPositiveRate(r));
        }
    }
    let (hi, lo) = (a.max(b), a.min(b));
    let smaller = if a < b {
        Smaller::First
    } else if b < a {
        Smaller::Second
    } else {
        Smaller::Equal
    };
    Ok(Saving {
        percent: (hi - lo) / hi * 100.0,
        smaller,
    })
}
