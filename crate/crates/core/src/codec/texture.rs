//! Texture-block decision: a block is coded as synthesized texture when it
//! lies in the current frame's texture region and every reference pixel its
//! warp reads lies in the reference frame's texture region.

use crate::analyzer::TextureMask;
use crate::frame::{BlockRect, BLOCK};
use crate::motion::{AffineMotion, FixedMap, FIXED_SHIFT};

/// Every cell overlapped by `rect` is texture in `mask`.
fn rect_in_texture(rect: BlockRect, mask: &TextureMask) -> bool {
    let (cx1, cy1) = ((rect.x + rect.size).div_ceil(BLOCK), (rect.y + rect.size).div_ceil(BLOCK));
    if rect.size == 0 || cx1 > mask.grid_w || cy1 > mask.grid_h {
        return false;
    }
    (rect.y / BLOCK..cy1).all(|cy| (rect.x / BLOCK..cx1).all(|cx| mask.is_texture(cx, cy)))
}

/// Every pixel in the inclusive range is inside the frame and in a texture
/// cell.
fn span_in_texture(x0: i64, y0: i64, x1: i64, y1: i64, mask: &TextureMask) -> bool {
    let (w, h) = ((mask.grid_w * BLOCK) as i64, (mask.grid_h * BLOCK) as i64);
    if x0 < 0 || y0 < 0 || x1 >= w || y1 >= h {
        return false;
    }
    let b = BLOCK as i64;
    (y0 / b..=y1 / b).all(|cy| (x0 / b..=x1 / b).all(|cx| mask.is_texture(cx as usize, cy as usize)))
}

/// Whether `rect` of the current frame is a texture block under motion `m`
/// (quantized to Q16.16, as the warp uses it). The reference frame is the
/// padded frame covered by `ref_mask`.
pub fn is_texture_block(rect: BlockRect, cur_mask: &TextureMask, ref_mask: &TextureMask, m: &AffineMotion) -> bool {
    if !rect_in_texture(rect, cur_mask) {
        return false;
    }
    let map = FixedMap::luma(m);
    let (x0, y0) = (rect.x as i64, rect.y as i64);
    let (x1, y1) = (x0 + rect.size as i64 - 1, y0 + rect.size as i64 - 1);

    // The mapping is affine, so the corners bound every sample position.
    let corners = [map.map(x0, y0), map.map(x1, y0), map.map(x0, y1), map.map(x1, y1)];
    let lo_x = corners.iter().map(|c| c.0).min().unwrap() >> FIXED_SHIFT;
    let hi_x = (corners.iter().map(|c| c.0).max().unwrap() >> FIXED_SHIFT) + 1;
    let lo_y = corners.iter().map(|c| c.1).min().unwrap() >> FIXED_SHIFT;
    let hi_y = (corners.iter().map(|c| c.1).max().unwrap() >> FIXED_SHIFT) + 1;
    if span_in_texture(lo_x, lo_y, hi_x, hi_y, ref_mask) {
        return true;
    }

    for y in y0..=y1 {
        for x in x0..=x1 {
            let s = map.support(x, y);
            let sx1 = s.x + s.right as i64;
            let sy1 = s.y + s.below as i64;
            if !span_in_texture(s.x, s.y, sx1, sy1, ref_mask) {
                return false;
            }
        }
    }
    true
}
