//! Integer-pel block matching.

use crate::frame::Plane;

/// SAD between the `w`x`h` block of `a` at (ax, ay) and that of `b` at
/// (bx, by). Stops early once the running sum exceeds `limit`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn block_sad(a: &Plane, ax: usize, ay: usize, b: &Plane, bx: usize, by: usize, w: usize, h: usize, limit: u32) -> u32 {
    let mut sum = 0u32;
    for r in 0..h {
        let ra = &a.data[(ay + r) * a.width + ax..][..w];
        let rb = &b.data[(by + r) * b.width + bx..][..w];
        sum += ra.iter().zip(rb).map(|(&p, &q)| p.abs_diff(q) as u32).sum::<u32>();
        if sum > limit {
            return sum;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchResult {
    pub dx: i32,
    pub dy: i32,
    pub sad: u32,
}

/// Exhaustive search of the `size`x`size` block of `cur` at (bx, by) over
/// displacements within `range` that keep the block inside `reference`.
/// Ties go to the smaller L1 displacement, then to raster order.
pub fn full_search(cur: &Plane, reference: &Plane, bx: usize, by: usize, size: usize, range: i32) -> SearchResult {
    let lo_x = -(bx.min(range as usize) as i32);
    let lo_y = -(by.min(range as usize) as i32);
    let hi_x = (reference.width as i32 - (bx + size) as i32).clamp(0, range);
    let hi_y = (reference.height as i32 - (by + size) as i32).clamp(0, range);
    let mut best = SearchResult {
        dx: 0,
        dy: 0,
        sad: block_sad(cur, bx, by, reference, bx, by, size, size, u32::MAX),
    };
    if best.sad == 0 {
        return best;
    }
    for dy in lo_y..=hi_y {
        for dx in lo_x..=hi_x {
            let norm = dx.abs() + dy.abs();
            let best_norm = best.dx.abs() + best.dy.abs();
            let rx = (bx as i32 + dx) as usize;
            let ry = (by as i32 + dy) as usize;
            let sad = block_sad(cur, bx, by, reference, rx, ry, size, size, best.sad);
            if sad < best.sad || (sad == best.sad && norm < best_norm) {
                best = SearchResult { dx, dy, sad };
            }
        }
    }
    best
}
