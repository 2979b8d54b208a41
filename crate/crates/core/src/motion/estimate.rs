//! Texture-region motion estimation: per-cell block matches, then a
//! RANSAC fit of the chosen model and a least-squares refit on inliers.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::search::full_search;
use super::{AffineMotion, MotionModelKind};
use crate::analyzer::TextureMask;
use crate::frame::{pad_frame, Frame, Plane, BLOCK};

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("no texture region: the mask has no texture cells")]
    NoTextureRegion,
    #[error("frame sizes differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("mask grid {mask:?} does not match frame grid {frame:?}")]
    MaskSize { mask: (usize, usize), frame: (usize, usize) },
}

#[derive(Debug, Clone, Serialize)]
pub struct MotionConfig {
    /// Block-matching range in luma pixels, each direction.
    pub search_range: i32,
    /// RANSAC inlier distance in pixels.
    pub ransac_threshold: f64,
    pub ransac_iterations: usize,
    pub seed: u64,
    /// Below this many texture cells only a translation is fitted.
    pub min_cells: usize,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            search_range: 32,
            ransac_threshold: 1.5,
            ransac_iterations: 200,
            seed: 0,
            min_cells: 6,
        }
    }
}

/// A cell centre in the current frame and its matched position in the
/// reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct MotionEstimate {
    pub motion: AffineMotion,
    /// Model actually fitted; lower than requested after a fallback.
    pub kind: MotionModelKind,
    pub inlier_fraction: f64,
    pub cells: usize,
    /// Set when the requested model gave a degenerate fit and a translation
    /// was used instead.
    pub degenerate_fallback: bool,
}

fn ssd_at(cur: &Plane, reference: &Plane, bx: usize, by: usize, rx: i64, ry: i64) -> Option<f64> {
    if rx < 0 || ry < 0 || rx as usize + BLOCK > reference.width || ry as usize + BLOCK > reference.height {
        return None;
    }
    let mut s = 0.0;
    for r in 0..BLOCK {
        let a = &cur.data[(by + r) * cur.width + bx..][..BLOCK];
        let b = &reference.data[(ry as usize + r) * reference.width + rx as usize..][..BLOCK];
        s += a.iter().zip(b).map(|(&p, &q)| (p as f64 - q as f64).powi(2)).sum::<f64>();
    }
    Some(s)
}

/// Parabolic vertex offset from three SSD samples, limited to half a pixel.
fn parabola(minus: Option<f64>, centre: f64, plus: Option<f64>) -> f64 {
    match (minus, plus) {
        (Some(m), Some(p)) => {
            let denom = m - 2.0 * centre + p;
            if denom > 0.0 {
                (0.5 * (m - p) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// Match every texture cell of `cur` in `reference` and return the
/// correspondences in cell raster order.
pub fn cell_correspondences(cur: &Plane, reference: &Plane, cells: &[(usize, usize)], range: i32) -> Vec<Correspondence> {
    cells
        .iter()
        .map(|&(cx, cy)| {
            let (bx, by) = (cx * BLOCK, cy * BLOCK);
            let r = full_search(cur, reference, bx, by, BLOCK, range);
            let (rx, ry) = (bx as i64 + r.dx as i64, by as i64 + r.dy as i64);
            let (mut ox, mut oy) = (0.0, 0.0);
            if r.sad > 0 {
                let c = ssd_at(cur, reference, bx, by, rx, ry).expect("search stays in bounds");
                ox = parabola(
                    ssd_at(cur, reference, bx, by, rx - 1, ry),
                    c,
                    ssd_at(cur, reference, bx, by, rx + 1, ry),
                );
                oy = parabola(
                    ssd_at(cur, reference, bx, by, rx, ry - 1),
                    c,
                    ssd_at(cur, reference, bx, by, rx, ry + 1),
                );
            }
            let centre = (bx as f64 + 7.5, by as f64 + 7.5);
            Correspondence {
                from: centre,
                to: (centre.0 + r.dx as f64 + ox, centre.1 + r.dy as f64 + oy),
            }
        })
        .collect()
}

/// Least-squares fit of `kind` to the correspondences. `None` when the
/// points do not determine the model.
pub fn fit_model(kind: MotionModelKind, pairs: &[Correspondence]) -> Option<AffineMotion> {
    if pairs.len() < kind.min_points() {
        return None;
    }
    let n = pairs.len() as f64;
    match kind {
        MotionModelKind::Translation => {
            let tx = pairs.iter().map(|c| c.to.0 - c.from.0).sum::<f64>() / n;
            let ty = pairs.iter().map(|c| c.to.1 - c.from.1).sum::<f64>() / n;
            Some(AffineMotion::translation(tx, ty))
        }
        MotionModelKind::RotZoom | MotionModelKind::Affine => {
            // Centre the coordinates for conditioning.
            let mx = pairs.iter().map(|c| c.from.0).sum::<f64>() / n;
            let my = pairs.iter().map(|c| c.from.1).sum::<f64>() / n;
            let rows = 2 * pairs.len();
            let cols = if kind == MotionModelKind::RotZoom { 4 } else { 6 };
            let mut a = DMatrix::<f64>::zeros(rows, cols);
            let mut b = DVector::<f64>::zeros(rows);
            for (i, c) in pairs.iter().enumerate() {
                let (x, y) = (c.from.0 - mx, c.from.1 - my);
                if kind == MotionModelKind::RotZoom {
                    // x' = a x - b y + tx ; y' = b x + a y + ty
                    a.row_mut(2 * i).copy_from_slice(&[x, -y, 1.0, 0.0]);
                    a.row_mut(2 * i + 1).copy_from_slice(&[y, x, 0.0, 1.0]);
                } else {
                    a.row_mut(2 * i).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0]);
                    a.row_mut(2 * i + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0]);
                }
                b[2 * i] = c.to.0;
                b[2 * i + 1] = c.to.1;
            }
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= smax * 1e-9 {
                return None;
            }
            let s = svd.solve(&b, 0.0).ok()?;
            let m = if kind == MotionModelKind::RotZoom {
                AffineMotion::rotzoom(s[0], s[1], s[2], s[3])
            } else {
                AffineMotion {
                    a11: s[0],
                    a12: s[1],
                    tx: s[2],
                    a21: s[3],
                    a22: s[4],
                    ty: s[5],
                }
            };
            // Undo the centring: x' = A (x - m) + t  =>  t' = t - A m.
            Some(AffineMotion {
                tx: m.tx - m.a11 * mx - m.a12 * my,
                ty: m.ty - m.a21 * mx - m.a22 * my,
                ..m
            })
        }
    }
}

fn residual(m: &AffineMotion, c: &Correspondence) -> f64 {
    let (x, y) = m.apply(c.from.0, c.from.1);
    ((x - c.to.0).powi(2) + (y - c.to.1).powi(2)).sqrt()
}

fn inliers(m: &AffineMotion, pairs: &[Correspondence], threshold: f64) -> (Vec<bool>, f64) {
    let mut err = 0.0;
    let mask = pairs
        .iter()
        .map(|c| {
            let r = residual(m, c);
            let inside = r < threshold;
            if inside {
                err += r;
            }
            inside
        })
        .collect();
    (mask, err)
}

/// RANSAC over minimal samples followed by two least-squares refits on the
/// consensus set. Returns the model and its inlier mask.
pub fn ransac(kind: MotionModelKind, pairs: &[Correspondence], cfg: &MotionConfig) -> Option<(AffineMotion, Vec<bool>)> {
    let k = kind.min_points();
    if pairs.len() < k {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, f64, AffineMotion)> = None;
    let mut subset = Vec::with_capacity(k);
    for _ in 0..cfg.ransac_iterations {
        subset.clear();
        subset.extend(sample(&mut rng, pairs.len(), k).into_iter().map(|i| pairs[i]));
        let Some(m) = fit_model(kind, &subset) else { continue };
        if !m.is_plausible() {
            continue;
        }
        let (mask, err) = inliers(&m, pairs, cfg.ransac_threshold);
        let count = mask.iter().filter(|&&b| b).count();
        let better = match &best {
            None => true,
            Some((c, e, _)) => count > *c || (count == *c && err < *e),
        };
        if better {
            best = Some((count, err, m));
        }
    }
    let (_, _, mut model) = best?;
    let mut mask = inliers(&model, pairs, cfg.ransac_threshold).0;
    for _ in 0..2 {
        let chosen: Vec<Correspondence> = pairs.iter().zip(&mask).filter(|(_, &b)| b).map(|(c, _)| *c).collect();
        match fit_model(kind, &chosen) {
            Some(m) if m.is_plausible() => model = m,
            _ => break,
        }
        mask = inliers(&model, pairs, cfg.ransac_threshold).0;
    }
    Some((model, mask))
}

/// Fit `kind` to the motion of the texture region of `cur` relative to
/// `reference`. Frames are padded to the block grid first.
pub fn estimate_texture_motion(
    cur: &Frame,
    reference: &Frame,
    cur_mask: &TextureMask,
    kind: MotionModelKind,
    cfg: &MotionConfig,
) -> Result<MotionEstimate, MotionError> {
    let (cur, reference) = (pad_frame(cur), pad_frame(reference));
    if (cur.width, cur.height) != (reference.width, reference.height) {
        return Err(MotionError::DimensionMismatch(
            (cur.width, cur.height),
            (reference.width, reference.height),
        ));
    }
    let grid = cur.grid_dims();
    if grid != (cur_mask.grid_w, cur_mask.grid_h) {
        return Err(MotionError::MaskSize {
            mask: (cur_mask.grid_w, cur_mask.grid_h),
            frame: grid,
        });
    }
    let cells = cur_mask.texture_cells();
    if cells.is_empty() {
        return Err(MotionError::NoTextureRegion);
    }
    let pairs = cell_correspondences(cur.y(), reference.y(), &cells, cfg.search_range);
    let requested = if cells.len() < cfg.min_cells {
        MotionModelKind::Translation
    } else {
        kind
    };
    let finish = |m: AffineMotion, mask: Vec<bool>, kind, degenerate| MotionEstimate {
        motion: m,
        kind,
        inlier_fraction: mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64,
        cells: cells.len(),
        degenerate_fallback: degenerate,
    };
    if let Some((m, mask)) = ransac(requested, &pairs, cfg) {
        return Ok(finish(m, mask, requested, false));
    }
    let (m, mask) = ransac(MotionModelKind::Translation, &pairs, cfg).expect("a translation fits any non-empty set");
    if requested != MotionModelKind::Translation {
        log::warn!(
            "degenerate {} fit on {} texture cells; using translation",
            requested.name(),
            cells.len()
        );
    }
    Ok(finish(m, mask, MotionModelKind::Translation, requested != MotionModelKind::Translation))
}
