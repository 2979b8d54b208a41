//! Brute-force texture-block oracle and random (rect, motion, mask) cases.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texvc::analyzer::TextureMask;
use texvc::motion::AffineMotion;
use texvc::BlockRect;

fn texture_pixel(mask: &TextureMask, x: f64, y: f64) -> bool {
    let (w, h) = ((mask.grid_w * 16) as f64, (mask.grid_h * 16) as f64);
    x >= 0.0 && y >= 0.0 && x < w && y < h && mask.is_texture((x / 16.0) as usize, (y / 16.0) as usize)
}

/// Visit every pixel of the block, and every reference pixel its bilinear
/// warp gives non-zero weight, using the motion as stored in the stream.
/// Q16.16 parameters times pixel coordinates are exact in f64.
pub fn brute_force(rect: BlockRect, cur: &TextureMask, reference: &TextureMask, m: &AffineMotion) -> bool {
    let p = m.quantized().params();
    let weight_step = 1.0 / 256.0;
    for y in rect.y..rect.y + rect.size {
        for x in rect.x..rect.x + rect.size {
            let (xf, yf) = (x as f64, y as f64);
            if !texture_pixel(cur, xf, yf) {
                return false;
            }
            let sx = p[0] * xf + p[1] * yf + p[4];
            let sy = p[2] * xf + p[3] * yf + p[5];
            let (ix, iy) = (sx.floor(), sy.floor());
            let mut xs = vec![ix];
            if sx - ix >= weight_step {
                xs.push(ix + 1.0);
            }
            let mut ys = vec![iy];
            if sy - iy >= weight_step {
                ys.push(iy + 1.0);
            }
            for &ry in &ys {
                for &rx in &xs {
                    if !texture_pixel(reference, rx, ry) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

pub struct TextureCase {
    pub rect: BlockRect,
    pub cur: TextureMask,
    pub reference: TextureMask,
    pub motion: AffineMotion,
}

fn random_mask(rng: &mut ChaCha8Rng, gw: usize, gh: usize) -> TextureMask {
    let p_texture = [1.0, 0.95, 0.8][rng.gen_range(0..3)];
    let labels = (0..gw * gh).map(|_| rng.gen_bool(p_texture)).collect();
    TextureMask::from_labels(gw, gh, labels, 0)
}

/// A random case on a grid of up to 8x8 cells. Blocks may straddle the
/// frame edge; motions include fractional shifts, rotations and zooms that
/// push the footprint across cells or out of the frame.
pub fn texture_case(seed: u64) -> TextureCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gw, gh) = (rng.gen_range(2..=8), rng.gen_range(2..=8));
    let cur = random_mask(&mut rng, gw, gh);
    let reference = random_mask(&mut rng, gw, gh);
    let size = [16, 32, 64][rng.gen_range(0..3)];
    let rect = BlockRect::new(
        rng.gen_range(0..gw.div_ceil(size / 16)) * size,
        rng.gen_range(0..gh.div_ceil(size / 16)) * size,
        size,
    );
    let shift = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => rng.gen_range(-20i32..=20) as f64,
        1 => rng.gen_range(-20.0..20.0),
        _ => rng.gen_range(-2.0..2.0),
    };
    let (tx, ty) = (shift(&mut rng), shift(&mut rng));
    let motion = match rng.gen_range(0..3) {
        0 => AffineMotion::translation(tx, ty),
        1 => {
            let zoom: f64 = rng.gen_range(0.9..1.1);
            let theta: f64 = rng.gen_range(-0.2..0.2);
            AffineMotion::rotzoom(zoom * theta.cos(), zoom * theta.sin(), tx, ty)
        }
        _ => AffineMotion::from_params([
            rng.gen_range(0.9..1.1),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(0.9..1.1),
            tx,
            ty,
        ]),
    };
    TextureCase {
        rect,
        cur,
        reference,
        motion,
    }
}
