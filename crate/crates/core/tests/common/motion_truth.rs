//! Ground-truth motion fixtures: a continuous texture rendered once as the
//! reference and once through a known rotzoom as the current frame.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texvc::analyzer::TextureMask;
use texvc::motion::AffineMotion;
use texvc::synth::{render_frame, TextureField, TextureKind};
use texvc::Frame;

pub struct MotionCase {
    pub truth: AffineMotion,
    pub reference: Frame,
    pub cur: Frame,
    pub mask: TextureMask,
}

/// Random rotzoom with |zoom - 1| <= 5%, |rotation| <= 2 degrees and
/// |shift| <= 8 px, on a 256x192 texture. The mask keeps cells whose
/// mapped footprint stays well inside the reference.
pub fn rotzoom_case(seed: u64, kind: TextureKind) -> MotionCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zoom: f64 = rng.gen_range(0.95..1.05);
    let theta = rng.gen_range(-2.0f64..2.0).to_radians();
    let (tx, ty) = (rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
    let truth = AffineMotion::rotzoom(zoom * theta.cos(), zoom * theta.sin(), tx, ty);
    let field = TextureField::random(kind, &mut rng);
    let (w, h) = (256, 192);
    let reference = render_frame(w, h, 2, |x, y| field.sample(x, y));
    // Pixel (i, j) covers [i, i+1) x [j, j+1); the motion maps pixel indices.
    let cur = render_frame(w, h, 2, |x, y| {
        let (u, v) = truth.apply(x - 0.5, y - 0.5);
        field.sample(u + 0.5, v + 0.5)
    });
    let (gw, gh) = (w / 16, h / 16);
    let mut labels = vec![false; gw * gh];
    for cy in 0..gh {
        for cx in 0..gw {
            let inside = [(0.0, 0.0), (15.0, 0.0), (0.0, 15.0), (15.0, 15.0)].iter().all(|&(ox, oy)| {
                let (u, v) = truth.apply(cx as f64 * 16.0 + ox, cy as f64 * 16.0 + oy);
                u >= 34.0 && v >= 34.0 && u <= w as f64 - 35.0 && v <= h as f64 - 35.0
            });
            labels[cy * gw + cx] = inside;
        }
    }
    MotionCase {
        truth,
        reference,
        cur,
        mask: TextureMask::from_labels(gw, gh, labels, 0),
    }
}

/// Largest a-term error relative to the largest-magnitude a-term, and the
/// largest translation error in pixels.
pub fn motion_errors(truth: &AffineMotion, got: &AffineMotion) -> (f64, f64) {
    let (t, g) = (truth.params(), got.params());
    let scale = t[..4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a = (0..4).map(|i| (t[i] - g[i]).abs()).fold(0.0, f64::max) / scale;
    let tr = (4..6).map(|i| (t[i] - g[i]).abs()).fold(0.0, f64::max);
    (a, tr)
}
