//! Seeded synthetic training data: procedural textures against smooth
//! gradients, flat regions with a few edges, and small composite scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::patches::{frame_block_rgb, PatchDataset, NON_TEXTURE, PATCH, TEXTURE};
use crate::frame::Frame;
use crate::synth::{render_frame, SmoothField, TextureField, TextureKind};

#[derive(Debug, Clone, Serialize)]
pub struct DatasetConfig {
    pub texture: usize,
    pub non_texture: usize,
}

impl Default for DatasetConfig {
    /// About 2,000 texture and 40,000 non-texture patches, the 1:20.78
    /// imbalance of 1740 texture to 36148 non-texture images.
    fn default() -> Self {
        DatasetConfig {
            texture: 1925,
            non_texture: 40_000,
        }
    }
}

impl DatasetConfig {
    /// Keep the default class ratio at a different total size.
    pub fn with_total(total: usize) -> Self {
        let texture = ((total as f64) / (1.0 + 36148.0 / 1740.0)).round() as usize;
        DatasetConfig {
            texture,
            non_texture: total - texture,
        }
    }
}

/// Oversampling factor when rendering a patch from its continuous field.
const SUPERSAMPLE: usize = 4;

fn patch_from_frame(f: &Frame) -> super::patches::RgbImage {
    frame_block_rgb(f, 0, 0, PATCH, PATCH)
}

/// One texture patch from a random generator and position.
pub fn texture_patch(rng: &mut ChaCha8Rng) -> Frame {
    let kind = TextureKind::ALL[rng.gen_range(0..TextureKind::ALL.len())];
    texture_patch_of(kind, rng)
}

pub fn texture_patch_of(kind: TextureKind, rng: &mut ChaCha8Rng) -> Frame {
    let field = TextureField::random(kind, rng);
    let (ox, oy) = (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
    render_frame(PATCH, PATCH, SUPERSAMPLE, |x, y| field.sample(x + ox, y + oy))
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    HalfPlane { nx: f64, ny: f64, d: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, span: f64) -> Self {
        match rng.gen_range(0..3) {
            0 => {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let d = rng.gen_range(0.2..0.8) * span;
                let (nx, ny) = (t.cos(), t.sin());
                Shape::HalfPlane {
                    nx,
                    ny,
                    d: d * (nx + ny).abs().max(0.3),
                }
            }
            1 => Shape::Disc {
                cx: rng.gen_range(0.0..span),
                cy: rng.gen_range(0.0..span),
                r: rng.gen_range(0.15..0.6) * span,
            },
            _ => {
                let (x0, y0) = (rng.gen_range(-0.2..0.7) * span, rng.gen_range(-0.2..0.7) * span);
                Shape::Rect {
                    x0,
                    y0,
                    x1: x0 + rng.gen_range(0.2..0.8) * span,
                    y1: y0 + rng.gen_range(0.2..0.8) * span,
                }
            }
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::HalfPlane { nx, ny, d } => nx * x + ny * y < d,
            Shape::Disc { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) < r * r,
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
        }
    }
}

/// One non-texture patch: a smooth gradient, a flat region split by one
/// edge or shape, or a downscaled scene of a few smooth shapes; with mild
/// sensor-like noise.
pub fn non_texture_patch(rng: &mut ChaCha8Rng) -> Frame {
    let span = PATCH as f64;
    let f = match rng.gen_range(0..4) {
        0 => {
            let rg = rng.gen_range(0.0..80.0);
            let g = SmoothField::random(rng, span, rg);
            render_frame(PATCH, PATCH, SUPERSAMPLE, |x, y| g.sample(x, y))
        }
        1 => {
            let rflat = rng.gen_range(0.0..6.0);
            let flat = SmoothField::random(rng, span, rflat);
            render_frame(PATCH, PATCH, SUPERSAMPLE, |x, y| flat.sample(x, y))
        }
        2 => {
            let ra = rng.gen_range(0.0..30.0);
            let a = SmoothField::random(rng, span, ra);
            let rb = rng.gen_range(0.0..30.0);
            let b = SmoothField::random(rng, span, rb);
            let s = Shape::random(rng, span);
            render_frame(PATCH, PATCH, SUPERSAMPLE, |x, y| if s.contains(x, y) { a.sample(x, y) } else { b.sample(x, y) })
        }
        _ => {
            // A scene k times larger than the patch, area-averaged down.
            let k = [2.0, 4.0, 8.0][rng.gen_range(0..3)];
            let bg = SmoothField::random(rng, span * k, 60.0);
            let shapes: Vec<(Shape, SmoothField)> = (0..rng.gen_range(1..=3))
                .map(|_| (Shape::random(rng, span * k), SmoothField::random(rng, span * k, 40.0)))
                .collect();
            render_frame(PATCH, PATCH, SUPERSAMPLE, |x, y| {
                let (sx, sy) = (x * k, y * k);
                shapes
                    .iter()
                    .rev()
                    .find(|(s, _)| s.contains(sx, sy))
                    .map_or_else(|| bg.sample(sx, sy), |(_, f)| f.sample(sx, sy))
            })
        }
    };
    add_noise(f, rng.gen_range(0.0..2.0), rng)
}

fn add_noise(mut f: Frame, sigma: f64, rng: &mut ChaCha8Rng) -> Frame {
    if sigma <= 0.0 {
        return f;
    }
    let n = Normal::new(0.0, sigma).expect("sigma is positive");
    for p in &mut f.planes {
        for v in &mut p.data {
            *v = (*v as f64 + n.sample(rng)).round().clamp(0.0, 255.0) as u8;
        }
    }
    f
}

/// Generate a shuffled, seeded dataset.
pub fn synthesize_dataset(cfg: &DatasetConfig, seed: u64) -> PatchDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = std::iter::repeat_n(TEXTURE, cfg.texture)
        .chain(std::iter::repeat_n(NON_TEXTURE, cfg.non_texture))
        .collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }
    let mut out = PatchDataset::default();
    for label in labels {
        let frame = if label == TEXTURE {
            texture_patch(&mut rng)
        } else {
            non_texture_patch(&mut rng)
        };
        out.push(&patch_from_frame(&frame), label);
    }
    out
}
