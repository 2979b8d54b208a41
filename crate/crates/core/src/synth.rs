//! Procedural textures, smooth content and synthetic test clips.
//!
//! Textures are continuous functions of position, so any sub-pixel shift or
//! warp of a texture can be rendered exactly rather than resampled.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::analyzer::TextureMask;
use crate::frame::{chroma_dim, Frame, Plane, Sequence, BLOCK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    /// Sum of sinusoids with frequencies in a narrow band.
    BandNoise,
    /// One or two superimposed sinusoidal gratings.
    Grating,
    /// Rotated checkerboard.
    Checkerboard,
    /// Smoothly interpolated white noise at a 1-3 pixel scale.
    FineNoise,
    /// Many sinusoids with 1/f amplitudes and random phases.
    RandomPhase,
}

impl TextureKind {
    pub const ALL: [TextureKind; 5] = [
        TextureKind::BandNoise,
        TextureKind::Grating,
        TextureKind::Checkerboard,
        TextureKind::FineNoise,
        TextureKind::RandomPhase,
    ];
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

/// A random texture, sampled at continuous luma coordinates.
#[derive(Debug, Clone)]
pub struct TextureField {
    pub kind: TextureKind,
    waves: Vec<Wave>,
    lattice_seed: u64,
    scale: f64,
    /// Checkerboard cell frequency and orientation.
    check: (f64, f64, f64),
    mean: f64,
    contrast: f64,
    tint: [f64; 2],
    chroma_gain: [f64; 2],
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let h = splitmix(seed ^ (i as u64).wrapping_mul(0x9E37_79B9) ^ (j as u64).wrapping_mul(0x85EB_CA6B_C2B2_AE35));
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn random_wave(rng: &mut ChaCha8Rng, fmin: f64, fmax: f64, amp: f64) -> Wave {
    let f = rng.gen_range(fmin..fmax);
    let theta = rng.gen_range(0.0..std::f64::consts::PI);
    Wave {
        fx: f * theta.cos(),
        fy: f * theta.sin(),
        phase: rng.gen_range(0.0..std::f64::consts::TAU),
        amp,
    }
}

impl TextureField {
    pub fn random(kind: TextureKind, rng: &mut ChaCha8Rng) -> Self {
        let mut waves = Vec::new();
        let mut scale = 1.0;
        let mut check = (0.0, 0.0, 0.0);
        match kind {
            TextureKind::BandNoise => {
                let lo = rng.gen_range(0.08..0.2);
                for _ in 0..12 {
                    waves.push(random_wave(rng, lo, lo + 0.12, 1.0));
                }
            }
            TextureKind::Grating => {
                let n = rng.gen_range(1..=2);
                for _ in 0..n {
                    waves.push(random_wave(rng, 0.1, 0.4, 1.0));
                }
            }
            TextureKind::Checkerboard => {
                check = (rng.gen_range(0.06..0.25), rng.gen_range(0.0..std::f64::consts::PI), rng.gen_range(0.0..1.0));
            }
            TextureKind::FineNoise => scale = rng.gen_range(1.0..3.0),
            TextureKind::RandomPhase => {
                for _ in 0..40 {
                    let f: f64 = rng.gen_range(0.05..0.45);
                    let w = random_wave(rng, f, f + 1e-9, 0.05 / f);
                    waves.push(w);
                }
            }
        }
        TextureField {
            kind,
            waves,
            lattice_seed: rng.gen(),
            scale,
            check,
            mean: rng.gen_range(70.0..185.0),
            contrast: rng.gen_range(28.0..60.0),
            tint: [rng.gen_range(-25.0..25.0), rng.gen_range(-25.0..25.0)],
            chroma_gain: [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)],
        }
    }

    /// Zero-mean pattern value, roughly within [-1, 1].
    fn pattern(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            TextureKind::FineNoise => {
                let (u, v) = (x / self.scale, y / self.scale);
                let (i, j) = (u.floor(), v.floor());
                let (tx, ty) = (smoothstep(u - i), smoothstep(v - j));
                let (i, j) = (i as i64, j as i64);
                let s = self.lattice_seed;
                let top = lattice(s, i, j) * (1.0 - tx) + lattice(s, i + 1, j) * tx;
                let bot = lattice(s, i, j + 1) * (1.0 - tx) + lattice(s, i + 1, j + 1) * tx;
                (top * (1.0 - ty) + bot * ty) * 1.6
            }
            TextureKind::Checkerboard => {
                let (f, theta, off) = self.check;
                let u = x * theta.cos() + y * theta.sin();
                let v = -x * theta.sin() + y * theta.cos();
                let a = ((u * f + off).floor() + (v * f + off).floor()) as i64;
                if a.rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => {
                let s: f64 = self
                    .waves
                    .iter()
                    .map(|w| w.amp * (std::f64::consts::TAU * (w.fx * x + w.fy * y) + w.phase).sin())
                    .sum();
                let norm: f64 = self.waves.iter().map(|w| w.amp * w.amp).sum::<f64>().sqrt();
                s / norm.max(1e-12) * std::f64::consts::SQRT_2
            }
        }
    }

    /// (Y, U, V) at luma coordinates (x, y).
    pub fn sample(&self, x: f64, y: f64) -> [f64; 3] {
        let p = self.pattern(x, y);
        let luma = self.mean + self.contrast * p;
        [
            luma,
            128.0 + self.tint[0] + self.chroma_gain[0] * self.contrast * p,
            128.0 + self.tint[1] + self.chroma_gain[1] * self.contrast * p,
        ]
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Render a `width`x`height` 4:2:0 frame from a continuous (Y, U, V) field.
/// Each luma pixel averages `ss`x`ss` point samples over its footprint; each
/// chroma sample averages over its 2x2 luma footprint.
pub fn render_frame(width: usize, height: usize, ss: usize, field: impl Fn(f64, f64) -> [f64; 3]) -> Frame {
    let ss = ss.max(1);
    let (cw, ch) = (chroma_dim(width), chroma_dim(height));
    let mut ysum = vec![0.0; width * height];
    let mut usum = vec![0.0; cw * ch];
    let mut vsum = vec![0.0; cw * ch];
    let inv = 1.0 / ss as f64;
    for y in 0..height {
        for x in 0..width {
            for j in 0..ss {
                for i in 0..ss {
                    let s = field(x as f64 + (i as f64 + 0.5) * inv, y as f64 + (j as f64 + 0.5) * inv);
                    ysum[y * width + x] += s[0];
                    let c = (y / 2) * cw + x / 2;
                    usum[c] += s[1];
                    vsum[c] += s[2];
                }
            }
        }
    }
    let n = (ss * ss) as f64;
    let yp = Plane {
        width,
        height,
        data: ysum.iter().map(|&v| to_u8(v / n)).collect(),
    };
    let mut counts = vec![0.0; cw * ch];
    for y in 0..height {
        for x in 0..width {
            counts[(y / 2) * cw + x / 2] += n;
        }
    }
    let up = Plane {
        width: cw,
        height: ch,
        data: usum.iter().zip(&counts).map(|(&v, &c)| to_u8(v / c)).collect(),
    };
    let vp = Plane {
        width: cw,
        height: ch,
        data: vsum.iter().zip(&counts).map(|(&v, &c)| to_u8(v / c)).collect(),
    };
    Frame::from_planes(yp, up, vp)
}

/// A smooth (Y, U, V) field: a low-order polynomial shading.
#[derive(Debug, Clone)]
pub struct SmoothField {
    base: [f64; 3],
    gx: [f64; 3],
    gy: [f64; 3],
    curv: f64,
    centre: (f64, f64),
}

impl SmoothField {
    /// Random shading whose luma changes by at most about `range` levels
    /// over a `size`-pixel span.
    pub fn random(rng: &mut ChaCha8Rng, size: f64, range: f64) -> Self {
        let g = range / size.max(1.0);
        SmoothField {
            base: [rng.gen_range(40.0..215.0), rng.gen_range(90.0..166.0), rng.gen_range(90.0..166.0)],
            gx: [rng.gen_range(-g..g), rng.gen_range(-g..g) * 0.3, rng.gen_range(-g..g) * 0.3],
            gy: [rng.gen_range(-g..g), rng.gen_range(-g..g) * 0.3, rng.gen_range(-g..g) * 0.3],
            curv: rng.gen_range(-1.0..1.0) * range / (size * size).max(1.0),
            centre: (rng.gen_range(0.0..size), rng.gen_range(0.0..size)),
        }
    }

    pub fn sample(&self, x: f64, y: f64) -> [f64; 3] {
        let (dx, dy) = (x - self.centre.0, y - self.centre.1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            out[c] = self.base[c] + self.gx[c] * dx + self.gy[c] * dy;
        }
        out[0] += self.curv * (dx * dx + dy * dy);
        out
    }
}

/// Parameters of the panning test clip.
#[derive(Debug, Clone)]
pub struct PanningConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Background translation in pixels per frame (content moves left).
    pub speed: f64,
    pub seed: u64,
    pub kind: TextureKind,
}

impl Default for PanningConfig {
    fn default() -> Self {
        PanningConfig {
            width: 192,
            height: 128,
            frames: 64,
            speed: 2.0,
            seed: 0,
            kind: TextureKind::BandNoise,
        }
    }
}

/// A synthetic clip with its ground-truth texture masks.
#[derive(Debug, Clone)]
pub struct SyntheticClip {
    pub sequence: Sequence,
    pub masks: Vec<TextureMask>,
}

/// A clip whose background texture pans horizontally under a static smooth
/// sky band and a smooth ellipse. A cell is texture in the ground-truth mask
/// iff none of its pixels touch the sky or the ellipse.
pub fn panning_sequence(cfg: &PanningConfig) -> SyntheticClip {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let texture = TextureField::random(cfg.kind, &mut rng);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let sky = SmoothField::random(&mut rng, w, 40.0);
    let body = SmoothField::random(&mut rng, w, 50.0);
    let sky_bottom = (h * 0.25).round();
    let (ex, ey) = (w * 0.55, h * 0.62);
    let (rx, ry) = (w * 0.18, h * 0.2);
    let ellipse = |x: f64, y: f64| ((x - ex) / rx).powi(2) + ((y - ey) / ry).powi(2);

    let mut frames = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let shift = cfg.speed * t as f64;
        let f = render_frame(cfg.width, cfg.height, 2, |x, y| {
            if y < sky_bottom {
                sky.sample(x, y)
            } else if ellipse(x, y) <= 1.0 {
                body.sample(x, y)
            } else {
                texture.sample(x + shift, y)
            }
        });
        frames.push(f.with_index(t));
    }

    let (gw, gh) = (cfg.width.div_ceil(BLOCK), cfg.height.div_ceil(BLOCK));
    let mut labels = vec![false; gw * gh];
    for cy in 0..gh {
        for cx in 0..gw {
            // Extend the test by one pixel so anti-aliased edges count.
            let (x0, y0) = ((cx * BLOCK) as f64 - 1.0, (cy * BLOCK) as f64 - 1.0);
            let (x1, y1) = (x0 + BLOCK as f64 + 2.0, y0 + BLOCK as f64 + 2.0);
            let mut clean = y0.max(0.0) >= sky_bottom;
            let mut y = y0;
            while clean && y <= y1 {
                let mut x = x0;
                while x <= x1 {
                    if ellipse(x, y) <= 1.0 {
                        clean = false;
                        break;
                    }
                    x += 0.5;
                }
                y += 0.5;
            }
            // Cells past the picture edge are padding copies of edge pixels,
            // which still move with the background.
            labels[cy * gw + cx] = clean;
        }
    }
    let masks = (0..cfg.frames)
        .map(|t| TextureMask::from_labels(gw, gh, labels.clone(), t))
        .collect();
    SyntheticClip {
        sequence: Sequence::new(frames, (30, 1)).expect("frames share dimensions"),
        masks,
    }
}

/// A still texture frame with every cell marked texture.
pub fn texture_frame(width: usize, height: usize, kind: TextureKind, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = TextureField::random(kind, &mut rng);
    render_frame(width, height, 2, |x, y| field.sample(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_constant_field() {
        let f = render_frame(5, 3, 3, |_, _| [100.0, 50.0, 200.0]);
        assert!(f.planes[0].data.iter().all(|&v| v == 100));
        assert_eq!((f.planes[1].width, f.planes[1].height), (3, 2));
        assert!(f.planes[1].data.iter().all(|&v| v == 50));
        assert!(f.planes[2].data.iter().all(|&v| v == 200));
    }

    #[test]
    fn textures_have_contrast() {
        for (i, kind) in TextureKind::ALL.into_iter().enumerate() {
            let f = texture_frame(64, 64, kind, i as u64);
            let y = &f.planes[0].data;
            let mean = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
            let var = y.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / y.len() as f64;
            assert!(var.sqrt() > 10.0, "{kind:?} std {}", var.sqrt());
        }
    }

    #[test]
    fn panning_background_shifts_by_speed() {
        let cfg = PanningConfig {
            width: 96,
            height: 64,
            frames: 3,
            ..Default::default()
        };
        let clip = panning_sequence(&cfg);
        let (f0, f1) = (&clip.sequence.frames[0], &clip.sequence.frames[1]);
        let m = &clip.masks[1];
        let mut checked = 0;
        for (cx, cy) in m.texture_cells() {
            for y in cy * 16..cy * 16 + 16 {
                for x in cx * 16..(cx * 16 + 16).min(94) {
                    assert_eq!(f1.y().get(x, y), f0.y().get(x + 2, y));
                    checked += 1;
                }
            }
        }
        assert!(checked > 500);
        assert!(m.texture_count() < m.labels.len());
    }

    #[test]
    fn panning_is_deterministic() {
        let cfg = PanningConfig {
            width: 48,
            height: 32,
            frames: 2,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(panning_sequence(&cfg).sequence, panning_sequence(&cfg).sequence);
    }
}
