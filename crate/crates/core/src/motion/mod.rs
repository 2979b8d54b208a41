//! Parametric motion between frames: the affine model, its fixed-point
//! warp, and estimation from the texture region of a frame.

mod estimate;
mod search;

pub use estimate::{
    estimate_texture_motion, fit_model, ransac, Correspondence, MotionConfig, MotionError, MotionEstimate,
};
pub use search::{block_sad, full_search, SearchResult};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frame::{BlockRect, Frame, Plane};

/// Fractional bits of the fixed-point motion parameters.
pub const FIXED_SHIFT: u32 = 16;
pub const FIXED_ONE: i64 = 1 << FIXED_SHIFT;

/// Maps current-frame luma coordinates into the reference frame:
/// `x' = a11*x + a12*y + tx`, `y' = a21*x + a22*y + ty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMotion {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for AffineMotion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineMotion {
    pub const IDENTITY: AffineMotion = AffineMotion {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineMotion {
            tx,
            ty,
            ..Self::IDENTITY
        }
    }

    /// Rotation and uniform zoom: `[[a, -b], [b, a]]`.
    pub fn rotzoom(a: f64, b: f64, tx: f64, ty: f64) -> Self {
        AffineMotion {
            a11: a,
            a12: -b,
            a21: b,
            a22: a,
            tx,
            ty,
        }
    }

    pub fn from_params(p: [f64; 6]) -> Self {
        AffineMotion {
            a11: p[0],
            a12: p[1],
            a21: p[2],
            a22: p[3],
            tx: p[4],
            ty: p[5],
        }
    }

    /// `[a11, a12, a21, a22, tx, ty]`.
    pub fn params(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a11 * x + self.a12 * y + self.tx,
            self.a21 * x + self.a22 * y + self.ty,
        )
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Finite parameters with |det| in [0.25, 4].
    pub fn is_plausible(&self) -> bool {
        let d = self.det().abs();
        self.params().iter().all(|v| v.is_finite()) && (0.25..=4.0).contains(&d)
    }

    /// Q16.16 parameters, rounded to nearest and saturated to i32.
    pub fn to_fixed(&self) -> [i32; 6] {
        self.params()
            .map(|v| (v * FIXED_ONE as f64).round().clamp(i32::MIN as f64, i32::MAX as f64) as i32)
    }

    pub fn from_fixed(p: [i32; 6]) -> Self {
        Self::from_params(p.map(|v| v as f64 / FIXED_ONE as f64))
    }

    /// The motion as it survives a round trip through the bitstream.
    pub fn quantized(&self) -> Self {
        Self::from_fixed(self.to_fixed())
    }
}

impl fmt::Display for AffineMotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Values that round to zero print without a sign.
        let p = self.params().map(|v| if v.abs() < 5e-7 { 0.0 } else { v });
        write!(f, "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6}", p[0], p[1], p[2], p[3], p[4], p[5])
    }
}

impl FromStr for AffineMotion {
    type Err = String;

    /// Six whitespace-separated numbers in [`AffineMotion::params`] order.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format!("bad motion parameter {t:?}")))
            .collect::<Result<_, _>>()?;
        let p: [f64; 6] = v.try_into().map_err(|_| "expected 6 motion parameters".to_string())?;
        Ok(Self::from_params(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MotionModelKind {
    /// tx, ty.
    Translation,
    /// Uniform zoom, rotation, tx, ty.
    #[default]
    RotZoom,
    /// All six parameters.
    Affine,
}

impl MotionModelKind {
    pub fn code(self) -> u8 {
        match self {
            MotionModelKind::Translation => 0,
            MotionModelKind::RotZoom => 1,
            MotionModelKind::Affine => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MotionModelKind::Translation),
            1 => Some(MotionModelKind::RotZoom),
            2 => Some(MotionModelKind::Affine),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionModelKind::Translation => "translation",
            MotionModelKind::RotZoom => "rotzoom",
            MotionModelKind::Affine => "affine",
        }
    }

    /// Correspondences needed to determine the model.
    pub fn min_points(self) -> usize {
        match self {
            MotionModelKind::Translation => 1,
            MotionModelKind::RotZoom => 2,
            MotionModelKind::Affine => 3,
        }
    }
}

impl FromStr for MotionModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "translation" => Ok(MotionModelKind::Translation),
            "rotzoom" => Ok(MotionModelKind::RotZoom),
            "affine" => Ok(MotionModelKind::Affine),
            _ => Err(format!("unknown motion model {s:?} (translation, rotzoom, affine)")),
        }
    }
}

/// Integer mapping used by the warp, with parameters in Q16.16.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedMap {
    pub p: [i64; 6],
}

/// Integer sample position and whether the right/lower neighbour carries
/// non-zero interpolation weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Support {
    pub x: i64,
    pub y: i64,
    pub right: bool,
    pub below: bool,
}

impl FixedMap {
    pub fn luma(m: &AffineMotion) -> Self {
        FixedMap {
            p: m.to_fixed().map(i64::from),
        }
    }

    /// Chroma keeps the linear terms and halves the translation.
    pub fn chroma(m: &AffineMotion) -> Self {
        let mut p = Self::luma(m).p;
        p[4] >>= 1;
        p[5] >>= 1;
        FixedMap { p }
    }

    /// Mapped position of integer pixel (x, y), in Q16.16.
    #[inline]
    pub fn map(&self, x: i64, y: i64) -> (i64, i64) {
        let p = &self.p;
        (p[0] * x + p[1] * y + p[4], p[2] * x + p[3] * y + p[5])
    }

    /// The reference pixels the warp reads for destination (x, y).
    #[inline]
    pub fn support(&self, x: i64, y: i64) -> Support {
        let (mx, my) = self.map(x, y);
        Support {
            x: mx >> FIXED_SHIFT,
            y: my >> FIXED_SHIFT,
            right: (mx & 0xFFFF) >> 8 != 0,
            below: (my & 0xFFFF) >> 8 != 0,
        }
    }
}

/// Bilinear sample at a Q16.16 position with 8-bit weights and edge clamping.
#[inline]
fn sample_bilinear(src: &Plane, mx: i64, my: i64) -> u8 {
    let (ix, iy) = ((mx >> FIXED_SHIFT) as isize, (my >> FIXED_SHIFT) as isize);
    let fx = (mx & 0xFFFF) >> 8;
    let fy = (my & 0xFFFF) >> 8;
    let p00 = src.get_clamped(ix, iy) as i64;
    let p10 = src.get_clamped(ix + 1, iy) as i64;
    let p01 = src.get_clamped(ix, iy + 1) as i64;
    let p11 = src.get_clamped(ix + 1, iy + 1) as i64;
    let v = p00 * (256 - fx) * (256 - fy) + p10 * fx * (256 - fy) + p01 * (256 - fx) * fy + p11 * fx * fy;
    ((v + 32768) >> 16) as u8
}

/// Warp one plane: destination (x, y) samples `src` at `map(x, y)`.
pub fn warp_plane(src: &Plane, map: &FixedMap) -> Plane {
    let mut out = Plane::new(src.width, src.height, 0);
    for y in 0..src.height {
        for x in 0..src.width {
            let (mx, my) = map.map(x as i64, y as i64);
            out.data[y * src.width + x] = sample_bilinear(src, mx, my);
        }
    }
    out
}

/// Predict a frame from `reference` under motion `m` (quantized to Q16.16).
pub fn warp_frame(reference: &Frame, m: &AffineMotion) -> Frame {
    let luma = FixedMap::luma(m);
    let chroma = FixedMap::chroma(m);
    let mut out = reference.clone();
    out.planes = [
        warp_plane(&reference.planes[0], &luma),
        warp_plane(&reference.planes[1], &chroma),
        warp_plane(&reference.planes[2], &chroma),
    ];
    out
}

/// Mapped corners of a block: top-left, top-right, bottom-left,
/// bottom-right, using the last pixel row and column of the block.
pub fn warp_rect(m: &AffineMotion, rect: BlockRect) -> [(f64, f64); 4] {
    let (x0, y0) = (rect.x as f64, rect.y as f64);
    let (x1, y1) = (x0 + rect.size as f64 - 1.0, y0 + rect.size as f64 - 1.0);
    [m.apply(x0, y0), m.apply(x1, y0), m.apply(x0, y1), m.apply(x1, y1)]
}
