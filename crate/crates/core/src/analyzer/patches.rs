//! 16x16 RGB patches: colour conversion, area resizing and the crop
//! geometry that turns source images into classifier samples.

use std::io::{Read, Write};

use super::AnalyzerError;
use crate::frame::{Frame, BLOCK};
use crate::nn::Tensor4;

/// Side of a classifier patch.
pub const PATCH: usize = BLOCK;
/// Values per patch: 3 channels of 16x16.
pub const PATCH_LEN: usize = 3 * PATCH * PATCH;

/// Non-texture class index.
pub const NON_TEXTURE: usize = 0;
/// Texture class index.
pub const TEXTURE: usize = 1;

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        RgbImage { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Planar channel-major copy (R plane, G plane, B plane).
    pub fn to_chw(&self) -> Vec<u8> {
        let n = self.width * self.height;
        let mut out = vec![0u8; 3 * n];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * n + i] = px[c];
            }
        }
        out
    }
}

/// BT.601 full-range YCbCr to RGB.
#[inline]
pub fn ycbcr_to_rgb(y: u8, u: u8, v: u8) -> [u8; 3] {
    let (y, u, v) = (y as f64, u as f64 - 128.0, v as f64 - 128.0);
    let q = |x: f64| x.round().clamp(0.0, 255.0) as u8;
    [q(y + 1.402 * v), q(y - 0.344_136 * u - 0.714_136 * v), q(y + 1.772 * u)]
}

/// RGB view of a block of a 4:2:0 frame, chroma upsampled by repetition.
pub fn frame_block_rgb(frame: &Frame, x0: usize, y0: usize, w: usize, h: usize) -> RgbImage {
    let (yp, up, vp) = (&frame.planes[0], &frame.planes[1], &frame.planes[2]);
    RgbImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x0 + x, y0 + y);
        ycbcr_to_rgb(yp.get(fx, fy), up.get(fx / 2, fy / 2), vp.get(fx / 2, fy / 2))
    })
}

/// Area-average (box filter) resize. Each output pixel is the
/// coverage-weighted mean of the source pixels under its footprint.
pub fn resize_area(img: &RgbImage, out_w: usize, out_h: usize) -> RgbImage {
    let wx = axis_weights(img.width, out_w);
    let wy = axis_weights(img.height, out_h);
    let mut acc = vec![0.0f64; out_w * out_h * 3];
    for (oy, ys) in wy.iter().enumerate() {
        for &(sy, fy) in ys {
            for (ox, xs) in wx.iter().enumerate() {
                for &(sx, fx) in xs {
                    let p = img.get(sx, sy);
                    let o = 3 * (oy * out_w + ox);
                    for c in 0..3 {
                        acc[o + c] += fx * fy * p[c] as f64;
                    }
                }
            }
        }
    }
    RgbImage {
        width: out_w,
        height: out_h,
        data: acc.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
    }
}

/// For every output index, the source indices it covers and their
/// normalised coverage weights.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let mut v = Vec::new();
            let mut s = lo.floor() as usize;
            while (s as f64) < hi && s < src {
                let cover = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                if cover > 0.0 {
                    v.push((s, cover / scale));
                }
                s += 1;
            }
            v
        })
        .collect()
}

/// Labelled 16x16x3 samples, stored channel-major per patch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchDataset {
    pub patches: Vec<u8>,
    pub labels: Vec<usize>,
}

impl PatchDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[non-texture, texture]` counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let t = self.labels.iter().filter(|&&l| l == TEXTURE).count();
        [self.labels.len() - t, t]
    }

    pub fn patch(&self, i: usize) -> &[u8] {
        &self.patches[i * PATCH_LEN..(i + 1) * PATCH_LEN]
    }

    /// Add a 16x16 image.
    pub fn push(&mut self, img: &RgbImage, label: usize) {
        assert_eq!((img.width, img.height), (PATCH, PATCH), "patches are 16x16");
        self.patches.extend_from_slice(&img.to_chw());
        self.labels.push(label);
    }

    pub fn extend(&mut self, other: &PatchDataset) {
        self.patches.extend_from_slice(&other.patches);
        self.labels.extend_from_slice(&other.labels);
    }

    /// Network input for the given samples.
    pub fn batch(&self, indices: &[usize]) -> Tensor4<f32> {
        let mut data = Vec::with_capacity(indices.len() * PATCH_LEN);
        for &i in indices {
            data.extend(self.patch(i).iter().map(|&v| normalize(v)));
        }
        Tensor4::from_vec([indices.len(), 3, PATCH, PATCH], data)
    }
}

/// Dataset file magic. Layout, integers little-endian: magic, version u32,
/// sample count u32, one label byte per sample, then the samples'
/// channel-major bytes.
pub const DATASET_MAGIC: &[u8; 4] = b"TXDS";
pub const DATASET_VERSION: u32 = 1;

impl PatchDataset {
    pub fn write<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        sink.write_all(DATASET_MAGIC)?;
        sink.write_all(&DATASET_VERSION.to_le_bytes())?;
        sink.write_all(&(self.len() as u32).to_le_bytes())?;
        let labels: Vec<u8> = self.labels.iter().map(|&l| l as u8).collect();
        sink.write_all(&labels)?;
        sink.write_all(&self.patches)?;
        sink.flush()
    }

    pub fn read<R: Read>(mut source: R) -> Result<Self, AnalyzerError> {
        let bad = |m: &str| AnalyzerError::DatasetFormat(m.to_string());
        let mut head = [0u8; 12];
        source.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
        if &head[..4] != DATASET_MAGIC {
            return Err(bad("bad magic, not a TXDS dataset"));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != DATASET_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let mut labels = vec![0u8; n];
        source.read_exact(&mut labels).map_err(|_| bad("truncated labels"))?;
        if labels.iter().any(|&l| l as usize > TEXTURE) {
            return Err(bad("label out of range"));
        }
        let mut patches = vec![0u8; n * PATCH_LEN];
        source.read_exact(&mut patches).map_err(|_| bad("truncated samples"))?;
        if source.read(&mut [0u8; 1])? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(PatchDataset {
            patches,
            labels: labels.into_iter().map(usize::from).collect(),
        })
    }
}

/// Map 8-bit samples to roughly [-2, 2].
#[inline]
pub fn normalize(v: u8) -> f32 {
    (v as f32 - 128.0) / 64.0
}

/// Turn source images of one class into patches. Texture sources are cut
/// into non-overlapping 256x256 and 128x128 crops, each resized to 16x16;
/// non-texture sources are resized whole.
pub fn prepare_patches(sources: &[RgbImage], class: usize) -> Result<PatchDataset, AnalyzerError> {
    let mut out = PatchDataset::default();
    for src in sources {
        if class == TEXTURE {
            if src.width < 128 || src.height < 128 {
                return Err(AnalyzerError::SourceTooSmall {
                    width: src.width,
                    height: src.height,
                    crop: 128,
                });
            }
            for crop in [256, 128] {
                for cy in 0..src.height / crop {
                    for cx in 0..src.width / crop {
                        let c = src.crop(cx * crop, cy * crop, crop, crop);
                        out.push(&resize_area(&c, PATCH, PATCH), TEXTURE);
                    }
                }
            }
        } else {
            out.push(&resize_area(src, PATCH, PATCH), NON_TEXTURE);
        }
    }
    Ok(out)
}
