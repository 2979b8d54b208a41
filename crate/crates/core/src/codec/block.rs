//! Block prediction and residual coding shared by encoder and decoder.

use super::bits::{BitReader, BitSink};
use super::transform::{dequantize_inverse, transform_quantize, zigzag};
use super::CodecError;
use crate::frame::{BlockRect, Frame, Plane};

/// Top-level coding unit.
pub const SUPERBLOCK: usize = 64;
/// Smallest quadtree leaf.
pub const MIN_BLOCK: usize = 16;
/// Luma transform size; chroma uses half of it.
pub const LUMA_TU: usize = 16;
/// Largest coefficient magnitude the decoder accepts.
const MAX_LEVEL: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BlockMode {
    IntraDc,
    InterMv,
    GlobalWarp,
    Texture,
}

impl BlockMode {
    pub const ALL: [BlockMode; 4] = [BlockMode::IntraDc, BlockMode::InterMv, BlockMode::GlobalWarp, BlockMode::Texture];

    /// 2-bit code on inter frames.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockMode::IntraDc => "INTRA_DC",
            BlockMode::InterMv => "INTER_MV",
            BlockMode::GlobalWarp => "GLOBAL_WARP",
            BlockMode::Texture => "TEXTURE",
        }
    }
}

/// Samples of one block: luma `s`x`s`, then U and V at `s/2`x`s/2`.
pub type BlockPixels = [Vec<u8>; 3];

/// Position and size of `rect` within plane `p`.
#[inline]
fn plane_rect(rect: BlockRect, p: usize) -> (usize, usize, usize) {
    if p == 0 {
        (rect.x, rect.y, rect.size)
    } else {
        (rect.x / 2, rect.y / 2, rect.size / 2)
    }
}

fn extract_plane(plane: &Plane, x: usize, y: usize, s: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(s * s);
    for r in y..y + s {
        out.extend_from_slice(&plane.row(r)[x..x + s]);
    }
    out
}

/// Copy `rect` out of a frame that contains it.
pub fn extract(frame: &Frame, rect: BlockRect) -> BlockPixels {
    std::array::from_fn(|p| {
        let (x, y, s) = plane_rect(rect, p);
        extract_plane(&frame.planes[p], x, y, s)
    })
}

/// Write block samples back into `frame`.
pub fn store(frame: &mut Frame, rect: BlockRect, px: &BlockPixels) {
    for (p, data) in px.iter().enumerate() {
        let (x, y, s) = plane_rect(rect, p);
        let plane = &mut frame.planes[p];
        for r in 0..s {
            let start = (y + r) * plane.width + x;
            plane.data[start..start + s].copy_from_slice(&data[r * s..(r + 1) * s]);
        }
    }
}

/// Flat prediction from the reconstructed row above and the column left of
/// the enclosing superblock, restricted to the block's columns and rows.
/// Samples inside the superblock are never read, so the prediction does not
/// depend on how the rest of the superblock is coded.
pub fn predict_intra_dc(recon: &Frame, rect: BlockRect) -> BlockPixels {
    let sb_x = rect.x / SUPERBLOCK * SUPERBLOCK;
    let sb_y = rect.y / SUPERBLOCK * SUPERBLOCK;
    std::array::from_fn(|p| {
        let (x, y, s) = plane_rect(rect, p);
        let (sx, sy, _) = plane_rect(BlockRect::new(sb_x, sb_y, SUPERBLOCK), p);
        let plane = &recon.planes[p];
        let (mut sum, mut n) = (0u32, 0u32);
        if sy > 0 {
            sum += plane.row(sy - 1)[x..x + s].iter().map(|&v| v as u32).sum::<u32>();
            n += s as u32;
        }
        if sx > 0 {
            sum += (y..y + s).map(|r| plane.get(sx - 1, r) as u32).sum::<u32>();
            n += s as u32;
        }
        let dc = (sum + n / 2).checked_div(n).map_or(128, |v| v as u8);
        vec![dc; s * s]
    })
}

/// Integer-pel luma displacement; chroma uses the halved vector with
/// half-pel bilinear interpolation. Reads outside the reference clamp to
/// its edge.
pub fn predict_inter(reference: &Frame, rect: BlockRect, mv: (i32, i32)) -> BlockPixels {
    let (mx, my) = (mv.0 as isize, mv.1 as isize);
    std::array::from_fn(|p| {
        let (x, y, s) = plane_rect(rect, p);
        let plane = &reference.planes[p];
        let mut out = Vec::with_capacity(s * s);
        if p == 0 {
            for r in 0..s {
                for c in 0..s {
                    out.push(plane.get_clamped((x + c) as isize + mx, (y + r) as isize + my));
                }
            }
            return out;
        }
        let (fx, fy) = ((mx & 1) as u32, (my & 1) as u32);
        let (ox, oy) = (mx >> 1, my >> 1);
        for r in 0..s {
            for c in 0..s {
                let (ix, iy) = ((x + c) as isize + ox, (y + r) as isize + oy);
                let p00 = plane.get_clamped(ix, iy) as u32;
                let p10 = plane.get_clamped(ix + 1, iy) as u32;
                let p01 = plane.get_clamped(ix, iy + 1) as u32;
                let p11 = plane.get_clamped(ix + 1, iy + 1) as u32;
                let v = p00 * (2 - fx) * (2 - fy) + p10 * fx * (2 - fy) + p01 * (2 - fx) * fy + p11 * fx * fy;
                out.push(((v + 2) >> 2) as u8);
            }
        }
        out
    })
}

/// Write one transform unit's levels: `ue(nnz)`, then for each non-zero
/// level in zig-zag order `ue(run)`, `ue(|level|-1)` and a sign bit.
fn write_levels<S: BitSink>(levels: &[i32], n: usize, sink: &mut S) {
    let nnz = levels.iter().filter(|&&l| l != 0).count();
    sink.put_ue(nnz as u32);
    let mut run = 0u32;
    for &i in zigzag(n) {
        let l = levels[i];
        if l == 0 {
            run += 1;
            continue;
        }
        sink.put_ue(run);
        sink.put_ue(l.unsigned_abs() - 1);
        sink.put_bit(l < 0);
        run = 0;
    }
}

fn read_levels(r: &mut BitReader, n: usize) -> Result<Vec<i32>, CodecError> {
    let mut levels = vec![0; n * n];
    let nnz = r.read_ue()? as usize;
    if nnz > n * n {
        return Err(CodecError::Invalid(format!("{nnz} coefficients in a {n}x{n} transform")));
    }
    let scan = zigzag(n);
    let mut pos = 0usize;
    for _ in 0..nnz {
        pos += r.read_ue()? as usize;
        if pos >= n * n {
            return Err(CodecError::Invalid("coefficient run past end of transform".into()));
        }
        let mag = r.read_ue()?;
        if mag >= MAX_LEVEL {
            return Err(CodecError::Invalid(format!("coefficient level {} out of range", mag as u64 + 1)));
        }
        let v = mag as i32 + 1;
        levels[scan[pos]] = if r.read_bit()? { -v } else { v };
        pos += 1;
    }
    Ok(levels)
}

/// Transform units of one plane block, raster order: (x, y) offsets.
fn tus(s: usize, n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..s / n).flat_map(move |ty| (0..s / n).map(move |tx| (tx * n, ty * n)))
}

fn tu_size(p: usize) -> usize {
    if p == 0 {
        LUMA_TU
    } else {
        LUMA_TU / 2
    }
}

/// Code the residual of `src` against `pred` (luma TUs, then U, then V)
/// and return the reconstruction and its squared error against `src`.
pub fn code_residual<S: BitSink>(src: &BlockPixels, pred: &BlockPixels, size: usize, q: u32, sink: &mut S) -> (BlockPixels, u64) {
    let mut ssd = 0u64;
    let recon = std::array::from_fn(|p| {
        let s = if p == 0 { size } else { size / 2 };
        let n = tu_size(p);
        let mut rec = pred[p].clone();
        let mut res = vec![0i32; n * n];
        for (ox, oy) in tus(s, n) {
            for r in 0..n {
                for c in 0..n {
                    let i = (oy + r) * s + ox + c;
                    res[r * n + c] = src[p][i] as i32 - pred[p][i] as i32;
                }
            }
            let levels = transform_quantize(&res, n, q);
            write_levels(&levels, n, sink);
            let back = dequantize_inverse(&levels, n, q);
            for r in 0..n {
                for c in 0..n {
                    let i = (oy + r) * s + ox + c;
                    rec[i] = (pred[p][i] as i32 + back[r * n + c]).clamp(0, 255) as u8;
                }
            }
        }
        ssd += squared_error(&src[p], &rec);
        rec
    });
    (recon, ssd)
}

/// Inverse of [`code_residual`].
pub fn decode_residual(r: &mut BitReader, pred: &BlockPixels, size: usize, q: u32) -> Result<BlockPixels, CodecError> {
    let mut out: BlockPixels = Default::default();
    for p in 0..3 {
        let s = if p == 0 { size } else { size / 2 };
        let n = tu_size(p);
        let mut rec = pred[p].clone();
        for (ox, oy) in tus(s, n) {
            let back = dequantize_inverse(&read_levels(r, n)?, n, q);
            for rr in 0..n {
                for c in 0..n {
                    let i = (oy + rr) * s + ox + c;
                    rec[i] = (pred[p][i] as i32 + back[rr * n + c]).clamp(0, 255) as u8;
                }
            }
        }
        out[p] = rec;
    }
    Ok(out)
}

pub fn squared_error(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64).sum()
}

#[cfg(test)]
fn block_ssd(a: &BlockPixels, b: &BlockPixels) -> u64 {
    (0..3).map(|p| squared_error(&a[p], &b[p])).sum()
}

#[cfg(test)]
mod tests {
    use super::super::bits::{BitCounter, BitWriter};
    use super::*;
    use proptest::prelude::*;

    fn noise_frame(w: usize, h: usize, seed: u64) -> Frame {
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s as u8
        };
        Frame::from_planes(
            Plane::from_fn(w, h, |_, _| next()),
            Plane::from_fn(w / 2, h / 2, |_, _| next()),
            Plane::from_fn(w / 2, h / 2, |_, _| next()),
        )
    }

    #[test]
    fn mode_codes_round_trip() {
        for m in BlockMode::ALL {
            assert_eq!(BlockMode::from_code(m.code()), Some(m));
        }
        assert_eq!(BlockMode::from_code(4), None);
    }

    #[test]
    fn intra_dc_uses_superblock_neighbours() {
        let mut f = Frame::new(128, 128, [0, 0, 0]);
        // Row 63 above the second superblock row, column 63 left of the
        // second superblock column.
        for x in 0..128 {
            f.planes[0].set(x, 63, 100);
        }
        for y in 0..128 {
            f.planes[0].set(63, y, 50);
        }
        let top_left = predict_intra_dc(&f, BlockRect::new(16, 16, 16));
        assert!(top_left[0].iter().all(|&v| v == 128));
        let inner = predict_intra_dc(&f, BlockRect::new(80, 96, 16));
        // Above row: 16 samples of 100; left column: rows 96..112 of 50.
        assert!(inner[0].iter().all(|&v| v == 75), "{}", inner[0][0]);
        assert!(inner[1].iter().all(|&v| v == 0));
    }

    #[test]
    fn inter_prediction_shifts_and_interpolates_chroma() {
        let f = noise_frame(64, 64, 3);
        let p = predict_inter(&f, BlockRect::new(16, 16, 16), (2, -4));
        assert_eq!(p[0][0], f.planes[0].get(18, 12));
        assert_eq!(p[1][0], f.planes[1].get(9, 6));
        let h = predict_inter(&f, BlockRect::new(16, 16, 16), (1, 0));
        let (a, b) = (f.planes[1].get(8, 8) as u32, f.planes[1].get(9, 8) as u32);
        assert_eq!(h[1][0] as u32, (2 * a + 2 * b + 2) >> 2);
        // Far outside: clamps to the corner.
        let c = predict_inter(&f, BlockRect::new(0, 0, 16), (-500, -500));
        assert!(c[0].iter().all(|&v| v == f.planes[0].get(0, 0)));
    }

    #[test]
    fn residual_closure_and_bit_count() {
        let src_f = noise_frame(64, 64, 9);
        let pred_f = noise_frame(64, 64, 10);
        for size in [16, 32, 64] {
            let rect = BlockRect::new(0, 0, size);
            let (src, pred) = (extract(&src_f, rect), extract(&pred_f, rect));
            let mut errors = Vec::new();
            for q in [1, 16, 40] {
                let mut w = BitWriter::new();
                let mut c = BitCounter::default();
                let (rec, ssd) = code_residual(&src, &pred, size, q, &mut w);
                let (rec2, ssd2) = code_residual(&src, &pred, size, q, &mut c);
                assert_eq!((&rec, ssd), (&rec2, ssd2));
                assert_eq!(w.bit_len(), c.bits);
                assert_eq!(ssd, block_ssd(&src, &rec));
                let bytes = w.finish();
                let mut r = BitReader::new(&bytes);
                assert_eq!(decode_residual(&mut r, &pred, size, q).unwrap(), rec);
                errors.push(ssd);
            }
            assert!(errors[0] < errors[1] && errors[1] < errors[2], "{errors:?}");
        }
    }

    #[test]
    fn zero_residual_costs_one_bit_per_tu() {
        let f = noise_frame(32, 32, 1);
        let rect = BlockRect::new(0, 0, 32);
        let px = extract(&f, rect);
        let mut c = BitCounter::default();
        let (rec, ssd) = code_residual(&px, &px, 32, 16, &mut c);
        assert_eq!((rec, ssd), (px, 0));
        assert_eq!(c.bits, 4 + 4 + 4);
    }

    #[test]
    fn corrupt_levels_are_rejected() {
        let mut w = BitWriter::new();
        w.put_ue(300);
        let bytes = w.finish();
        assert!(read_levels(&mut BitReader::new(&bytes), 16).is_err());
        let mut w = BitWriter::new();
        w.put_ue(1);
        w.put_ue(64);
        let bytes = w.finish();
        assert!(read_levels(&mut BitReader::new(&bytes), 8).is_err());
    }

    proptest! {
        #[test]
        fn store_extract_round_trip(cx in 0usize..4, cy in 0usize..4, seed in any::<u64>()) {
            let src = noise_frame(64, 64, seed);
            let mut dst = Frame::new(64, 64, [0, 0, 0]);
            let rect = BlockRect::new(cx * 16, cy * 16, 16);
            store(&mut dst, rect, &extract(&src, rect));
            prop_assert_eq!(extract(&dst, rect), extract(&src, rect));
        }
    }
}
