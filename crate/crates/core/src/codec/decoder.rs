//! Decoder: parses a TXC1 stream and rebuilds the encoder's reconstruction.

use super::bits::BitReader;
use super::block::{decode_residual, extract, predict_inter, predict_intra_dc, store, BlockMode, MIN_BLOCK};
use super::encoder::superblocks;
use super::stream::{parse, recon_crc, FrameType, StreamHeader};
use super::CodecError;
use crate::frame::{align16, BlockRect, Frame, Sequence};
use crate::motion::{warp_frame, AffineMotion};

#[derive(Debug, Clone)]
pub struct DecodedStream {
    pub header: StreamHeader,
    /// Reconstruction at the padded coding size.
    pub frames: Vec<Frame>,
    /// Frame-level motion of each inter frame.
    pub motion: Vec<Option<AffineMotion>>,
}

struct Refs<'a> {
    prev: Option<&'a Frame>,
    warped: Option<&'a Frame>,
    q: u32,
}

fn decode_node(r: &mut BitReader, refs: &Refs, recon: &mut Frame, rect: BlockRect) -> Result<(), CodecError> {
    let (w, h) = (recon.width, recon.height);
    let split = if !rect.fits(w, h) {
        true
    } else {
        rect.size > MIN_BLOCK && r.read_bit()?
    };
    if split {
        for q in rect.quadrants() {
            if q.x < w && q.y < h {
                decode_node(r, refs, recon, q)?;
            }
        }
        return Ok(());
    }
    let mode = match refs.prev {
        None => BlockMode::IntraDc,
        Some(_) => BlockMode::from_code(r.read_bits(2)? as u8).expect("2-bit code"),
    };
    let pred = match mode {
        BlockMode::IntraDc => predict_intra_dc(recon, rect),
        BlockMode::InterMv => {
            let mv = (r.read_se()?, r.read_se()?);
            predict_inter(refs.prev.expect("inter frame"), rect, mv)
        }
        BlockMode::GlobalWarp | BlockMode::Texture => extract(refs.warped.expect("inter frame"), rect),
    };
    let rec = if mode == BlockMode::Texture {
        pred
    } else {
        decode_residual(r, &pred, rect.size, refs.q)?
    };
    store(recon, rect, &rec);
    Ok(())
}

/// Decode to the padded coding size, checking every frame's
/// reconstruction checksum.
pub fn decode_padded(bytes: &[u8]) -> Result<DecodedStream, CodecError> {
    let stream = parse(bytes)?;
    let hd = stream.header;
    let (w, h) = (align16(hd.width), align16(hd.height));
    let mut frames: Vec<Frame> = Vec::with_capacity(hd.frame_count);
    let mut motion = Vec::with_capacity(hd.frame_count);
    let mut key_index = 0;
    for (i, rec) in stream.frames.iter().enumerate() {
        let m = rec.motion.map(AffineMotion::from_fixed);
        if rec.frame_type == FrameType::Key {
            key_index = i;
        }
        let warped = m.map(|m| warp_frame(&frames[key_index], &m));
        let refs = Refs {
            prev: if rec.frame_type == FrameType::Key { None } else { frames.last() },
            warped: warped.as_ref(),
            q: rec.q,
        };
        let mut recon = Frame::new(w, h, [0, 0, 0]).with_index(i);
        recon.display_width = hd.width;
        recon.display_height = hd.height;
        let mut r = BitReader::new(rec.payload);
        for sb in superblocks(w, h) {
            decode_node(&mut r, &refs, &mut recon, sb)?;
        }
        let used = r.position();
        if used.div_ceil(8) != rec.payload.len() as u64 || r.read_bits((8 - used % 8) as u32 % 8)? != 0 {
            return Err(CodecError::Invalid(format!("trailing data in frame {i} payload")));
        }
        if recon_crc(&recon) != stream.recon_crcs[i] {
            return Err(CodecError::ReconMismatch { frame: i });
        }
        frames.push(recon);
        motion.push(m);
    }
    Ok(DecodedStream { header: hd, frames, motion })
}

/// Decode to display size.
pub fn decode_sequence(bytes: &[u8]) -> Result<Sequence, CodecError> {
    let d = decode_padded(bytes)?;
    Sequence::new(d.frames.iter().map(Frame::cropped).collect(), (30, 1))
        .map_err(|e| CodecError::Invalid(e.to_string()))
}
