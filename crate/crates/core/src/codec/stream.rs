//! TXC1 container: file header, length-prefixed frame records and a
//! checksum footer. Multi-byte fields are little-endian.

use super::CodecError;
use crate::frame::Frame;
use crate::motion::MotionModelKind;

pub const MAGIC: &[u8; 4] = b"TXC1";
pub const VERSION: u8 = 1;
/// Magic, version, width, height, frame count, group size, model kind.
pub const FILE_HEADER_BYTES: usize = 4 + 1 + 2 + 2 + 2 + 1 + 1;
/// Type, q level and payload length; inter frames add 24 bytes of motion.
pub const FRAME_HEADER_BYTES: usize = 1 + 1 + 4;
pub const MOTION_BYTES: usize = 6 * 4;

/// Container bytes outside the frame records for `frames` frames: the
/// file header, one reconstruction CRC per frame and the stream CRC.
pub fn overhead_bytes(frames: usize) -> usize {
    FILE_HEADER_BYTES + 4 * frames + 4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameType {
    Key,
    Inter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    /// Display dimensions; coding uses them rounded up to 16.
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub gf_group_size: usize,
    pub model: MotionModelKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord<'a> {
    pub frame_type: FrameType,
    pub q: u32,
    /// Q16.16 motion parameters, present on inter frames.
    pub motion: Option<[i32; 6]>,
    pub payload: &'a [u8],
}

#[derive(Debug, Clone)]
pub struct ParsedStream<'a> {
    pub header: StreamHeader,
    pub frames: Vec<FrameRecord<'a>>,
    pub recon_crcs: Vec<u32>,
}

/// CRC32 over the Y, U and V planes of a reconstructed (padded) frame.
pub fn recon_crc(frame: &Frame) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for p in &frame.planes {
        h.update(&p.data);
    }
    h.finalize()
}

pub fn write_header(out: &mut Vec<u8>, h: &StreamHeader) -> Result<(), CodecError> {
    let field = |v: usize, name: &str| {
        u16::try_from(v).map_err(|_| CodecError::Config(format!("{name} {v} does not fit the stream header")))
    };
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&field(h.width, "width")?.to_le_bytes());
    out.extend_from_slice(&field(h.height, "height")?.to_le_bytes());
    out.extend_from_slice(&field(h.frame_count, "frame count")?.to_le_bytes());
    out.push(h.gf_group_size as u8);
    out.push(h.model.code());
    Ok(())
}

/// Append one frame record and return its size in bytes.
pub fn write_frame(out: &mut Vec<u8>, rec: &FrameRecord) -> usize {
    let start = out.len();
    out.push(rec.frame_type as u8);
    out.push(rec.q as u8);
    if let Some(m) = rec.motion {
        for v in m {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(rec.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(rec.payload);
    out.len() - start
}

pub fn write_footer(out: &mut Vec<u8>, recon_crcs: &[u32]) {
    for c in recon_crcs {
        out.extend_from_slice(&c.to_le_bytes());
    }
    let all = crc32fast::hash(out);
    out.extend_from_slice(&all.to_le_bytes());
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(CodecError::Truncated(what))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Split a stream into its header, frame records and footer, checking the
/// magic, version, field ranges and the stream checksum.
pub fn parse(bytes: &[u8]) -> Result<ParsedStream<'_>, CodecError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(if bytes.len() < 4 && MAGIC.starts_with(bytes) {
            CodecError::Truncated("file header")
        } else {
            CodecError::BadMagic
        });
    }
    let mut c = Cursor { data: bytes, pos: 4 };
    let version = c.u8("file header")?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let width = c.u16("file header")? as usize;
    let height = c.u16("file header")? as usize;
    let frame_count = c.u16("file header")? as usize;
    let gf_group_size = c.u8("file header")? as usize;
    let model_code = c.u8("file header")?;
    if bytes.len() < overhead_bytes(frame_count) {
        return Err(CodecError::Truncated("footer"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(CodecError::StreamChecksum);
    }
    if width == 0 || height == 0 {
        return Err(CodecError::Invalid(format!("frame size {width}x{height}")));
    }
    if !(4..=16).contains(&gf_group_size) {
        return Err(CodecError::Invalid(format!("group size {gf_group_size}")));
    }
    let model = MotionModelKind::from_code(model_code)
        .ok_or_else(|| CodecError::Invalid(format!("motion model code {model_code}")))?;

    let frames_end = bytes.len() - 4 - 4 * frame_count;
    let mut frames = Vec::with_capacity(frame_count);
    for i in 0..frame_count {
        let frame_type = match c.u8("frame header")? {
            0 => FrameType::Key,
            1 => FrameType::Inter,
            t => return Err(CodecError::Invalid(format!("frame {i} has type code {t}"))),
        };
        if i == 0 && frame_type != FrameType::Key {
            return Err(CodecError::Invalid("first frame is not a key frame".into()));
        }
        let q = c.u8("frame header")? as u32;
        if !(1..=63).contains(&q) {
            return Err(CodecError::Invalid(format!("frame {i} has q level {q}")));
        }
        let motion = match frame_type {
            FrameType::Key => None,
            FrameType::Inter => {
                let mut m = [0i32; 6];
                for v in &mut m {
                    *v = c.u32("frame header")? as i32;
                }
                Some(m)
            }
        };
        let len = c.u32("frame header")? as usize;
        let payload = c.take(len, "frame payload")?;
        if c.pos > frames_end {
            return Err(CodecError::Truncated("frame payload"));
        }
        frames.push(FrameRecord {
            frame_type,
            q,
            motion,
            payload,
        });
    }
    if c.pos != frames_end {
        return Err(CodecError::Invalid(format!("{} unexpected bytes before footer", frames_end - c.pos)));
    }
    let recon_crcs = (0..frame_count).map(|_| c.u32("footer")).collect::<Result<_, _>>()?;
    Ok(ParsedStream {
        header: StreamHeader {
            width,
            height,
            frame_count,
            gf_group_size,
            model,
        },
        frames,
        recon_crcs,
    })
}
