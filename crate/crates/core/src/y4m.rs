//! YUV4MPEG2 and headerless planar 4:2:0 streams.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::frame::{chroma_dim, Frame, Plane, Sequence};

#[derive(Debug, Error)]
pub enum Y4mError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported colourspace {0}")]
    UnsupportedColourspace(String),
    #[error("truncated frame payload in frame {0}")]
    Truncated(usize),
    #[error("expected FRAME marker before frame {0}")]
    MissingFrameMarker(usize),
    #[error("cannot write an empty sequence")]
    EmptySequence,
    #[error("raw input size {len} is not a multiple of the {frame_bytes}-byte frame size")]
    RawSize { len: usize, frame_bytes: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn frame_bytes(width: usize, height: usize) -> usize {
    width * height + 2 * chroma_dim(width) * chroma_dim(height)
}

fn frame_from_bytes(buf: &[u8], width: usize, height: usize, index: usize) -> Frame {
    let (cw, ch) = (chroma_dim(width), chroma_dim(height));
    let ysz = width * height;
    let csz = cw * ch;
    let y = Plane {
        width,
        height,
        data: buf[..ysz].to_vec(),
    };
    let u = Plane {
        width: cw,
        height: ch,
        data: buf[ysz..ysz + csz].to_vec(),
    };
    let v = Plane {
        width: cw,
        height: ch,
        data: buf[ysz + csz..ysz + 2 * csz].to_vec(),
    };
    Frame::from_planes(y, u, v).with_index(index)
}

struct Header {
    width: usize,
    height: usize,
    rate: (u32, u32),
}

fn parse_header(line: &str) -> Result<Header, Y4mError> {
    let mut tokens = line.split_ascii_whitespace();
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(Y4mError::MalformedHeader("missing YUV4MPEG2 signature".into()));
    }
    let (mut width, mut height, mut rate) = (None, None, (30, 1));
    for tok in tokens {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = val.parse::<usize>().ok(),
            "H" => height = val.parse::<usize>().ok(),
            "F" => {
                let (n, d) = val
                    .split_once(':')
                    .ok_or_else(|| Y4mError::MalformedHeader(format!("bad frame rate {val}")))?;
                let parse = |s: &str| {
                    s.parse::<u32>()
                        .map_err(|_| Y4mError::MalformedHeader(format!("bad frame rate {val}")))
                };
                rate = (parse(n)?, parse(d)?);
            }
            "C"
                if !matches!(val, "420" | "420jpeg" | "420paldv" | "420mpeg2") => {
                    return Err(Y4mError::UnsupportedColourspace(val.to_string()));
                }
            // Interlacing, aspect and extension tags do not affect the payload.
            _ => {}
        }
    }
    match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => Ok(Header {
            width: w,
            height: h,
            rate,
        }),
        _ => Err(Y4mError::MalformedHeader("missing or invalid W/H".into())),
    }
}

/// Read every frame of a 4:2:0 Y4M stream.
pub fn read_y4m<R: Read>(reader: R) -> Result<Sequence, Y4mError> {
    let mut r = io::BufReader::new(reader);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Y4mError::MalformedHeader("header not newline-terminated".into()));
    }
    let text = std::str::from_utf8(&line[..line.len() - 1])
        .map_err(|_| Y4mError::MalformedHeader("header is not ASCII".into()))?;
    let hdr = parse_header(text)?;
    let size = frame_bytes(hdr.width, hdr.height);

    let mut frames = Vec::new();
    let mut buf = vec![0u8; size];
    loop {
        line.clear();
        let n = r.read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        if !line.starts_with(b"FRAME") || line.last() != Some(&b'\n') {
            return Err(Y4mError::MissingFrameMarker(frames.len()));
        }
        r.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Y4mError::Truncated(frames.len()),
            _ => Y4mError::Io(e),
        })?;
        frames.push(frame_from_bytes(&buf, hdr.width, hdr.height, frames.len()));
    }
    Ok(Sequence {
        frames,
        frame_rate: hdr.rate,
    })
}

/// Write a sequence at its display dimensions. Returns the bytes written.
pub fn write_y4m<W: Write>(seq: &Sequence, mut sink: W) -> Result<usize, Y4mError> {
    let first = seq.frames.first().ok_or(Y4mError::EmptySequence)?;
    let (w, h) = (first.display_width, first.display_height);
    let header = format!(
        "YUV4MPEG2 W{w} H{h} F{}:{} Ip A1:1 C420jpeg\n",
        seq.frame_rate.0, seq.frame_rate.1
    );
    sink.write_all(header.as_bytes())?;
    let mut written = header.len();
    for f in &seq.frames {
        let f = f.cropped();
        sink.write_all(b"FRAME\n")?;
        for p in &f.planes {
            sink.write_all(&p.data)?;
        }
        written += 6 + frame_bytes(w, h);
    }
    sink.flush()?;
    Ok(written)
}

/// Read headerless planar 4:2:0 data. `frames` limits how many are read;
/// otherwise the whole stream must be a whole number of frames.
pub fn read_raw_yuv<R: Read>(
    mut reader: R,
    width: usize,
    height: usize,
    frames: Option<usize>,
) -> Result<Sequence, Y4mError> {
    let size = frame_bytes(width, height);
    let mut out = Vec::new();
    match frames {
        Some(n) => {
            let mut buf = vec![0u8; size];
            for i in 0..n {
                reader.read_exact(&mut buf).map_err(|e| match e.kind() {
                    io::ErrorKind::UnexpectedEof => Y4mError::Truncated(i),
                    _ => Y4mError::Io(e),
                })?;
                out.push(frame_from_bytes(&buf, width, height, i));
            }
        }
        None => {
            let mut all = Vec::new();
            reader.read_to_end(&mut all)?;
            if size == 0 || all.len() % size != 0 {
                return Err(Y4mError::RawSize {
                    len: all.len(),
                    frame_bytes: size,
                });
            }
            for (i, chunk) in all.chunks(size).enumerate() {
                out.push(frame_from_bytes(chunk, width, height, i));
            }
        }
    }
    Ok(Sequence {
        frames: out,
        frame_rate: (30, 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(header: &str, frames: &[Vec<u8>]) -> Vec<u8> {
        let mut s = header.as_bytes().to_vec();
        for f in frames {
            s.extend_from_slice(b"FRAME\n");
            s.extend_from_slice(f);
        }
        s
    }

    #[test]
    fn minimal_stream() {
        let s = stream("YUV4MPEG2 W16 H16 F30:1\n", &[vec![7u8; 384]]);
        let seq = read_y4m(s.as_slice()).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!((seq.frames[0].width, seq.frames[0].height), (16, 16));
        assert_eq!(seq.frame_rate, (30, 1));
    }

    #[test]
    fn two_frames_plane_sizes() {
        let s = stream("YUV4MPEG2 W32 H32 F25:1 C420jpeg\n", &[vec![1u8; 1536], vec![2u8; 1536]]);
        let seq = read_y4m(s.as_slice()).unwrap();
        assert_eq!(seq.len(), 2);
        for f in &seq.frames {
            assert_eq!(f.planes[0].data.len(), 1024);
            assert_eq!(f.planes[1].data.len(), 256);
            assert_eq!(f.planes[2].data.len(), 256);
        }
        assert_eq!(seq.frames[1].index, 1);
    }

    #[test]
    fn rejects_444() {
        let s = stream("YUV4MPEG2 W16 H16 F30:1 C444\n", &[vec![0u8; 768]]);
        let err = read_y4m(s.as_slice()).unwrap_err();
        assert!(err.to_string().contains("unsupported colourspace"));
    }

    #[test]
    fn rejects_high_bit_depth() {
        let s = stream("YUV4MPEG2 W16 H16 F30:1 C420p10\n", &[]);
        assert!(matches!(
            read_y4m(s.as_slice()),
            Err(Y4mError::UnsupportedColourspace(_))
        ));
    }

    #[test]
    fn rejects_bad_headers_and_truncation() {
        assert!(matches!(
            read_y4m(&b"YUV4MPEG W16 H16\n"[..]),
            Err(Y4mError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_y4m(&b"YUV4MPEG2 H16\n"[..]),
            Err(Y4mError::MalformedHeader(_))
        ));
        let s = stream("YUV4MPEG2 W16 H16\n", &[vec![0u8; 100]]);
        assert!(matches!(read_y4m(s.as_slice()), Err(Y4mError::Truncated(0))));
    }

    #[test]
    fn write_single_frame_layout() {
        let seq = Sequence::new(vec![Frame::new(16, 16, [1, 2, 3])], (30, 1)).unwrap();
        let mut out = Vec::new();
        let n = write_y4m(&seq, &mut out).unwrap();
        assert_eq!(n, out.len());
        let header_end = out.iter().position(|&b| b == b'\n').unwrap() + 1;
        assert_eq!(&out[header_end..header_end + 6], b"FRAME\n");
        assert_eq!(out.len() - header_end - 6, 384);
    }

    #[test]
    fn write_empty_fails() {
        let seq = Sequence {
            frames: vec![],
            frame_rate: (30, 1),
        };
        assert!(matches!(write_y4m(&seq, Vec::new()), Err(Y4mError::EmptySequence)));
    }

    #[test]
    fn raw_reader() {
        let data = vec![9u8; 384 * 3];
        let seq = read_raw_yuv(data.as_slice(), 16, 16, None).unwrap();
        assert_eq!(seq.len(), 3);
        let seq = read_raw_yuv(data.as_slice(), 16, 16, Some(2)).unwrap();
        assert_eq!(seq.len(), 2);
        assert!(read_raw_yuv(&data[..500], 16, 16, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_is_sample_exact(w in 1usize..40, h in 1usize..40, n in 1usize..4, seed in any::<u64>()) {
            let mut state = seed | 1;
            let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state as u8 };
            let frames = (0..n).map(|i| {
                let y = Plane::from_fn(w, h, |_, _| next());
                let u = Plane::from_fn(chroma_dim(w), chroma_dim(h), |_, _| next());
                let v = Plane::from_fn(chroma_dim(w), chroma_dim(h), |_, _| next());
                Frame::from_planes(y, u, v).with_index(i)
            }).collect();
            let seq = Sequence::new(frames, (24000, 1001)).unwrap();
            let mut buf = Vec::new();
            write_y4m(&seq, &mut buf).unwrap();
            let back = read_y4m(buf.as_slice()).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
