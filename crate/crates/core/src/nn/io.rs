//! "TXNN" weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes  "TXNN"
//! version   u32      1
//! spec_hash u64      FNV-1a of the canonical network text
//! spec_len  u32      length of the canonical network text
//! spec      bytes    canonical network text (UTF-8)
//! count     u32      number of tensors
//! repeated count times:
//!   len     u32
//!   values  len x f32
//! ```
//!
//! Tensors appear in declaration order: per layer, weight then bias, and for
//! batchnorm scale, shift, running mean, running variance.

use std::io::{Read, Write};

use super::net::NetParams;
use super::{NetSpec, NnError};

pub const MAGIC: &[u8; 4] = b"TXNN";
pub const VERSION: u32 = 1;

pub fn save_params<W: Write>(params: &NetParams<f32>, mut sink: W) -> Result<(), NnError> {
    let text = params.spec.canonical();
    sink.write_all(MAGIC)?;
    sink.write_all(&VERSION.to_le_bytes())?;
    sink.write_all(&params.spec.hash().to_le_bytes())?;
    sink.write_all(&(text.len() as u32).to_le_bytes())?;
    sink.write_all(text.as_bytes())?;
    let tensors = params.all_tensors();
    sink.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        sink.write_all(&(t.len() as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(t.len() * 4);
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
    }
    sink.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Load a weight file, taking the architecture from the file itself.
pub fn load_params<R: Read>(mut source: R) -> Result<NetParams<f32>, NnError> {
    let mut magic = [0u8; 4];
    source.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Format("bad magic, not a TXNN weight file".into()));
    }
    let version = read_u32(&mut source)?;
    if version != VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let mut h = [0u8; 8];
    source.read_exact(&mut h)?;
    let hash = u64::from_le_bytes(h);
    let len = read_u32(&mut source)? as usize;
    if len > 1 << 16 {
        return Err(NnError::Format("architecture text too long".into()));
    }
    let mut text = vec![0u8; len];
    source.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| NnError::Format("architecture text is not UTF-8".into()))?;
    let spec = NetSpec::parse(&text)?;
    if spec.hash() != hash {
        return Err(NnError::ArchitectureMismatch {
            found: hash,
            expected: spec.hash(),
        });
    }

    let mut params = NetParams::<f32>::zeros(&spec)?;
    let count = read_u32(&mut source)? as usize;
    let mut tensors = params.all_tensors_mut();
    if count != tensors.len() {
        return Err(NnError::Format(format!("{count} tensors, architecture has {}", tensors.len())));
    }
    for (i, t) in tensors.iter_mut().enumerate() {
        let n = read_u32(&mut source)? as usize;
        if n != t.len() {
            return Err(NnError::Format(format!("tensor {i} holds {n} values, expected {}", t.len())));
        }
        let mut buf = vec![0u8; n * 4];
        source.read_exact(&mut buf)?;
        for (dst, b) in t.iter_mut().zip(buf.chunks_exact(4)) {
            *dst = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
    }
    Ok(params)
}

/// Load a weight file and require it to match `spec`.
pub fn load_params_for<R: Read>(source: R, spec: &NetSpec) -> Result<NetParams<f32>, NnError> {
    let params = load_params(source)?;
    if params.spec_hash() != spec.hash() {
        return Err(NnError::ArchitectureMismatch {
            found: params.spec_hash(),
            expected: spec.hash(),
        });
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> NetParams<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = NetParams::init(&NetSpec::default(), &mut rng).unwrap();
        if let super::super::LayerParams::BatchNorm { running_var, .. } = &mut p.layers[1] {
            running_var[0] = 0.123;
        }
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = params();
        let mut buf = Vec::new();
        save_params(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        let back = load_params(buf.as_slice()).unwrap();
        assert_eq!(back, p);
        let back = load_params_for(buf.as_slice(), &NetSpec::default()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn corrupted_magic() {
        let mut buf = Vec::new();
        save_params(&params(), &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(load_params(buf.as_slice()), Err(NnError::Format(_))));
    }

    #[test]
    fn architecture_mismatch() {
        let mut buf = Vec::new();
        save_params(&params(), &mut buf).unwrap();
        let other = NetSpec::classifier(&[8, 16], &[32], 0.5);
        let err = load_params_for(buf.as_slice(), &other).unwrap_err();
        assert!(err.to_string().contains("architecture mismatch"));

        // A tampered hash field is caught even without an expected spec.
        buf[8] ^= 1;
        let err = load_params(buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("architecture mismatch"));
    }

    #[test]
    fn truncated_file() {
        let mut buf = Vec::new();
        save_params(&params(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(load_params(buf.as_slice()), Err(NnError::Io(_))));
    }
}
