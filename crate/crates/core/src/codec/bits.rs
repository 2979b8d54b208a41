//! MSB-first bit packing with order-0 Exp-Golomb codes.

use super::CodecError;

/// Anything that accepts bits: a real writer or a counter for trial coding.
pub trait BitSink {
    /// Append the low `n` bits of `value`, most significant first.
    fn put_bits(&mut self, value: u64, n: u32);

    fn put_bit(&mut self, bit: bool) {
        self.put_bits(bit as u64, 1);
    }

    /// Unsigned Exp-Golomb: `len-1` zeros, then `v+1` in `len` bits.
    fn put_ue(&mut self, v: u32) {
        let x = v as u64 + 1;
        let len = 64 - x.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(x, len);
    }

    /// Signed Exp-Golomb: 0, 1, -1, 2, -2, ... map to 0, 1, 2, 3, 4, ...
    fn put_se(&mut self, v: i32) {
        let m = if v > 0 { 2 * v as i64 - 1 } else { -2 * v as i64 };
        self.put_ue(m as u32);
    }
}

/// Length in bits of `ue(v)`.
pub fn ue_len(v: u32) -> u64 {
    let x = v as u64 + 1;
    2 * (63 - x.leading_zeros() as u64) + 1
}

#[derive(Debug, Default, Clone, Copy)]
pub struct BitCounter {
    pub bits: u64,
}

impl BitSink for BitCounter {
    fn put_bits(&mut self, _value: u64, n: u32) {
        self.bits += n as u64;
    }
}

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    cur: u8,
    used: u32,
    total: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.total
    }

    /// Pad the last byte with zero bits and return the bytes.
    pub fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.bytes.push(self.cur << (8 - self.used));
        }
        self.bytes
    }
}

impl BitSink for BitWriter {
    fn put_bits(&mut self, value: u64, n: u32) {
        for i in (0..n).rev() {
            self.cur = (self.cur << 1) | ((value >> i) & 1) as u8;
            self.used += 1;
            if self.used == 8 {
                self.bytes.push(self.cur);
                self.cur = 0;
                self.used = 0;
            }
        }
        self.total += n as u64;
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        BitReader { data, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool, CodecError> {
        let byte = *self
            .data
            .get((self.pos / 8) as usize)
            .ok_or(CodecError::Truncated("frame payload"))?;
        let bit = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64, CodecError> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_ue(&mut self) -> Result<u32, CodecError> {
        let mut zeros = 0;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 32 {
                return Err(CodecError::Invalid("Exp-Golomb prefix longer than 32 bits".into()));
            }
        }
        let rest = self.read_bits(zeros)?;
        let v = ((1u64 << zeros) | rest) - 1;
        u32::try_from(v).map_err(|_| CodecError::Invalid("Exp-Golomb value exceeds 32 bits".into()))
    }

    pub fn read_se(&mut self) -> Result<i32, CodecError> {
        let m = self.read_ue()? as i64;
        let v = if m % 2 == 1 { (m + 1) / 2 } else { -m / 2 };
        i32::try_from(v).map_err(|_| CodecError::Invalid("signed Exp-Golomb value out of range".into()))
    }
}
