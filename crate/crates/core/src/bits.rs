//! Fixed-length bit strings.
//!
//! Bit order is big-endian everywhere: bit 0 is the most significant bit of
//! byte 0. Padding bits in the last byte are always zero, so byte equality is
//! bit-string equality.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::RngCore;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bits {
    len: usize,
    bytes: Vec<u8>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Self { len, bytes: vec![0; len.div_ceil(8)] }
    }

    /// Takes the first `len` bits of `bytes`; fails if `bytes` is too short.
    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        let need = len.div_ceil(8);
        if bytes.len() < need {
            return Err(Error::LengthMismatch { expected: need * 8, actual: bytes.len() * 8 });
        }
        let mut out = Self { len, bytes: bytes[..need].to_vec() };
        out.clear_padding();
        Ok(out)
    }

    /// The low `len` bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        let mut out = Self::zeros(len);
        for i in 0..len {
            let shift = len - 1 - i;
            if shift < 64 && (value >> shift) & 1 == 1 {
                out.set(i, true);
            }
        }
        out
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse_binary(s: &str) -> Result<Self> {
        let bools = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Decode("expected a binary string")),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bools))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        let mut out = Self { len, bytes };
        out.clear_padding();
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u8 << (7 - i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Interprets the bits as an unsigned big-endian integer. `None` past 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.len > 64 {
            return None;
        }
        Some(self.iter().fold(0u64, |acc, b| (acc << 1) | b as u64))
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len {
            return Err(Error::LengthMismatch { expected: start + len, actual: self.len });
        }
        let mut out = Self::zeros(len);
        if start.is_multiple_of(8) {
            out.bytes.copy_from_slice(&self.bytes[start / 8..start / 8 + len.div_ceil(8)]);
            out.clear_padding();
        } else {
            for i in 0..len {
                out.set(i, self.get(start + i));
            }
        }
        Ok(out)
    }

    pub fn concat(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.len + rhs.len);
        out.bytes[..self.bytes.len()].copy_from_slice(&self.bytes);
        if self.len.is_multiple_of(8) {
            out.bytes[self.bytes.len()..].copy_from_slice(&rhs.bytes);
        } else {
            for i in 0..rhs.len {
                out.set(self.len + i, rhs.get(i));
            }
        }
        out
    }

    pub fn xor(&self, rhs: &Self) -> Result<Self> {
        if self.len != rhs.len {
            return Err(Error::LengthMismatch { expected: self.len, actual: rhs.len });
        }
        let bytes = self.bytes.iter().zip(&rhs.bytes).map(|(a, b)| a ^ b).collect();
        Ok(Self { len: self.len, bytes })
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|&b| b == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn to_binary_string(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    fn clear_padding(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << (8 - rem);
            }
        }
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "Bits({})", self.to_binary_string())
        } else {
            write!(f, "Bits[{}](", self.len)?;
            for b in &self.bytes {
                write!(f, "{b:02x}")?;
            }
            write!(f, ")")
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_binary_string())
    }
}
