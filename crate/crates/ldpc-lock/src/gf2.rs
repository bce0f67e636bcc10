//! Fixed-length bit vectors over GF(2).
//!
//! `BitVec` carries codewords, syndromes, keys and secret offset vectors.
//! Bits are packed LSB-first into 64-bit words: bit `i` lives in word
//! `i / 64` at position `i % 64`, so bit 0 is the numerically least
//! significant. That convention fixes the integer value used by `Ord`,
//! `to_u64` and the hex encoding, and it is shared by every CLI flag that
//! takes key material.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    /// All-zero vector of `len` bits. Lengths are fixed at construction.
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "BitVec length must be positive");
        BitVec {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// Builds a vector from explicit 0/1 values; `bits[i]` becomes bit `i`.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            assert!(b <= 1, "bit values must be 0 or 1");
            if b == 1 {
                v.set(i, true);
            }
        }
        v
    }

    /// Uniformly random vector.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = BitVec::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.random();
        }
        v.mask_tail();
        v
    }

    /// Interprets `value` as the low `len` bits (`len <= 64`).
    pub fn from_u64(len: usize, value: u64) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let mut v = BitVec::zeros(len);
        v.words[0] = value;
        v.mask_tail();
        assert!(
            len == 64 || value >> len == 0,
            "value has bits beyond the requested length"
        );
        v
    }

    /// Repeats `pattern` cyclically to fill `len` bits.
    pub fn repeat_pattern(pattern: &BitVec, len: usize) -> Self {
        let mut v = BitVec::zeros(len);
        for i in 0..len {
            if pattern.get(i % pattern.len()) {
                v.set(i, true);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false // length is always positive
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let cur = self.get(i);
        self.set(i, !cur);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &BitVec) -> BitVec {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(
            self.len, other.len,
            "XOR requires equal lengths ({} vs {})",
            self.len, other.len
        );
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= b;
        }
    }

    pub fn and(&self, other: &BitVec) -> BitVec {
        assert_eq!(
            self.len, other.len,
            "AND requires equal lengths ({} vs {})",
            self.len, other.len
        );
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(other.words.iter()) {
            *a &= b;
        }
        out
    }

    /// Copies `len` bits out of `src` starting at `src_start` into `self`
    /// starting at `dst_start`.
    pub fn copy_range_from(&mut self, dst_start: usize, src: &BitVec, src_start: usize, len: usize) {
        assert!(dst_start + len <= self.len, "destination range out of bounds");
        assert!(src_start + len <= src.len, "source range out of bounds");
        for i in 0..len {
            let b = src.get(src_start + i);
            self.set(dst_start + i, b);
        }
    }

    /// New vector holding bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> BitVec {
        assert!(start + len <= self.len, "slice out of bounds");
        let mut out = BitVec::zeros(len);
        out.copy_range_from(0, self, start, len);
        out
    }

    /// Compares `len` bits of `self` starting at `start` against `other`
    /// starting at `other_start`.
    pub fn range_eq(&self, start: usize, other: &BitVec, other_start: usize, len: usize) -> bool {
        assert!(start + len <= self.len, "range out of bounds");
        assert!(other_start + len <= other.len, "range out of bounds");
        (0..len).all(|i| self.get(start + i) == other.get(other_start + i))
    }

    /// Reads up to 64 bits starting at `start` as an integer (bit `start`
    /// becomes bit 0 of the result).
    #[inline]
    pub fn extract_u64(&self, start: usize, len: usize) -> u64 {
        assert!(len <= 64 && len > 0, "extract length must be 1..=64");
        assert!(start + len <= self.len, "extract out of bounds");
        let word = start / 64;
        let off = start % 64;
        let mut out = self.words[word] >> off;
        if off != 0 && word + 1 < self.words.len() {
            out |= self.words[word + 1] << (64 - off);
        }
        if len < 64 {
            out &= (1u64 << len) - 1;
        }
        out
    }

    /// Integer value of the whole vector (`len <= 64`).
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "to_u64 requires length <= 64");
        self.words[0]
    }

    pub fn as_words(&self) -> &[u64] {
        &self.words
    }

    /// Lowercase hex encoding: byte `i` holds bits `[8i, 8i+8)` with bit
    /// `8i + j` at position `j`.
    pub fn to_hex(&self) -> String {
        let nbytes = self.len.div_ceil(8);
        let mut s = String::with_capacity(2 * nbytes);
        for i in 0..nbytes {
            let byte = self.extract_u64(8 * i, (self.len - 8 * i).min(8)) as u8;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    /// Parses the encoding produced by [`to_hex`](Self::to_hex). Padding bits
    /// beyond `len` must be zero.
    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let hex = hex.trim();
        let nbytes = len.div_ceil(8);
        if hex.len() != 2 * nbytes {
            return Err(Error::InvalidHex(format!(
                "expected {} hex digits for {} bits, got {}",
                2 * nbytes,
                len,
                hex.len()
            )));
        }
        let mut v = BitVec::zeros(len);
        for i in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::InvalidHex(e.to_string()))?;
            for j in 0..8 {
                let bit = i * 8 + j;
                if (byte >> j) & 1 == 1 {
                    if bit >= len {
                        return Err(Error::InvalidHex(
                            "nonzero padding bits beyond the vector length".into(),
                        ));
                    }
                    v.set(bit, true);
                }
            }
        }
        Ok(v)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            *self.words.last_mut().unwrap() &= (1u64 << rem) - 1;
        }
    }
}

/// Numeric order under the LSB-first integer interpretation.
impl Ord for BitVec {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.len.cmp(&other.len) {
            Ordering::Equal => {}
            ord => return ord,
        }
        for (a, b) in self.words.iter().rev().zip(other.words.iter().rev()) {
            match a.cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for BitVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec[{}; ", self.len)?;
        let shown = self.len.min(64);
        for i in 0..shown {
            write!(f, "{}", self.get(i) as u8)?;
        }
        if shown < self.len {
            write!(f, "...")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        Ok(())
    }
}
