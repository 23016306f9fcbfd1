//! Packed bit strings.
//!
//! Bits are indexed from zero. Byte serialization is MSB-first within each
//! byte and zero-padded at the tail.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = Self::zeros(len);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        s.clear_tail();
        s
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = Self::zeros(len);
        for w in s.words.iter_mut() {
            *w = rng.gen();
        }
        s.clear_tail();
        s
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = Self::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    /// Parses a string of `0` and `1` characters. Whitespace and `_` are skipped.
    pub fn parse(text: &str) -> Option<Self> {
        let mut s = Self::new();
        for c in text.chars() {
            match c {
                '0' => s.push(false),
                '1' => s.push(true),
                '_' | ' ' | '\n' | '\t' => {}
                _ => return None,
            }
        }
        Some(s)
    }

    /// The low `width` bits of `value`, most significant first.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        Self::from_bools((0..width).rev().map(|i| (value >> i) & 1 == 1))
    }

    /// Inverse of [`BitString::from_u64`]. Panics above 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "bit string too long for u64");
        self.iter().fold(0u64, |acc, b| (acc << 1) | b as u64)
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(len <= bytes.len() * 8);
        Self::from_bools((0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for (i, b) in self.iter().enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn push(&mut self, v: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    pub fn extend(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len);
        Self::from_bools((start..end).map(|i| self.get(i)))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        BitString {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
            len: self.len,
        }
    }

    pub fn hamming(&self, other: &BitString) -> usize {
        assert_eq!(self.len, other.len, "hamming distance of unequal lengths");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Packed words, bit `i` at position `i % 64` of word `i / 64`.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert!(words.len() == len.div_ceil(64));
        let mut s = Self { words, len };
        s.clear_tail();
        s
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 96 {
            write!(f, "BitString({self})")
        } else {
            write!(f, "BitString(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        BitString::parse(&text).ok_or_else(|| serde::de::Error::custom("expected a 0/1 string"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_bytes() {
        let s = BitString::parse("1000000011").unwrap();
        assert_eq!(s.to_bytes(), vec![0x80, 0xc0]);
        assert_eq!(BitString::from_bytes(&[0x80, 0xc0], 10), s);
    }

    #[test]
    fn u64_round_trip() {
        let s = BitString::from_u64(0b1011, 6);
        assert_eq!(s.to_string(), "001011");
        assert_eq!(s.to_u64(), 0b1011);
    }

    #[test]
    fn push_across_word_boundary() {
        let mut s = BitString::zeros(63);
        s.push(true);
        s.push(true);
        assert_eq!(s.len(), 65);
        assert_eq!(s.count_ones(), 2);
        assert!(s.get(64));
    }

    #[test]
    fn ones_has_clean_tail() {
        let s = BitString::ones(70);
        assert_eq!(s.count_ones(), 70);
        assert_eq!(s.hamming(&BitString::zeros(70)), 70);
    }
}
