//! The public first-stage hash f.
//!
//! A block-iterated multiply-xorshift mixer over 64-bit big-endian words,
//! keyed by the published constant and truncated to `z_bits`.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::gf2n;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicHashSpec {
    pub z_bits: u32,
    pub mixer_seed: u64,
}

impl PublicHashSpec {
    /// Uses the published seed.
    pub fn new(z_bits: u32) -> Self {
        assert!((1..=64).contains(&z_bits), "z_bits must be in 1..=64");
        Self {
            z_bits,
            mixer_seed: gf2n::mixer_seed(),
        }
    }

    pub fn with_seed(z_bits: u32, mixer_seed: u64) -> Self {
        assert!((1..=64).contains(&z_bits), "z_bits must be in 1..=64");
        Self { z_bits, mixer_seed }
    }

    /// Digest as an integer in `0..2^z_bits`.
    pub fn digest_value(&self, message: &BitString) -> u64 {
        self.digest_bytes(&message.to_bytes(), message.len())
    }

    pub fn digest_bytes(&self, bytes: &[u8], bit_len: usize) -> u64 {
        let full = bytes.len() / 8 * 8;
        let h = absorb(self.mixer_seed, &bytes[..full]);
        finish(h, &bytes[full..], bit_len) & gf2n::mask(self.z_bits)
    }

    /// Digest of `bytes`, resuming from a cached state after the first
    /// `8 * words_done` bytes.
    pub fn digest_resume(&self, state: u64, words_done: usize, bytes: &[u8], bit_len: usize) -> u64 {
        let full = bytes.len() / 8 * 8;
        let h = absorb(state, &bytes[words_done * 8..full]);
        finish(h, &bytes[full..], bit_len) & gf2n::mask(self.z_bits)
    }

    /// Mixer state after absorbing the first `words` full words of `bytes`.
    pub fn prefix_state(&self, bytes: &[u8], words: usize) -> u64 {
        absorb(self.mixer_seed, &bytes[..words * 8])
    }

    /// `prefix_state` for every word count from 0 to the last full word.
    pub fn prefix_states(&self, bytes: &[u8]) -> Vec<u64> {
        let mut out = vec![self.mixer_seed];
        let mut h = self.mixer_seed;
        for chunk in bytes.chunks_exact(8) {
            h = absorb(h, chunk);
            out.push(h);
        }
        out
    }
}

#[inline]
fn fmix(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^= h >> 33;
    h
}

#[inline]
fn absorb(mut h: u64, bytes: &[u8]) -> u64 {
    for chunk in bytes.chunks_exact(8) {
        let w = u64::from_be_bytes(chunk.try_into().unwrap());
        h = fmix(h ^ w);
    }
    h
}

#[inline]
fn finish(mut h: u64, tail: &[u8], bit_len: usize) -> u64 {
    if !tail.is_empty() {
        let mut buf = [0u8; 8];
        buf[..tail.len()].copy_from_slice(tail);
        h = fmix(h ^ u64::from_be_bytes(buf));
    }
    fmix(h ^ (bit_len as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// f(message) truncated to `spec.z_bits`.
pub fn public_hash_f(spec: &PublicHashSpec, message: &BitString) -> BitString {
    BitString::from_u64(spec.digest_value(message), spec.z_bits as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = PublicHashSpec::new(12);
        let m = BitString::parse("1011001110001111").unwrap();
        assert_eq!(public_hash_f(&spec, &m), public_hash_f(&spec, &m));
    }

    #[test]
    fn resume_matches_full_digest() {
        let spec = PublicHashSpec::new(64);
        let bytes: Vec<u8> = (0..61u8).map(|i| i.wrapping_mul(37)).collect();
        let full = spec.digest_bytes(&bytes, bytes.len() * 8);
        for words in 0..=7 {
            let st = spec.prefix_state(&bytes, words);
            assert_eq!(spec.digest_resume(st, words, &bytes, bytes.len() * 8), full);
        }
    }

    #[test]
    fn bit_length_is_absorbed() {
        let spec = PublicHashSpec::new(64);
        let a = BitString::parse("1").unwrap();
        let b = BitString::parse("10").unwrap();
        assert_ne!(public_hash_f(&spec, &a), public_hash_f(&spec, &b));
    }
}
