//! Polynomial-evaluation hashing over GF(2^z).
//!
//! A message is cut into z-bit blocks, zero-padded at the end, and preceded by
//! one block holding its bit length. The digest at point S is
//! sum_{i=1..d} block_i * S^i.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::gf2n::Gf2n;
use crate::HashError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Au2FamilySpec {
    pub z_bits: u32,
    /// Upper bound on d, the block count including the length block.
    pub max_blocks: usize,
}

impl Au2FamilySpec {
    pub fn new(z_bits: u32, max_blocks: usize) -> Self {
        assert!((1..=64).contains(&z_bits) && max_blocks >= 1);
        Self { z_bits, max_blocks }
    }

    /// Collision bound for distinct messages of equal length.
    pub fn epsilon_prime(&self) -> BigRational {
        crate::ratio(self.max_blocks as u64 - 1, 1u128 << self.z_bits)
    }

    /// Collision bound when lengths may differ: the point zero always collides.
    pub fn epsilon_prime_any_length(&self) -> BigRational {
        crate::ratio(self.max_blocks as u64, 1u128 << self.z_bits)
    }

    /// Longest message that still fits in `max_blocks` blocks.
    pub fn max_message_bits(&self) -> u128 {
        let by_blocks = (self.max_blocks as u128 - 1) * self.z_bits as u128;
        let by_prefix = if self.z_bits >= 64 { u128::MAX } else { (1u128 << self.z_bits) - 1 };
        by_blocks.min(by_prefix)
    }
}

/// Length block followed by zero-padded data blocks.
pub fn pad_blocks(z_bits: u32, message: &BitString) -> Result<Vec<u64>, HashError> {
    let z = z_bits as usize;
    if z < 64 && (message.len() as u128) >= (1u128 << z) {
        return Err(HashError::MessageTooLong {
            bits: message.len(),
            capacity: (1usize << z) - 1,
        });
    }
    let mut blocks = Vec::with_capacity(1 + message.len().div_ceil(z));
    blocks.push(message.len() as u64);
    let mut i = 0;
    while i < message.len() {
        let mut v = 0u64;
        for j in 0..z {
            let bit = i + j < message.len() && message.get(i + j);
            v = (v << 1) | bit as u64;
        }
        blocks.push(v);
        i += z;
    }
    Ok(blocks)
}

/// sum_{i=1..d} blocks[i-1] * point^i, by Horner's rule.
pub fn poly_eval(field: &Gf2n, point: u64, blocks: &[u64]) -> u64 {
    let mut acc = 0u64;
    for &b in blocks.iter().rev() {
        acc = field.mul(acc ^ b, point);
    }
    acc
}

pub fn poly_au2_value(spec: &Au2FamilySpec, point: u64, message: &BitString) -> Result<u64, HashError> {
    let blocks = pad_blocks(spec.z_bits, message)?;
    if blocks.len() > spec.max_blocks {
        return Err(HashError::MessageTooLong {
            bits: message.len(),
            capacity: spec.max_message_bits().min(usize::MAX as u128) as usize,
        });
    }
    Ok(poly_eval(&Gf2n::new(spec.z_bits), point, &blocks))
}

pub fn poly_au2_eval(spec: &Au2FamilySpec, point: u64, message: &BitString) -> Result<BitString, HashError> {
    let v = poly_au2_value(spec, point, message)?;
    Ok(BitString::from_u64(v, spec.z_bits as usize))
}
