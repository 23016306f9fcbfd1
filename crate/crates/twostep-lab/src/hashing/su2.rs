//! Strongly universal outer hash: truncate_t(a * z) xor b over GF(2^w),
//! where w = max(z_bits, t_bits) and the digest is embedded as a field element.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::gf2n::{self, Gf2n};
use crate::HashError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Su2Key {
    pub a: u64,
    pub b: u64,
}

/// Widths of an outer hash instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Su2Params {
    pub z_bits: u32,
    pub t_bits: u32,
}

impl Su2Params {
    pub fn new(z_bits: u32, t_bits: u32) -> Self {
        assert!((1..=64).contains(&z_bits) && (1..=64).contains(&t_bits));
        Self { z_bits, t_bits }
    }

    pub fn field_bits(&self) -> u32 {
        self.z_bits.max(self.t_bits)
    }

    /// Key material per tag: the multiplier plus the mask.
    pub fn key_bits(&self) -> usize {
        (self.field_bits() + self.t_bits) as usize
    }

    pub fn random_key<R: Rng + ?Sized>(&self, rng: &mut R) -> Su2Key {
        Su2Key {
            a: rng.gen::<u64>() & gf2n::mask(self.field_bits()),
            b: rng.gen::<u64>() & gf2n::mask(self.t_bits),
        }
    }

    /// Splits key bits drawn from a ledger: multiplier first, then mask.
    pub fn key_from_bits(&self, bits: &BitString) -> Su2Key {
        assert_eq!(bits.len(), self.key_bits());
        let fb = self.field_bits() as usize;
        Su2Key {
            a: bits.slice(0, fb).to_u64(),
            b: bits.slice(fb, bits.len()).to_u64(),
        }
    }

    #[inline]
    pub fn eval_value(&self, key: Su2Key, digest: u64) -> u64 {
        let f = Gf2n::new(self.field_bits());
        (f.mul(key.a, digest) & gf2n::mask(self.t_bits)) ^ key.b
    }
}

pub fn su2_eval(params: Su2Params, key: Su2Key, digest: &BitString) -> Result<BitString, HashError> {
    if digest.len() != params.z_bits as usize {
        return Err(HashError::DigestLength {
            expected: params.z_bits as usize,
            got: digest.len(),
        });
    }
    let v = params.eval_value(key, digest.to_u64());
    Ok(BitString::from_u64(v, params.t_bits as usize))
}
