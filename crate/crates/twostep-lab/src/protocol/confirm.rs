//! Key confirmation: polynomial hashing of the reconciled key over GF(2^32).

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::gf2n::Gf2n;
use crate::hashing::poly::{pad_blocks, poly_eval};

pub const CONFIRM_BITS: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmSpec {
    pub point: u64,
    pub width: u32,
}

impl ConfirmSpec {
    pub fn new(point: u64) -> Self {
        Self {
            point: point & crate::gf2n::mask(CONFIRM_BITS),
            width: CONFIRM_BITS,
        }
    }
}

pub fn confirm(spec: &ConfirmSpec, key: &BitString) -> u64 {
    let blocks = pad_blocks(spec.width, key).expect("key longer than the confirmation length block");
    poly_eval(&Gf2n::new(spec.width), spec.point, &blocks)
}

/// Published collision bound for two distinct keys of `key_len` bits.
pub fn confirm_epsilon(key_len: usize, width: u32) -> BigRational {
    let data_blocks = key_len.div_ceil(width as usize) as u64;
    crate::ratio(data_blocks, 1u128 << width)
}

/// XOR change of the confirmation value when key bit `i` flips. Length is unchanged,
/// so the value is affine in the key bits.
pub fn confirm_bit_delta(spec: &ConfirmSpec, i: usize) -> u64 {
    let w = spec.width as usize;
    let f = Gf2n::new(spec.width);
    let block = 1u64 << (w - 1 - i % w);
    f.mul(block, f.pow(spec.point, (i / w + 2) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_delta_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let key = BitString::random(100, &mut rng);
        let spec = ConfirmSpec::new(0x1234_5678);
        for i in [0, 31, 32, 63, 99] {
            let mut k2 = key.clone();
            k2.flip(i);
            assert_eq!(confirm(&spec, &key) ^ confirm(&spec, &k2), confirm_bit_delta(&spec, i));
        }
    }
}
