//! Arithmetic in GF(2^n) for 1 <= n <= 64.
//!
//! Elements are the low `n` bits of a `u64`. Products are carryless and then
//! reduced by the published polynomial for the width (see
//! `docs/field_and_mixer_v1.txt`).

use std::sync::OnceLock;

pub const CONSTANTS_TEXT: &str = include_str!("../../../docs/field_and_mixer_v1.txt");

struct Constants {
    mixer_seed: u64,
    low: [u64; 65],
}

fn constants() -> &'static Constants {
    static C: OnceLock<Constants> = OnceLock::new();
    C.get_or_init(|| {
        let mut mixer_seed = None;
        let mut low = [0u64; 65];
        for line in CONSTANTS_TEXT.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["mixer_seed", v] => mixer_seed = Some(parse_hex(v)),
                ["poly", w, v] => {
                    let w: usize = w.parse().expect("bad width in constants file");
                    low[w] = parse_hex(v);
                }
                _ => {}
            }
        }
        assert!(low[1..].iter().all(|&l| l != 0), "missing reduction polynomial");
        Constants {
            mixer_seed: mixer_seed.expect("mixer_seed missing from constants file"),
            low,
        }
    })
}

fn parse_hex(v: &str) -> u64 {
    u64::from_str_radix(v.trim_start_matches("0x"), 16).expect("bad hex constant")
}

pub fn mixer_seed() -> u64 {
    constants().mixer_seed
}

/// Low part of the reduction polynomial x^n + low.
pub fn reduction_low(n: u32) -> u64 {
    assert!((1..=64).contains(&n), "field width {n} out of range");
    constants().low[n as usize]
}

#[inline]
pub fn mask(n: u32) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
pub fn clmul(a: u64, b: u64) -> u128 {
    let mut r = 0u128;
    let mut a = a as u128;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    r
}

/// A binary extension field of fixed width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gf2n {
    n: u32,
    low: u64,
}

impl Gf2n {
    pub fn new(n: u32) -> Self {
        Self {
            n,
            low: reduction_low(n),
        }
    }

    pub fn width(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> u128 {
        1u128 << self.n
    }

    pub fn reduce(&self, mut p: u128) -> u64 {
        let n = self.n;
        let full = ((1u128) << n) | self.low as u128;
        while p >> n != 0 {
            let top = 127 - p.leading_zeros();
            p ^= full << (top - n);
        }
        p as u64
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a & !mask(self.n) == 0 && b & !mask(self.n) == 0);
        self.reduce(clmul(a, b))
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }

    /// Multiplicative inverse via a^(2^n - 2). Zero maps to zero.
    pub fn inv(&self, a: u64) -> u64 {
        if self.n == 64 {
            self.pow(a, u64::MAX - 1)
        } else {
            self.pow(a, (1u64 << self.n) - 2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aes_field_matches_known_product() {
        let f = Gf2n::new(8);
        assert_eq!(f.mul(0x57, 0x83), 0xc1);
        assert_eq!(f.mul(0x57, 0x13), 0xfe);
    }

    #[test]
    fn inverse_round_trips() {
        for n in [1, 4, 7, 12, 32, 64] {
            let f = Gf2n::new(n);
            for a in [1u64, 2, 3, 0x55, u64::MAX] {
                let a = a & mask(n);
                if a == 0 {
                    continue;
                }
                assert_eq!(f.mul(a, f.inv(a)), 1, "width {n}, a {a:#x}");
            }
        }
    }
}
