//! Closed-form success bounds and key-consumption arithmetic.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::scheme::{AuthScheme, AuthVariant};
use crate::HashError;

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Messages within Hamming distance `w` of a fixed `ell`-bit message.
pub fn ball_size(ell: u64, w: u64) -> BigUint {
    (0..=w.min(ell)).map(|k| binomial(ell, k)).sum()
}

/// `count / 2^z` as a float, exact enough for exponents.
fn ratio_to_f64(count: &BigUint, z_bits: u32) -> f64 {
    let shift = count.bits().saturating_sub(60);
    let mantissa = (count >> shift).to_f64().unwrap_or(f64::INFINITY);
    mantissa * 2f64.powi(shift as i32 - z_bits as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallBound {
    /// 1 - exp(-C(ell, w) / 2^z): only the shell at distance exactly w.
    pub loose: f64,
    /// 1 - exp(-|B| / 2^z) with |B| the full closed ball.
    pub full_ball: f64,
    pub ball_size: String,
}

pub fn collision_ball_success_bound(ell: u64, w: u64, z_bits: u32) -> Result<BallBound, HashError> {
    if w > ell {
        return Err(HashError::Domain(format!("w = {w} exceeds ell = {ell}")));
    }
    let shell = binomial(ell, w);
    let ball = ball_size(ell, w);
    Ok(BallBound {
        loose: -(-ratio_to_f64(&shell, z_bits)).exp_m1(),
        full_ball: -(-ratio_to_f64(&ball, z_bits)).exp_m1(),
        ball_size: ball.to_string(),
    })
}

/// Probability that at most `k` of `n` targets go unmatched: 1 - exp(-2k^2/n).
pub fn subsequence_shortfall_bound(n: u64, k: u64) -> f64 {
    -(-2.0 * (k as f64).powi(2) / n as f64).exp_m1()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyConsumption {
    pub bits_per_tag: usize,
    /// Bits drawn once per session, besides the per-tag key.
    pub bits_per_session: usize,
    /// Exclusive upper limit on message length, when the scheme has one.
    pub max_message_bits: Option<String>,
}

/// (2^z / 2^t + 1) * z, the message-length ceiling of the composed scheme.
pub fn its_message_limit(z_bits: u32, t_bits: u32) -> BigUint {
    let two = BigUint::from(2u8);
    let num = (two.pow(z_bits) + two.pow(t_bits)) * z_bits;
    num / two.pow(t_bits)
}

fn its_fits(z_bits: u32, t_bits: u32, message_bits: &BigUint) -> bool {
    let two = BigUint::from(2u8);
    (two.pow(z_bits) + two.pow(t_bits)) * z_bits > message_bits * two.pow(t_bits)
}

pub fn key_consumption(scheme: &AuthScheme, message_bits: u128) -> Result<KeyConsumption, HashError> {
    let msg = BigUint::from(message_bits);
    let limit = match &scheme.variant {
        AuthVariant::ItsComposed(f) => {
            if !its_fits(f.z_bits, scheme.t_bits, &msg) {
                return Err(HashError::Domain(format!(
                    "{message_bits}-bit message exceeds the limit for z = {}, t = {}",
                    f.z_bits, scheme.t_bits
                )));
            }
            Some(its_message_limit(f.z_bits, scheme.t_bits).to_string())
        }
        _ => None,
    };
    Ok(KeyConsumption {
        bits_per_tag: scheme.key_bits_per_tag(),
        bits_per_session: scheme.secret_bits_per_session(),
        max_message_bits: limit,
    })
}

/// 2z + t for the composed scheme with width z.
pub fn its_key_bits(z_bits: u32, t_bits: u32) -> u64 {
    2 * z_bits as u64 + t_bits as u64
}

/// Smallest z whose composed scheme accepts `message_bits`, and its key cost.
pub fn its_minimal_key(message_bits: &BigUint, t_bits: u32) -> (u32, u64) {
    let mut z = t_bits.max(1);
    while !its_fits(z, t_bits, message_bits) {
        z += 1;
    }
    (z, its_key_bits(z, t_bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(16, 2), BigUint::from(120u32));
        assert_eq!(ball_size(16, 2), BigUint::from(137u32));
        assert_eq!(ball_size(64, 3), BigUint::from(43745u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
    }

    #[test]
    fn full_ball_equal_to_range() {
        let b = collision_ball_success_bound(8, 8, 8).unwrap();
        assert!((b.full_ball - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn domain_error() {
        assert!(collision_ball_success_bound(4, 5, 8).is_err());
    }
}
