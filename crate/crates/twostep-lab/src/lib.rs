//! Simulator and attack laboratory for QKD post-processing authenticated
//! with two-step MACs t = h_K(f(m)), and for the countermeasures that
//! repair it.

pub mod adversary;
pub mod bits;
pub mod gf2n;
pub mod harness;
pub mod hashing;
pub mod protocol;
pub mod quantum;

use num_bigint::BigInt;
use num_rational::BigRational;

pub use bits::BitString;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HashError {
    #[error("digest has {got} bits, expected {expected}")]
    DigestLength { expected: usize, got: usize },
    #[error("message of {bits} bits exceeds capacity of {capacity} bits")]
    MessageTooLong { bits: usize, capacity: usize },
    #[error("scheme requires a prefix secret or nonce")]
    MissingSecret,
    #[error("scheme forbids a prefix secret")]
    ForbiddenSecret,
    #[error("enumeration needs {evaluations} evaluations, above the 2^28 guard")]
    EnumerationGuard { evaluations: u128 },
    #[error("outer family is not strongly universal")]
    NotSu2,
    #[error("{0}")]
    Domain(String),
}

/// Exact `n / d`.
pub fn ratio(n: u64, d: u128) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}
