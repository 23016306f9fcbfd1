//! Sifting: which slots both sides measured in the same basis.

use crate::bits::BitString;
use crate::quantum::{BasisString, RawKey};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SiftError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("mask selects slot {0}, which holds no result")]
    EmptySelected(usize),
}

/// 1 where both bases exist and agree; an empty basis counts as a mismatch.
pub fn sift_mask(bases_a: &BasisString, bases_b: &BasisString) -> Result<BitString, SiftError> {
    if bases_a.len() != bases_b.len() {
        return Err(SiftError::LengthMismatch(bases_a.len(), bases_b.len()));
    }
    Ok(BitString::from_bools(
        bases_a.iter().zip(bases_b).map(|(a, b)| a.is_some() && a == b),
    ))
}

pub fn apply_mask(raw: &RawKey, mask: &BitString) -> Result<BitString, SiftError> {
    if raw.len() != mask.len() {
        return Err(SiftError::LengthMismatch(raw.len(), mask.len()));
    }
    let mut out = BitString::new();
    for (k, r) in raw.iter().enumerate() {
        if mask.get(k) {
            out.push(r.ok_or(SiftError::EmptySelected(k))?);
        }
    }
    Ok(out)
}

pub fn bases_to_bits(bases: &BasisString) -> BitString {
    BitString::from_bools(bases.iter().map(|b| b.unwrap_or(false)))
}

pub fn detected_bits(bases: &BasisString) -> BitString {
    BitString::from_bools(bases.iter().map(|b| b.is_some()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_mismatch() {
        let a = vec![Some(true), Some(false), Some(true)];
        let b = vec![Some(true), None, Some(false)];
        assert_eq!(sift_mask(&a, &b).unwrap().to_string(), "100");
        assert_eq!(sift_mask(&a, &vec![None; 3]).unwrap().to_string(), "000");
    }

    #[test]
    fn masking_rejects_empty() {
        let raw = vec![Some(true), None];
        assert_eq!(apply_mask(&raw, &BitString::parse("10").unwrap()).unwrap().to_string(), "1");
        assert!(apply_mask(&raw, &BitString::parse("01").unwrap()).is_err());
    }
}
