//! Subsequence search and sifting-mask crafting.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::hashing::bounds::binomial;
use crate::quantum::RawKey;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubseqError {
    #[error("empty input")]
    Empty,
    #[error("need 1 <= m <= n, got m={m}, n={n}")]
    Domain { m: usize, n: usize },
    #[error("target of {target} bits exceeds half of {raw} raw bits")]
    TargetTooLong { target: usize, raw: usize },
    #[error("shortfall {shortfall} exceeds budget {budget}")]
    OverBudget { shortfall: usize, budget: usize },
}

/// Greedy first-match scan: 0-based positions j_i with S[j_i] = s[i], or
/// `None` when S runs out first.
pub fn find_subsequence(s: &BitString, big: &BitString) -> Result<Option<Vec<usize>>, SubseqError> {
    if s.is_empty() || big.is_empty() {
        return Err(SubseqError::Empty);
    }
    let (found, _) = greedy(s, big.len(), |j| Some(big.get(j)));
    Ok((found.len() == s.len()).then_some(found))
}

fn greedy(s: &BitString, n: usize, at: impl Fn(usize) -> Option<bool>) -> (Vec<usize>, usize) {
    let mut out = Vec::with_capacity(s.len());
    let mut j = 0;
    for want in s.iter() {
        while j < n && at(j) != Some(want) {
            j += 1;
        }
        if j == n {
            break;
        }
        out.push(j);
        j += 1;
    }
    (out, j)
}

/// Probability that a fixed s of length m is a subsequence of a uniform S of length n:
/// 2^-n sum_{l=m..n} C(n, l).
pub fn subsequence_probability(m: usize, n: usize) -> Result<BigRational, SubseqError> {
    if m == 0 || m > n {
        return Err(SubseqError::Domain { m, n });
    }
    let mut num = BigInt::zero();
    for l in m..=n {
        num += BigInt::from(binomial(n as u64, l as u64));
    }
    Ok(BigRational::new(num, BigInt::one() << n))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CraftedMask {
    pub mask: BitString,
    pub mismatches: usize,
}

/// Mask that makes `apply_mask(raw_a, mask)` reproduce `target`, with the
/// unmatched tail filled from the first free positions after the last match.
pub fn craft_bases_mask(raw_a: &RawKey, target: &BitString, k_budget: usize) -> Result<CraftedMask, SubseqError> {
    let n = raw_a.len();
    if target.len() > n / 2 {
        return Err(SubseqError::TargetTooLong {
            target: target.len(),
            raw: n,
        });
    }
    let (matched, _) = greedy(target, n, |j| raw_a[j]);
    let shortfall = target.len() - matched.len();
    if shortfall > k_budget {
        return Err(SubseqError::OverBudget {
            shortfall,
            budget: k_budget,
        });
    }
    let start = matched.last().map_or(0, |&j| j + 1);
    let fill: Vec<usize> = (start..n).filter(|&j| raw_a[j].is_some()).take(shortfall).collect();
    if fill.len() < shortfall {
        return Err(SubseqError::OverBudget {
            shortfall,
            budget: fill.len(),
        });
    }
    let mut mask = BitString::zeros(n);
    for &j in matched.iter().chain(&fill) {
        mask.set(j, true);
    }
    Ok(CraftedMask {
        mask,
        mismatches: shortfall,
    })
}

/// Pairs {p, q}: moving selected p to unselected q > p carrying the same raw bit,
/// with nothing selected in between, leaves the sifted key unchanged.
/// The pairs are disjoint, so any subset may be applied together.
pub fn swap_atoms(raw: &RawKey, mask: &BitString) -> Vec<Vec<usize>> {
    let n = raw.len();
    let mut out = Vec::new();
    for p in (0..n).filter(|&p| mask.get(p)) {
        let mut q = p + 1;
        while q < n && !mask.get(q) {
            if raw[q].is_some() && raw[q] == raw[p] {
                out.push(vec![p, q]);
                break;
            }
            q += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::apply_mask;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(find_subsequence(&bs("01"), &bs("0011")).unwrap(), Some(vec![0, 2]));
        assert_eq!(find_subsequence(&bs("11"), &bs("00")).unwrap(), None);
        assert_eq!(find_subsequence(&bs("101"), &bs("100110")).unwrap(), Some(vec![0, 1, 3]));
        assert!(find_subsequence(&bs(""), &bs("0")).is_err());
    }

    #[test]
    fn probability_examples() {
        assert_eq!(subsequence_probability(2, 4).unwrap(), crate::ratio(11, 16));
        assert_eq!(subsequence_probability(5, 5).unwrap(), crate::ratio(1, 32));
        assert!(subsequence_probability(5, 4).is_err());
    }

    #[test]
    fn all_ones_target_in_zeros() {
        let raw: RawKey = vec![Some(false); 8];
        let c = craft_bases_mask(&raw, &bs("1111"), 4).unwrap();
        assert_eq!(c.mask.to_string(), "11110000");
        assert_eq!(c.mismatches, 4);
        assert!(craft_bases_mask(&raw, &bs("1111"), 3).is_err());
    }

    #[test]
    fn swaps_preserve_sifted_key() {
        let raw: RawKey = "0110100111010010".chars().map(|c| Some(c == '1')).collect();
        let target = bs("01101");
        let c = craft_bases_mask(&raw, &target, 0).unwrap();
        let atoms = swap_atoms(&raw, &c.mask);
        assert!(!atoms.is_empty());
        let mut m = c.mask.clone();
        for a in &atoms {
            for &p in a {
                m.flip(p);
            }
        }
        assert_eq!(apply_mask(&raw, &m).unwrap(), target);
    }
}
