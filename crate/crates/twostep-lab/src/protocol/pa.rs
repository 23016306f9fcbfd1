//! Toeplitz privacy amplification.
//!
//! Output bit i is the parity of seed[i + n - 1 - j] * key[j] over j, so the
//! r x n matrix is fixed by its n + r - 1 seed bits.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;

pub const PA_MARGIN_TEXT: &str = include_str!("../../../../docs/pa_margin_v1.txt");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaSpec {
    pub r: usize,
    pub n: usize,
    pub seed: BitString,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PaError {
    #[error("key has {got} bits, PA expects {expected}")]
    KeyLength { expected: usize, got: usize },
    #[error("seed has {got} bits, PA needs {expected}")]
    SeedLength { expected: usize, got: usize },
    #[error("no seed maps an all-zero key to a nonzero output")]
    Unsolvable,
}

fn margins() -> &'static [(usize, usize)] {
    static M: OnceLock<Vec<(usize, usize)>> = OnceLock::new();
    M.get_or_init(|| {
        PA_MARGIN_TEXT
            .lines()
            .filter_map(|l| {
                let p: Vec<&str> = l.split_whitespace().collect();
                match p.as_slice() {
                    ["margin", n, m] => Some((n.parse().unwrap(), m.parse().unwrap())),
                    _ => None,
                }
            })
            .collect()
    })
}

pub fn pa_margin(n: usize) -> usize {
    margins().iter().rev().find(|(min_n, _)| *min_n <= n).map(|m| m.1).unwrap_or(0)
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// r = max(0, floor(n (1 - h2(eps))) - margin).
pub fn pa_output_len(n: usize, eps: f64) -> usize {
    let keep = (n as f64 * (1.0 - binary_entropy(eps.min(0.5)))).floor() as usize;
    keep.saturating_sub(pa_margin(n))
}

impl PaSpec {
    pub fn random<R: rand::Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Self {
        Self {
            r,
            n,
            seed: BitString::random((n + r).saturating_sub(1), rng),
        }
    }

    pub fn check(&self) -> Result<(), PaError> {
        let expected = (self.n + self.r).saturating_sub(1);
        if self.seed.len() != expected {
            return Err(PaError::SeedLength {
                expected,
                got: self.seed.len(),
            });
        }
        Ok(())
    }
}

/// `len` bits of `bits` starting at `start`, as packed words.
fn window(bits: &BitString, start: usize, len: usize) -> Vec<u64> {
    let w = bits.words();
    let (q, s) = (start / 64, start % 64);
    let nw = len.div_ceil(64);
    let mut out = Vec::with_capacity(nw);
    for k in 0..nw {
        let lo = w.get(q + k).copied().unwrap_or(0);
        let v = if s == 0 {
            lo
        } else {
            (lo >> s) | (w.get(q + k + 1).copied().unwrap_or(0) << (64 - s))
        };
        out.push(v);
    }
    if len % 64 != 0 {
        out[nw - 1] &= (1u64 << (len % 64)) - 1;
    }
    out
}

fn reversed(key: &BitString) -> BitString {
    BitString::from_bools((0..key.len()).rev().map(|j| key.get(j)))
}

fn row_parity(seed: &BitString, rev_key: &[u64], i: usize, n: usize) -> bool {
    let win = window(seed, i, n);
    win.iter().zip(rev_key).map(|(a, b)| (a & b).count_ones()).sum::<u32>() % 2 == 1
}

pub fn pa_apply(spec: &PaSpec, key: &BitString) -> Result<BitString, PaError> {
    spec.check()?;
    if key.len() != spec.n {
        return Err(PaError::KeyLength {
            expected: spec.n,
            got: key.len(),
        });
    }
    let rk = reversed(key);
    Ok(BitString::from_bools((0..spec.r).map(|i| row_parity(&spec.seed, rk.words(), i, spec.n))))
}

/// Seed solving T(seed) key = target, agreeing with `base` on every free seed bit.
///
/// Row i has its highest nonzero coefficient at seed index i + p, where p is
/// the last set bit of the reversed key, so rows are solved in order.
pub struct PaSolver {
    n: usize,
    r: usize,
    pivot_shift: usize,
    rev_key: BitString,
}

impl PaSolver {
    pub fn new(key: &BitString, r: usize) -> Result<Self, PaError> {
        let rev_key = reversed(key);
        let pivot_shift = (0..key.len()).rev().find(|&j| rev_key.get(j)).ok_or(PaError::Unsolvable)?;
        Ok(Self {
            n: key.len(),
            r,
            pivot_shift,
            rev_key,
        })
    }

    fn propagate(&self, seed: &mut BitString, target: Option<&BitString>) {
        for i in 0..self.r {
            let want = target.is_some_and(|t| t.get(i));
            if row_parity(seed, self.rev_key.words(), i, self.n) != want {
                seed.flip(i + self.pivot_shift);
            }
        }
    }

    pub fn solve(&self, base: &BitString, target: &BitString) -> BitString {
        assert_eq!(target.len(), self.r);
        let mut seed = base.clone();
        self.propagate(&mut seed, Some(target));
        seed
    }

    /// Seed indices not fixed by any row.
    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let len = self.n + self.r - 1;
        (0..len).filter(move |&u| u < self.pivot_shift || u >= self.r + self.pivot_shift)
    }

    /// Seed positions that change when free index `u` flips and the rows are re-solved.
    pub fn null_vector(&self, u: usize) -> Vec<usize> {
        let mut v = BitString::zeros(self.n + self.r - 1);
        v.flip(u);
        if u < self.pivot_shift {
            self.propagate(&mut v, None);
        }
        (0..v.len()).filter(|&i| v.get(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(spec: &PaSpec, key: &BitString) -> BitString {
        BitString::from_bools((0..spec.r).map(|i| {
            (0..spec.n).fold(false, |acc, j| acc ^ (spec.seed.get(i + spec.n - 1 - j) & key.get(j)))
        }))
    }

    #[test]
    fn packed_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (n, r) in [(1, 1), (70, 30), (130, 129), (64, 64)] {
            let spec = PaSpec::random(n, r, &mut rng);
            let key = BitString::random(n, &mut rng);
            assert_eq!(pa_apply(&spec, &key).unwrap(), naive(&spec, &key));
        }
    }

    #[test]
    fn solver_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut key = BitString::random(150, &mut rng);
        key.set(0, false);
        key.set(1, false);
        key.set(2, true);
        let base = PaSpec::random(150, 90, &mut rng);
        let target = BitString::random(90, &mut rng);
        let solver = PaSolver::new(&key, 90).unwrap();
        let seed = solver.solve(&base.seed, &target);
        let spec = PaSpec { seed, ..base };
        assert_eq!(pa_apply(&spec, &key).unwrap(), target);
        for u in solver.free_indices().take(5).chain([0, 1]) {
            let mut s2 = spec.clone();
            for i in solver.null_vector(u) {
                s2.seed.flip(i);
            }
            assert_eq!(pa_apply(&s2, &key).unwrap(), target);
        }
    }

    #[test]
    fn output_length_rule() {
        assert_eq!(pa_output_len(100, 0.0), 92);
        assert_eq!(pa_output_len(2048, 0.0), 2048 - 64);
        assert_eq!(pa_output_len(10, 0.5), 0);
    }
}
