//! Second-preimage search under the public hash f, over a ball of small
//! mutations around the message Eve wants to send.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::hashing::PublicHashSpec;
use crate::protocol::WireMessage;

/// Mutations allowed on `base`. Each atom is a set of frame bit positions
/// flipped together; a candidate of weight w flips w distinct atoms.
#[derive(Clone, Debug)]
pub struct MutationSpace {
    pub base: WireMessage,
    /// Bits hashed before the frame (salt, nonce, earlier frames of a delayed tag).
    pub prefix: BitString,
    /// Bits hashed after the frame.
    pub suffix: BitString,
    pub atoms: Vec<Vec<usize>>,
    pub w_max: usize,
}

impl MutationSpace {
    /// One atom per listed bit of field `field`.
    pub fn single_bits(base: WireMessage, field: usize, positions: impl IntoIterator<Item = usize>, w_max: usize) -> Self {
        let off = base.field_bit_offset(field);
        let len = base.fields[field].len();
        let atoms = positions
            .into_iter()
            .inspect(|&p| assert!(p < len, "position {p} outside field of {len} bits"))
            .map(|p| vec![off + p])
            .collect();
        Self {
            base,
            prefix: BitString::new(),
            suffix: BitString::new(),
            atoms,
            w_max,
        }
    }

    /// Atoms given as bit positions inside field `field`.
    pub fn field_atoms(base: WireMessage, field: usize, atoms: Vec<Vec<usize>>, w_max: usize) -> Self {
        let off = base.field_bit_offset(field);
        let atoms = atoms.into_iter().map(|a| a.into_iter().map(|p| off + p).collect()).collect();
        Self {
            base,
            prefix: BitString::new(),
            suffix: BitString::new(),
            atoms,
            w_max,
        }
    }

    pub fn within(mut self, prefix: BitString, suffix: BitString) -> Self {
        self.prefix = prefix;
        self.suffix = suffix;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForgeResult {
    pub found: bool,
    /// The colliding message, or the unmodified base when nothing was found.
    pub message: WireMessage,
    pub weight_used: usize,
    pub candidates_tested: u64,
    /// Indices into the space's atoms that were flipped.
    pub atoms_used: Vec<usize>,
}

/// f over prefix ‖ frame ‖ suffix.
pub fn digest_in_context(spec: &PublicHashSpec, prefix: &BitString, frame: &[u8], suffix: &BitString) -> u64 {
    let all = prefix
        .concat(&BitString::from_bytes(frame, frame.len() * 8))
        .concat(suffix);
    spec.digest_value(&all)
}

/// Searches candidates by ascending weight, lexicographic in atom index within
/// a weight, and returns the first whose digest equals `target`.
pub fn find_colliding_message(space: &MutationSpace, target: u64, spec: &PublicHashSpec) -> ForgeResult {
    let frame = space.base.frame_bytes();
    let frame_bits = frame.len() * 8;
    let full = space
        .prefix
        .concat(&BitString::from_bytes(&frame, frame_bits))
        .concat(&space.suffix);
    let bit_len = full.len();
    let mut bytes = full.to_bytes();
    let shift = space.prefix.len();
    let states = spec.prefix_states(&bytes);

    // atom -> (byte, mask) pairs, plus the first word it touches
    let compiled: Vec<(Vec<(usize, u8)>, usize)> = space
        .atoms
        .iter()
        .map(|atom| {
            let mut pairs: Vec<(usize, u8)> = Vec::new();
            for &p in atom {
                assert!(p < frame_bits, "atom bit {p} outside frame");
                let q = p + shift;
                let (b, m) = (q / 8, 0x80u8 >> (q % 8));
                match pairs.iter_mut().find(|(bb, _)| *bb == b) {
                    Some(e) => e.1 ^= m,
                    None => pairs.push((b, m)),
                }
            }
            let first = pairs.iter().map(|p| p.0).min().unwrap_or(usize::MAX) / 8;
            (pairs, first)
        })
        .collect();

    let mut tested = 0u64;
    let n = compiled.len();
    for w in 0..=space.w_max.min(n) {
        let mut idx: Vec<usize> = (0..w).collect();
        loop {
            for &i in &idx {
                for &(b, m) in &compiled[i].0 {
                    bytes[b] ^= m;
                }
            }
            let first = idx.iter().map(|&i| compiled[i].1).min().unwrap_or(states.len() - 1);
            let first = first.min(states.len() - 1);
            let d = spec.digest_resume(states[first], first, &bytes, bit_len);
            tested += 1;
            if d == target {
                let msg_bits = BitString::from_bytes(&bytes, bit_len).slice(shift, shift + frame_bits);
                let mut message =
                    WireMessage::from_frame_bytes(&msg_bits.to_bytes()).expect("atoms keep the frame layout intact");
                message.tag = space.base.tag.clone();
                message.nonce = space.base.nonce.clone();
                return ForgeResult {
                    found: true,
                    message,
                    weight_used: w,
                    candidates_tested: tested,
                    atoms_used: idx,
                };
            }
            for &i in &idx {
                for &(b, m) in &compiled[i].0 {
                    bytes[b] ^= m;
                }
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    ForgeResult {
        found: false,
        message: space.base.clone(),
        weight_used: 0,
        candidates_tested: tested,
        atoms_used: Vec::new(),
    }
}

/// Advances a sorted index set to its lexicographic successor.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let w = idx.len();
    let mut i = w;
    while i > 0 {
        i -= 1;
        if idx[i] < n - w + i {
            idx[i] += 1;
            for j in i + 1..w {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn combinations_in_order() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn weight_zero_hit() {
        let spec = PublicHashSpec::new(12);
        let msg = WireMessage::new(1, 3, vec![BitString::from_u64(0xdead_beef, 64)]);
        let target = spec.digest_value(&msg.frame_bits());
        let space = MutationSpace::single_bits(msg.clone(), 0, 0..64, 3);
        let r = find_colliding_message(&space, target, &spec);
        assert!(r.found);
        assert_eq!(r.candidates_tested, 1);
        assert_eq!(r.message.frame_bytes(), msg.frame_bytes());
    }

    #[test]
    fn hits_collide_in_context() {
        let spec = PublicHashSpec::new(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let orig = WireMessage::new(1, 3, vec![BitString::random(64, &mut rng)]);
            let want = WireMessage::new(1, 3, vec![BitString::random(64, &mut rng)]);
            let pre = BitString::random(37, &mut rng);
            let suf = BitString::random(80, &mut rng);
            let target = digest_in_context(&spec, &pre, &orig.frame_bytes(), &suf);
            let space = MutationSpace::single_bits(want.clone(), 0, 0..64, 3).within(pre.clone(), suf.clone());
            let r = find_colliding_message(&space, target, &spec);
            assert!(r.found);
            assert_eq!(digest_in_context(&spec, &pre, &r.message.frame_bytes(), &suf), target);
            assert_eq!(r.message.fields[0].hamming(&want.fields[0]), r.weight_used);
        }
    }
}
