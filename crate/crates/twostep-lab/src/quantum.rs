//! Classical simulation of ideal BB84 conjugate coding.
//!
//! A slot is either a prepared (basis, bit) pair or lost. Measuring in the
//! preparation basis returns the bit; measuring in the other basis returns a
//! uniform bit. Frames and memory handles can be measured once.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// `None` marks a slot with no basis (Bob registered nothing).
pub type BasisString = Vec<Option<bool>>;
/// `None` marks an empty measurement result.
pub type RawKey = Vec<Option<bool>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Prepared { basis: bool, bit: bool },
    Lost,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantumFrame {
    slots: Vec<Slot>,
    consumed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub loss_prob: f64,
    pub flip_prob: f64,
}

impl ChannelParams {
    pub const IDEAL: ChannelParams = ChannelParams {
        loss_prob: 0.0,
        flip_prob: 0.0,
    };
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::IDEAL
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuantumError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("raw key for preparation contains an empty slot at {0}")]
    EmptyInPreparation(usize),
    #[error("frame already measured")]
    AlreadyMeasured,
}

pub fn random_bases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BasisString {
    (0..n).map(|_| Some(rng.gen())).collect()
}

pub fn random_raw<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RawKey {
    (0..n).map(|_| Some(rng.gen())).collect()
}

impl QuantumFrame {
    pub fn from_slots(slots: Vec<Slot>) -> Self {
        Self { slots, consumed: false }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

pub fn prepare(raw: &RawKey, bases: &BasisString) -> Result<QuantumFrame, QuantumError> {
    if raw.len() != bases.len() {
        return Err(QuantumError::LengthMismatch(raw.len(), bases.len()));
    }
    let mut slots = Vec::with_capacity(raw.len());
    for (k, (r, b)) in raw.iter().zip(bases).enumerate() {
        match (r, b) {
            (Some(bit), Some(basis)) => slots.push(Slot::Prepared {
                basis: *basis,
                bit: *bit,
            }),
            _ => return Err(QuantumError::EmptyInPreparation(k)),
        }
    }
    Ok(QuantumFrame::from_slots(slots))
}

fn measure_slots<R: Rng + ?Sized>(slots: &[Slot], bases: &BasisString, params: ChannelParams, rng: &mut R) -> RawKey {
    slots
        .iter()
        .zip(bases)
        .map(|(slot, basis)| {
            let Slot::Prepared { basis: prep, bit } = *slot else {
                return None;
            };
            if params.loss_prob > 0.0 && rng.gen_bool(params.loss_prob) {
                return None;
            }
            let basis = (*basis)?;
            if basis == prep {
                let flip = params.flip_prob > 0.0 && rng.gen_bool(params.flip_prob);
                Some(bit ^ flip)
            } else {
                Some(rng.gen())
            }
        })
        .collect()
}

pub fn measure<R: Rng + ?Sized>(
    frame: &mut QuantumFrame,
    bases: &BasisString,
    params: ChannelParams,
    rng: &mut R,
) -> Result<RawKey, QuantumError> {
    if frame.consumed {
        return Err(QuantumError::AlreadyMeasured);
    }
    if frame.len() != bases.len() {
        return Err(QuantumError::LengthMismatch(frame.len(), bases.len()));
    }
    frame.consumed = true;
    Ok(measure_slots(&frame.slots, bases, params, rng))
}

/// Perfect, unbounded storage of an intercepted frame.
#[derive(Debug)]
pub struct MemoryHandle {
    frame: QuantumFrame,
}

pub fn memory_store(frame: QuantumFrame) -> MemoryHandle {
    MemoryHandle { frame }
}

pub fn memory_measure<R: Rng + ?Sized>(
    handle: &mut MemoryHandle,
    bases: &BasisString,
    rng: &mut R,
) -> Result<RawKey, QuantumError> {
    measure(&mut handle.frame, bases, ChannelParams::IDEAL, rng)
}

/// Measures in `eve_bases` and re-prepares what was seen; empty results go on as lost slots.
pub fn intercept_resend<R: Rng + ?Sized>(
    frame: &mut QuantumFrame,
    eve_bases: &BasisString,
    rng: &mut R,
) -> Result<(RawKey, QuantumFrame), QuantumError> {
    let eve_raw = measure(frame, eve_bases, ChannelParams::IDEAL, rng)?;
    let slots = eve_raw
        .iter()
        .zip(eve_bases)
        .map(|(r, b)| match (r, b) {
            (Some(bit), Some(basis)) => Slot::Prepared {
                basis: *basis,
                bit: *bit,
            },
            _ => Slot::Lost,
        })
        .collect();
    Ok((eve_raw, QuantumFrame::from_slots(slots)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Vec<Option<bool>> {
        s.chars().map(|c| Some(c == '1')).collect()
    }

    #[test]
    fn prepare_is_definitional() {
        let f = prepare(&bits("1010"), &bits("0000")).unwrap();
        let want: Vec<Slot> = [true, false, true, false]
            .iter()
            .map(|&bit| Slot::Prepared { basis: false, bit })
            .collect();
        assert_eq!(f.slots(), &want[..]);
    }

    #[test]
    fn matching_bases_recover_raw() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = random_raw(256, &mut rng);
        let bases = random_bases(256, &mut rng);
        let mut f = prepare(&raw, &bases).unwrap();
        assert_eq!(measure(&mut f, &bases, ChannelParams::IDEAL, &mut rng).unwrap(), raw);
    }

    #[test]
    fn frame_is_single_use() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut f = prepare(&bits("11"), &bits("01")).unwrap();
        measure(&mut f, &bits("01"), ChannelParams::IDEAL, &mut rng).unwrap();
        assert_eq!(
            measure(&mut f, &bits("01"), ChannelParams::IDEAL, &mut rng),
            Err(QuantumError::AlreadyMeasured)
        );
        let mut h = memory_store(prepare(&bits("11"), &bits("01")).unwrap());
        memory_measure(&mut h, &bits("01"), &mut rng).unwrap();
        assert!(memory_measure(&mut h, &bits("01"), &mut rng).is_err());
    }

    #[test]
    fn empty_in_preparation_rejected() {
        assert_eq!(
            prepare(&vec![Some(true), None], &bits("00")),
            Err(QuantumError::EmptyInPreparation(1))
        );
    }
}
