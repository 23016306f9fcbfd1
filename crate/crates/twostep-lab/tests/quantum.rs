use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twostep_lab::protocol::{apply_mask, sift_mask};
use twostep_lab::quantum::{
    intercept_resend, measure, memory_measure, memory_store, prepare, random_bases, BasisString, ChannelParams, RawKey,
    Slot,
};

const SLOTS: usize = 10_000;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn raw(n: usize, r: &mut ChaCha8Rng) -> RawKey {
    (0..n).map(|_| Some(r.gen())).collect()
}

fn agreement(a: &RawKey, b: &RawKey) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

fn flipped(bases: &BasisString) -> BasisString {
    bases.iter().map(|b| b.map(|x| !x)).collect()
}

#[test]
fn prepare_layout() {
    let f = prepare(&vec![Some(true), Some(false), Some(true), Some(false)], &vec![Some(false); 4]).unwrap();
    let want: Vec<Slot> = [true, false, true, false].map(|bit| Slot::Prepared { basis: false, bit }).to_vec();
    assert_eq!(f.slots(), &want[..]);
    assert!(prepare(&vec![Some(true)], &vec![]).is_err());
    assert!(prepare(&vec![None], &vec![Some(true)]).is_err());
}

#[test]
fn wrong_bases_agree_half_the_time() {
    let mut r = rng(1);
    let a = raw(SLOTS, &mut r);
    let bases = random_bases(SLOTS, &mut r);
    let mut f = prepare(&a, &bases).unwrap();
    let got = measure(&mut f, &flipped(&bases), ChannelParams::IDEAL, &mut r).unwrap();
    assert!((agreement(&a, &got) - 0.5).abs() <= 0.02);
}

#[test]
fn loss_fraction() {
    let mut r = rng(2);
    let a = raw(SLOTS, &mut r);
    let bases = random_bases(SLOTS, &mut r);
    let mut f = prepare(&a, &bases).unwrap();
    let params = ChannelParams {
        loss_prob: 0.1,
        flip_prob: 0.0,
    };
    let got = measure(&mut f, &bases, params, &mut r).unwrap();
    let empty = got.iter().filter(|x| x.is_none()).count() as f64 / SLOTS as f64;
    assert!((empty - 0.1).abs() <= 0.01, "{empty}");
}

#[test]
fn memory_copies_alice() {
    let mut r = rng(3);
    let a = raw(SLOTS, &mut r);
    let bases = random_bases(SLOTS, &mut r);
    let mut h = memory_store(prepare(&a, &bases).unwrap());
    assert_eq!(memory_measure(&mut h, &bases, &mut r).unwrap(), a);
    assert!(memory_measure(&mut h, &bases, &mut r).is_err());

    let mut h = memory_store(prepare(&a, &bases).unwrap());
    let got = memory_measure(&mut h, &flipped(&bases), &mut r).unwrap();
    assert!((agreement(&a, &got) - 0.5).abs() <= 0.02);
}

#[test]
fn frames_measure_once() {
    let mut r = rng(4);
    let bases = random_bases(8, &mut r);
    let mut f = prepare(&raw(8, &mut r), &bases).unwrap();
    measure(&mut f, &bases, ChannelParams::IDEAL, &mut r).unwrap();
    assert!(measure(&mut f, &bases, ChannelParams::IDEAL, &mut r).is_err());
}

#[test]
fn intercept_resend_quarter_error() {
    let mut r = rng(5);
    let n = 40_000;
    let a = raw(n, &mut r);
    let ba = random_bases(n, &mut r);
    let be = random_bases(n, &mut r);
    let bb = random_bases(n, &mut r);
    let mut f = prepare(&a, &ba).unwrap();
    let (eve, mut resent) = intercept_resend(&mut f, &be, &mut r).unwrap();
    let b = measure(&mut resent, &bb, ChannelParams::IDEAL, &mut r).unwrap();
    let mask = sift_mask(&ba, &bb).unwrap();
    let ka = apply_mask(&a, &mask).unwrap();
    let kb = apply_mask(&b, &mask).unwrap();
    let qber = ka.hamming(&kb) as f64 / ka.len() as f64;
    assert!(ka.len() >= 10_000);
    assert!((qber - 0.25).abs() <= 0.02, "{qber}");
    // Bob sees Eve's bit wherever he used her basis
    for k in 0..n {
        if bb[k] == be[k] {
            assert_eq!(b[k], eve[k]);
        }
    }
}

#[test]
fn intercept_in_alice_bases_is_invisible() {
    let mut r = rng(6);
    let a = raw(2000, &mut r);
    let ba = random_bases(2000, &mut r);
    let mut f = prepare(&a, &ba).unwrap();
    let (_, mut resent) = intercept_resend(&mut f, &ba, &mut r).unwrap();
    assert_eq!(measure(&mut resent, &ba, ChannelParams::IDEAL, &mut r).unwrap(), a);
}

#[test]
fn mismatched_outcomes_pass_chi_square() {
    // 2x2 table of (prepared bit, outcome) over 10^5 basis-mismatched slots
    let mut r = rng(7);
    let n = 100_000;
    let a = raw(n, &mut r);
    let ba = random_bases(n, &mut r);
    let mut f = prepare(&a, &ba).unwrap();
    let got = measure(&mut f, &flipped(&ba), ChannelParams::IDEAL, &mut r).unwrap();
    let mut cells = [0f64; 4];
    for (x, y) in a.iter().zip(&got) {
        cells[(x.unwrap() as usize) * 2 + y.unwrap() as usize] += 1.0;
    }
    let e = n as f64 / 4.0;
    let chi2: f64 = cells.iter().map(|c| (c - e).powi(2) / e).sum();
    // 3 degrees of freedom, p = 0.001
    assert!(chi2 < 16.266, "chi2 {chi2}");
}

proptest! {
    #[test]
    fn matching_bases_recover_bits(seed in any::<u64>(), n in 1usize..300) {
        let mut r = rng(seed);
        let a = raw(n, &mut r);
        let bases = random_bases(n, &mut r);
        let mut f = prepare(&a, &bases).unwrap();
        prop_assert_eq!(f.len(), n);
        prop_assert_eq!(measure(&mut f, &bases, ChannelParams::IDEAL, &mut r).unwrap(), a);
    }
}
