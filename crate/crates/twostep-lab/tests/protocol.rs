use std::collections::VecDeque;

use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twostep_lab::hashing::AuthScheme;
use twostep_lab::protocol::confirm::{confirm_epsilon, CONFIRM_BITS};
use twostep_lab::protocol::ec::{ec_code, ec_codes};
use twostep_lab::protocol::pa::PaError;
use twostep_lab::protocol::{
    apply_mask, confirm, ec_correct, ec_syndrome, pa_apply, run_protocol, sift_mask, AbortKind, Adversary,
    ConfirmSpec, EveReport, KeyRelation, PaSpec, Party, Role, SessionConfig, SessionParams, Variant, WireMessage,
};
use twostep_lab::quantum::random_bases;
use twostep_lab::BitString;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn key40() -> BitString {
    BitString::from_u64(0xa5c3f00f96, 40)
}

fn cfg(variant: Variant, auth: AuthScheme, n: usize) -> SessionConfig {
    SessionConfig::new(
        variant,
        auth,
        SessionParams {
            n_slots: n,
            ..Default::default()
        },
    )
}

#[test]
fn sift_keeps_half() {
    let mut r = rng(1);
    let n = 10_000;
    let mask = sift_mask(&random_bases(n, &mut r), &random_bases(n, &mut r)).unwrap();
    let density = mask.count_ones() as f64 / n as f64;
    assert!((density - 0.5).abs() <= 0.02, "{density}");
}

#[test]
fn sift_drops_lost_slots() {
    let a = vec![Some(false), Some(true), Some(true)];
    let b = vec![Some(false), None, Some(true)];
    let mask = sift_mask(&a, &b).unwrap();
    assert_eq!(mask, BitString::parse("101").unwrap());
    let raw = vec![Some(true), None, Some(false)];
    assert_eq!(apply_mask(&raw, &mask).unwrap(), BitString::parse("10").unwrap());
}

#[test]
fn frozen_syndromes() {
    let want = ["000010000000101", "100110001000101001", "011111000111010110111011"];
    for (i, w) in want.iter().enumerate() {
        assert_eq!(ec_syndrome(ec_code(i).unwrap(), &key40()), BitString::parse(w).unwrap(), "code {i}");
    }
}

#[test]
fn every_correctable_pattern_is_corrected() {
    // Every error pattern up to each code's radius in every block of a 3-block key
    let mut r = rng(2);
    for code in ec_codes() {
        let key = BitString::random(3 * code.block_len - 5, &mut r);
        let syn = ec_syndrome(code, &key);
        let n = key.len();
        let mut patterns: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        if code.radius >= 2 {
            for i in 0..n {
                for j in i + 1..n {
                    if i / code.block_len == j / code.block_len {
                        patterns.push(vec![i, j]);
                    }
                }
            }
        }
        for p in patterns {
            let mut noisy = key.clone();
            p.iter().for_each(|&i| noisy.flip(i));
            let (fixed, flipped) = ec_correct(code, &noisy, &syn).unwrap();
            assert_eq!(fixed, key, "code {} pattern {p:?}", code.index);
            assert_eq!(flipped, p.len());
        }
    }
}

#[test]
fn syndrome_length_is_checked() {
    let code = ec_code(0).unwrap();
    assert!(ec_correct(code, &key40(), &BitString::zeros(3)).is_err());
}

#[test]
fn frozen_confirmation() {
    assert_eq!(confirm(&ConfirmSpec::new(0x12345678), &key40()), 0xc80b48f1);
}

#[test]
fn confirmation_separates_close_keys() {
    let mut r = rng(3);
    let trials = 10_000;
    let len = 256;
    let mut differ = 0;
    for _ in 0..trials {
        let spec = ConfirmSpec::new(rand::Rng::gen(&mut r));
        let a = BitString::random(len, &mut r);
        let mut b = a.clone();
        b.flip(rand::Rng::gen_range(&mut r, 0..len));
        differ += (confirm(&spec, &a) != confirm(&spec, &b)) as usize;
    }
    let eps = confirm_epsilon(len, CONFIRM_BITS);
    let eps = eps.to_f64().unwrap();
    assert!(differ as f64 / trials as f64 >= 1.0 - eps);
}

#[test]
fn frozen_toeplitz() {
    let spec = PaSpec {
        r: 4,
        n: 10,
        seed: BitString::from_u64(0x15a5a5a, 13),
    };
    assert_eq!(pa_apply(&spec, &BitString::from_u64(0x2d7, 10)).unwrap(), BitString::parse("0110").unwrap());
    assert_eq!(pa_apply(&spec, &BitString::zeros(10)).unwrap(), BitString::zeros(4));
    assert!(matches!(pa_apply(&spec, &BitString::zeros(9)), Err(PaError::KeyLength { .. })));
}

#[test]
fn honest_sessions_agree_under_every_rung() {
    let mut r = rng(4);
    for name in ["twostep", "salt", "nonce-a", "nonce-b", "fixed-secret", "fresh-secret", "its"] {
        for v in Variant::ALL {
            let c = cfg(v, AuthScheme::from_name(name, 32, 16).unwrap(), 256);
            let out = run_protocol(&c, None, &mut r);
            assert_eq!(out.abort_by, None, "{name} {v:?}");
            assert_eq!(out.relation, KeyRelation::Honest, "{name} {v:?}");
            assert_eq!(out.final_a, out.final_b);
            assert_eq!(out.tags_sent, v.tag_count());
            // the one-time pad covers the actual syndrome, the ledger sizes for all slots
            if v.otp_syndrome() {
                assert!(out.key_bits_consumed < c.ledger_need());
            } else {
                assert_eq!(out.key_bits_consumed, c.ledger_need(), "{name} {v:?}");
            }
        }
    }
}

#[test]
fn noisy_channel_still_agrees() {
    let mut c = cfg(Variant::P1, AuthScheme::two_step(32, 16), 1024);
    c.params.channel.flip_prob = 0.02;
    let mut r = rng(5);
    for _ in 0..20 {
        let out = run_protocol(&c, None, &mut r);
        assert_eq!(out.relation, KeyRelation::Honest);
        assert!(out.qber_observed.unwrap() > 0.0);
    }
}

/// Relays everything, flipping one bit of the first Alice to Bob message.
struct BitFlip;

impl Adversary for BitFlip {
    fn drive(&self, alice: &mut Party, bob: &mut Party, _rng: &mut ChaCha8Rng) -> EveReport {
        let frame = alice.start();
        let mut queue: VecDeque<(Role, WireMessage)> =
            bob.receive_quantum(frame).into_iter().map(|m| (Role::Alice, m)).collect();
        let mut done = false;
        while let Some((to, mut msg)) = queue.pop_front() {
            if to == Role::Bob && !done {
                msg.fields[0].flip(0);
                done = true;
            }
            let party = if to == Role::Alice { &mut *alice } else { &mut *bob };
            queue.extend(party.receive(&msg).into_iter().map(|m| (to.peer(), m)));
        }
        EveReport::default()
    }
}

#[test]
fn tampered_message_fails_its_tag() {
    let t_bits = 4;
    let trials = 2000;
    let c = cfg(Variant::P1, AuthScheme::from_name("its", 32, t_bits).unwrap(), 256);
    let mut r = rng(6);
    let mut tag_failures = 0;
    for _ in 0..trials {
        let out = run_protocol(&c, Some(&BitFlip), &mut r);
        tag_failures += out.abort_by.is_some_and(|a| a.kind == AbortKind::TagFailure { msg_type: 0x03 }) as usize;
    }
    let bound = 1.0 - 2.0 / (1u64 << t_bits) as f64;
    let freq = tag_failures as f64 / trials as f64;
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    assert!(freq >= bound - 3.0 * sigma, "{freq} < {bound}");
}

proptest! {
    #[test]
    fn syndrome_is_linear(seed in any::<u64>(), len in 1usize..200, code in 0usize..3) {
        let mut r = rng(seed);
        let a = BitString::random(len, &mut r);
        let b = BitString::random(len, &mut r);
        let code = ec_code(code).unwrap();
        prop_assert_eq!(ec_syndrome(code, &a.xor(&b)), ec_syndrome(code, &a).xor(&ec_syndrome(code, &b)));
    }

    #[test]
    fn toeplitz_is_linear(seed in any::<u64>(), n in 1usize..150, r_out in 1usize..40) {
        let mut r = rng(seed);
        let spec = PaSpec::random(n, r_out, &mut r);
        let a = BitString::random(n, &mut r);
        let b = BitString::random(n, &mut r);
        let sum = pa_apply(&spec, &a).unwrap().xor(&pa_apply(&spec, &b).unwrap());
        prop_assert_eq!(pa_apply(&spec, &a.xor(&b)).unwrap(), sum);
    }
}
