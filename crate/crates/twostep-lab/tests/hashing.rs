use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twostep_lab::gf2n::Gf2n;
use twostep_lab::hashing::bounds::{ball_size, its_key_bits, its_minimal_key};
use twostep_lab::hashing::family::composition_epsilon;
use twostep_lab::hashing::poly::pad_blocks;
use twostep_lab::hashing::{
    collision_ball_success_bound, key_consumption, poly_au2_eval, public_hash_f, su2_eval, two_step_tag,
    verify_composition_theorem, verify_family, Au2FamilySpec, AuthScheme, AuthVariant, Family, FamilyKind,
    PublicHashSpec, Su2Key, Su2Params,
};
use twostep_lab::{ratio, BitString};

fn bits(v: u64, w: usize) -> BitString {
    BitString::from_u64(v, w)
}

fn m100() -> BitString {
    bits(0xdead_beef_cafe_f00d, 64).concat(&bits(0x1_2345_6789, 36))
}

// Frozen from an independent reimplementation of the mixer, field and
// polynomial hash (gen/oracles.py).
#[test]
fn mixer_reference_digests() {
    assert_eq!(PublicHashSpec::new(8).digest_value(&BitString::new()), 0xeb);
    assert_eq!(PublicHashSpec::new(12).digest_value(&BitString::parse("10110").unwrap()), 0xee5);
    assert_eq!(
        PublicHashSpec::new(64).digest_value(&bits(0x0123_4567_89ab_cdef, 64)),
        0xc50e_1fda_0c3b_6b25
    );
    assert_eq!(PublicHashSpec::new(32).digest_value(&m100()), 0xfb25_6641);
    assert_eq!(public_hash_f(&PublicHashSpec::new(8), &BitString::new()), bits(0xeb, 8));
}

#[test]
fn field_reference_products() {
    assert_eq!(Gf2n::new(12).mul(0xabc, 0x123), 0x103);
    assert_eq!(Gf2n::new(32).mul(0xdead_beef, 0x0123_4567), 0x8555_ccfb);
    assert_eq!(Gf2n::new(64).mul(0x0123_4567_89ab_cdef, 0xfedc_ba98_7654_3210), 0x4882_7ab5_5d97_6fa0);
}

#[test]
fn poly_and_su2_reference_values() {
    let d = poly_au2_eval(&Au2FamilySpec::new(8, 8), 0x53, &bits(0xabcde, 20)).unwrap();
    assert_eq!(d, bits(0xfc, 8));
    let d = poly_au2_eval(&Au2FamilySpec::new(16, 16), 0x1234, &m100()).unwrap();
    assert_eq!(d, bits(0x73f2, 16));
    let p = Su2Params::new(12, 16);
    assert_eq!(p.eval_value(Su2Key { a: 0x9abc, b: 0x5555 }, 0x321), 0x64cd);
    let p = Su2Params::new(32, 16);
    assert_eq!(p.eval_value(Su2Key { a: 0xdead_beef, b: 0x0f0f }, 0xfb25_6641), 0x92a6);
}

#[test]
fn avalanche() {
    let spec = PublicHashSpec::new(64);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 10_000;
    let mut flips = [0u32; 64];
    for _ in 0..trials {
        let m = BitString::random(64, &mut rng);
        let mut m2 = m.clone();
        m2.flip(rng.gen_range(0..64));
        let x = spec.digest_value(&m) ^ spec.digest_value(&m2);
        for (i, f) in flips.iter_mut().enumerate() {
            *f += ((x >> i) & 1) as u32;
        }
    }
    for (i, &f) in flips.iter().enumerate() {
        let freq = f as f64 / trials as f64;
        assert!((freq - 0.5).abs() <= 0.05, "output bit {i}: {freq}");
    }
}

#[test]
fn su2_small_family_exact() {
    let fam = Family::su2_affine(4, 2).unwrap();
    assert_eq!(fam.members(), 64);
    let v = verify_family(&fam, FamilyKind::Su2, &ratio(1, 4)).unwrap();
    assert!(v.holds && v.uniform_outputs && v.is_su2);
    assert_eq!(v.measured_epsilon, ratio(1, 4));
    // condition (a): each (x, y) hit by exactly |H|/|T| = 16 members
    for x in 0..16 {
        for y in 0..4 {
            let c = (0..64).filter(|&h| fam.eval(h, x) == y).count();
            assert_eq!(c, 16);
        }
    }
    let asu = verify_family(&fam, FamilyKind::Asu2, &ratio(1, 4)).unwrap();
    assert!(asu.holds);
}

#[test]
fn su2_verified_for_small_widths() {
    for z in 1..=6 {
        for t in 1..=z.min(3) {
            let v = verify_family(&Family::su2_affine(z, t).unwrap(), FamilyKind::Su2, &ratio(1, 1 << t)).unwrap();
            assert!(v.holds, "z={z} t={t}");
        }
    }
}

#[test]
fn poly_au2_exhaustive_pairs() {
    // 2-block messages at z=4: length block plus one data block
    let spec = Au2FamilySpec::new(4, 3);
    let eps = spec.epsilon_prime();
    assert_eq!(eps, ratio(2, 16));
    let msgs: Vec<BitString> = (0..16).map(|v| bits(v, 4)).collect();
    let mut worst = 0;
    for (i, a) in msgs.iter().enumerate() {
        for b in &msgs[i + 1..] {
            let c = (0..16)
                .filter(|&s| poly_au2_eval(&spec, s, a).unwrap() == poly_au2_eval(&spec, s, b).unwrap())
                .count();
            worst = worst.max(c);
        }
    }
    assert!(ratio(worst as u64, 16) <= eps);
    for z in 2..=6u32 {
        for mb in [z as usize, 2 * z as usize] {
            if mb > 12 || mb >= 1 << z {
                continue;
            }
            let blocks = 1 + mb.div_ceil(z as usize);
            let eps = Au2FamilySpec::new(z, blocks).epsilon_prime();
            let v = verify_family(&Family::poly_au2(z, mb).unwrap(), FamilyKind::Au2, &eps).unwrap();
            assert!(v.holds, "z={z} message_bits={mb}");
        }
    }
}

#[test]
fn all_functions_and_composition() {
    let all = Family::all_functions(4, 2).unwrap();
    assert_eq!(all.members(), 16);
    let v = verify_family(&all, FamilyKind::Au2, &ratio(1, 2)).unwrap();
    assert!(v.holds);
    assert_eq!(v.measured_epsilon, ratio(1, 2));
    let h = Family::su2_affine(1, 1).unwrap();
    let r = verify_composition_theorem(&all, &h, &ratio(1, 2)).unwrap();
    assert_eq!(r.epsilon_g, ratio(3, 4));
    assert!(r.iff_holds && r.formula_exact);
}

#[test]
fn composition_formula_points() {
    assert_eq!(composition_epsilon(&ratio(1, 1), 8), ratio(1, 1));
    for t in [2usize, 4, 16, 1 << 10] {
        let want = ratio(2, t as u128) - ratio(1, (t * t) as u128);
        assert_eq!(composition_epsilon(&ratio(1, t as u128), t), want);
    }
}

#[test]
fn constant_family_not_su2() {
    let fam = Family::from_fn(4, 2, 3, |h, x| if h == 0 { 0 } else { (h + x) % 2 }).unwrap();
    let v = verify_family(&fam, FamilyKind::Su2, &ratio(1, 2)).unwrap();
    assert!(!v.holds);
    assert!(v.worst_pair.is_some());
}

#[test]
fn enumeration_guard() {
    assert!(Family::all_functions(16, 4).is_err());
}

#[test]
fn key_consumption_values() {
    assert_eq!(its_key_bits(256, 64), 576);
    assert_eq!(its_key_bits(64, 64), 192);
    let sizes: Vec<u64> = [12u32, 15, 18, 21, 24]
        .iter()
        .map(|&e| its_minimal_key(&BigUint::from(10u8).pow(e), 64).1)
        .collect();
    assert_eq!(sizes, [260, 280, 298, 318, 338]);
    let two = AuthScheme::two_step(32, 16);
    assert_eq!(key_consumption(&two, 1 << 40).unwrap().bits_per_tag, 48);
    let its = AuthScheme::new(AuthVariant::ItsComposed(Au2FamilySpec::new(16, 4096)), 16, 16);
    assert!(key_consumption(&its, 1 << 40).is_err());
}

#[test]
fn ball_bound_reference() {
    assert_eq!(ball_size(16, 2), BigUint::from(137u32));
    let b = collision_ball_success_bound(16, 2, 8).unwrap();
    assert!((b.full_ball - 0.414_422_213_532_880_33).abs() < 1e-12);
    let b = collision_ball_success_bound(64, 3, 12).unwrap();
    assert!((b.full_ball - 0.999_976_998_051_785_1).abs() < 1e-12);
    assert!(collision_ball_success_bound(4096, 32, 256).unwrap().full_ball >= 0.999);
}

#[test]
fn ball_bound_monte_carlo() {
    // ell=16, w=2, z=8: frequency of a digest hit inside the ball around a fresh message
    let spec = PublicHashSpec::new(8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let trials = 4000;
    let mut hits = 0;
    for _ in 0..trials {
        let target = rng.gen_range(0..256u64);
        let base = BitString::random(16, &mut rng).concat(&BitString::random(48, &mut rng));
        let mut found = spec.digest_value(&base) == target;
        'outer: for i in 0..16 {
            for j in i..16 {
                let mut m = base.clone();
                m.flip(i);
                if j != i {
                    m.flip(j);
                }
                if spec.digest_value(&m) == target {
                    found = true;
                    break 'outer;
                }
            }
        }
        hits += found as u32;
    }
    let freq = hits as f64 / trials as f64;
    let p = collision_ball_success_bound(16, 2, 8).unwrap().full_ball;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((freq - p).abs() <= 4.0 * sigma, "freq {freq} vs {p}");
}

#[test]
fn fixed_secrets_separate_digests() {
    let scheme = AuthScheme::new(AuthVariant::FixedSecret { secret_bits: 64 }, 12, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = BitString::random(200, &mut rng);
    let mut same = 0;
    for _ in 0..1000 {
        let s1 = BitString::random(64, &mut rng);
        let s2 = BitString::random(64, &mut rng);
        same += (scheme.digest(&m, Some(&s1)).unwrap() == scheme.digest(&m, Some(&s2)).unwrap()) as u32;
    }
    // expected 1000 / 4096
    assert!(same <= 5, "{same} equal digests");
}

#[test]
fn secret_rules() {
    let key = Su2Key { a: 3, b: 1 };
    let m = BitString::random(40, &mut ChaCha8Rng::seed_from_u64(1));
    let fixed = AuthScheme::new(AuthVariant::FixedSecret { secret_bits: 64 }, 12, 16);
    assert!(two_step_tag(&fixed, key, &m, None).is_err());
    let plain = AuthScheme::two_step(12, 16);
    assert!(two_step_tag(&plain, key, &m, Some(&BitString::zeros(8))).is_err());
    assert_eq!(two_step_tag(&plain, key, &m, None).unwrap(), two_step_tag(&plain, key, &m, None).unwrap());
}

fn bitstring(max: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), 0..max).prop_map(BitString::from_bools)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collision_propagates_through_outer_hash(a in any::<u64>(), b in any::<u64>(), m in bitstring(200)) {
        let scheme = AuthScheme::two_step(10, 16);
        let p = scheme.su2_params();
        let key = Su2Key { a: a & ((1 << p.field_bits()) - 1), b: b & 0xffff };
        let target = scheme.public_hash.digest_value(&m);
        // brute-force a second message with the same 10-bit digest
        let mut rng = ChaCha8Rng::seed_from_u64(a ^ b);
        let other = loop {
            let c = BitString::random(64, &mut rng);
            if scheme.public_hash.digest_value(&c) == target { break c; }
        };
        prop_assert_eq!(two_step_tag(&scheme, key, &m, None).unwrap(), two_step_tag(&scheme, key, &other, None).unwrap());
    }

    #[test]
    fn ball_bound_monotone(ell in 1u64..200, w in 0u64..6, z in 4u32..40) {
        let w = w.min(ell);
        let b = collision_ball_success_bound(ell, w, z).unwrap();
        if w < ell {
            prop_assert!(collision_ball_success_bound(ell, w + 1, z).unwrap().full_ball >= b.full_ball);
        }
        prop_assert!(collision_ball_success_bound(ell + 1, w, z).unwrap().full_ball >= b.full_ball);
        prop_assert!(collision_ball_success_bound(ell, w, z + 1).unwrap().full_ball <= b.full_ball);
    }

    #[test]
    fn padding_injective(a in bitstring(40), b in bitstring(40), z in 6u32..12) {
        prop_assume!(a != b);
        prop_assert_ne!(pad_blocks(z, &a).unwrap(), pad_blocks(z, &b).unwrap());
    }

    #[test]
    fn su2_zero_multiplier(b in any::<u16>(), d in any::<u16>()) {
        let p = Su2Params::new(16, 16);
        let t = su2_eval(p, Su2Key { a: 0, b: b as u64 }, &bits(d as u64, 16)).unwrap();
        prop_assert_eq!(t, bits(b as u64, 16));
    }

    #[test]
    fn field_laws(n in 1u32..=64, x in any::<u64>(), y in any::<u64>(), w in any::<u64>()) {
        let f = Gf2n::new(n);
        let m = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let (x, y, w) = (x & m, y & m, w & m);
        prop_assert_eq!(f.mul(x, y), f.mul(y, x));
        prop_assert_eq!(f.mul(f.mul(x, y), w), f.mul(x, f.mul(y, w)));
        prop_assert_eq!(f.mul(x, y ^ w), f.mul(x, y) ^ f.mul(x, w));
        if x != 0 {
            prop_assert_eq!(f.mul(x, f.inv(x)), 1);
        }
    }
}
