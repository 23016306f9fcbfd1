//! Browser bindings: a tag forgery by digest collision, a crafted sifting
//! mask, and the brute-force composition check. Each entry point returns a
//! JSON string; failures come back as `{"error": ...}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use twostep_lab::adversary::{craft_bases_mask, find_colliding_message, swap_atoms, MutationSpace};
use twostep_lab::harness::{verify_cmd, VerifyReport, VerifySelector};
use twostep_lab::hashing::bounds::subsequence_shortfall_bound;
use twostep_lab::hashing::{collision_ball_success_bound, AuthScheme};
use twostep_lab::protocol::{apply_mask, WireMessage};
use twostep_lab::quantum::RawKey;
use twostep_lab::BitString;
use wasm_bindgen::prelude::*;

const TAG_BITS: u32 = 16;
const MAX_BALL: f64 = 2e7;

fn bits(b: &BitString) -> String {
    b.iter().map(|x| if x { '1' } else { '0' }).collect()
}

fn to_json(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Eve holds a tagged frame and wants to send another. She flips up to
/// `w_max` bits of her frame until its public digest matches, then reuses the tag.
pub fn forge(z_bits: u32, ell: usize, w_max: usize, seed: u64) -> Result<Value, String> {
    if !(1..=32).contains(&z_bits) || !(1..=256).contains(&ell) || w_max > 4 {
        return Err("need 1 <= z_bits <= 32, 1 <= ell <= 256, w_max <= 4".into());
    }
    let ball = collision_ball_success_bound(ell as u64, w_max as u64, z_bits).map_err(|e| e.to_string())?;
    if ball.ball_size.parse::<f64>().unwrap_or(f64::INFINITY) > MAX_BALL {
        return Err(format!("ball of {} candidates is too large for the page", ball.ball_size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scheme = AuthScheme::two_step(z_bits, TAG_BITS);
    let key = scheme.su2_params().random_key(&mut rng);
    let orig = WireMessage::new(1, 0x02, vec![BitString::random(ell, &mut rng)]);
    let want = WireMessage::new(1, 0x02, vec![BitString::random(ell, &mut rng)]);
    let digest = |m: &WireMessage| scheme.public_hash.digest_value(&m.frame_bits());
    let tag = |m: &WireMessage| scheme.tag(key, &m.frame_bits(), None).map(|t| t.bits().to_u64());
    let space = MutationSpace::single_bits(want.clone(), 0, 0..ell, w_max);
    let res = find_colliding_message(&space, digest(&orig), &scheme.public_hash);
    let flipped: Vec<usize> = (0..ell).filter(|&i| res.message.fields[0].get(i) != want.fields[0].get(i)).collect();
    let t_orig = tag(&orig).map_err(|e| e.to_string())?;
    let t_sent = tag(&res.message).map_err(|e| e.to_string())?;
    Ok(json!({
        "z_bits": z_bits,
        "original": bits(&orig.fields[0]),
        "wanted": bits(&want.fields[0]),
        "sent": bits(&res.message.fields[0]),
        "flipped": flipped,
        "found": res.found,
        "candidates_tested": res.candidates_tested,
        "original_digest": format!("{:#x}", digest(&orig)),
        "sent_digest": format!("{:#x}", digest(&res.message)),
        "original_tag": format!("{t_orig:#06x}"),
        "sent_tag": format!("{t_sent:#06x}"),
        "tag_accepted": t_orig == t_sent,
        "ball_size": ball.ball_size,
        "full_ball_bound": ball.full_ball,
    }))
}

/// Eve picks the sifted key in advance: a random target of n/2 - k bits,
/// embedded in Alice's raw bits by choosing which slots the mask keeps.
pub fn craft(n: usize, k_budget: usize, seed: u64) -> Result<Value, String> {
    if !(16..=4096).contains(&n) || 2 * k_budget >= n {
        return Err("need 16 <= n <= 4096 and k < n/2".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw_bits = BitString::random(n, &mut rng);
    let raw: RawKey = raw_bits.iter().map(Some).collect();
    let target = BitString::random(n / 2 - k_budget, &mut rng);
    let base = json!({
        "raw": bits(&raw_bits),
        "target": bits(&target),
        "bound": subsequence_shortfall_bound(n as u64, k_budget as u64),
    });
    let mut out = base.as_object().cloned().unwrap_or_default();
    match craft_bases_mask(&raw, &target, k_budget) {
        Ok(c) => {
            let sifted = apply_mask(&raw, &c.mask).map_err(|e| e.to_string())?;
            out.insert("success".into(), json!(true));
            out.insert("mask".into(), json!(bits(&c.mask)));
            out.insert("sifted".into(), json!(bits(&sifted)));
            out.insert("mismatches".into(), json!(c.mismatches));
            out.insert("swap_atoms".into(), json!(swap_atoms(&raw, &c.mask).len()));
        }
        Err(e) => {
            out.insert("success".into(), json!(false));
            out.insert("reason".into(), json!(e.to_string()));
        }
    }
    Ok(Value::Object(out))
}

/// All functions F: M -> Z composed with the affine SU2 family Z -> T,
/// or a collapsed F whose first two inputs always collide.
pub fn composition(m: usize, z_bits: u32, t_bits: u32, collapsing: bool) -> Result<Value, String> {
    let sel = if collapsing {
        VerifySelector::ComposedCollapsing { m, z_bits, t_bits }
    } else {
        VerifySelector::Composed { m, z_bits, t_bits }
    };
    match verify_cmd(&sel).map_err(|e| e.to_string())? {
        VerifyReport::Composition(c) => {
            let mut v = serde_json::to_value(&c).map_err(|e| e.to_string())?;
            v["m"] = json!(m);
            v["z"] = json!(1u64 << z_bits);
            v["t"] = json!(1u64 << t_bits);
            Ok(v)
        }
        VerifyReport::Family(_) => Err("unexpected report".into()),
    }
}

#[wasm_bindgen]
pub fn forge_json(z_bits: u32, ell: usize, w_max: usize, seed: u64) -> String {
    to_json(forge(z_bits, ell, w_max, seed))
}

#[wasm_bindgen]
pub fn craft_json(n: usize, k_budget: usize, seed: u64) -> String {
    to_json(craft(n, k_budget, seed))
}

#[wasm_bindgen]
pub fn composition_json(m: usize, z_bits: u32, t_bits: u32, collapsing: bool) -> String {
    to_json(composition(m, z_bits, t_bits, collapsing))
}
