use serde_json::Value;
use twostep_wasm::{composition, composition_json, craft, craft_json, forge, forge_json};

#[test]
fn small_digest_forges() {
    let v = forge(12, 64, 3, 1).unwrap();
    assert_eq!(v["found"], true);
    assert_eq!(v["tag_accepted"], true);
    assert_eq!(v["original_digest"], v["sent_digest"]);
    assert_eq!(v["ball_size"], "43745");
    let flips = v["flipped"].as_array().unwrap().len();
    assert!((1..=3).contains(&flips));
}

#[test]
fn wide_digest_resists_small_ball() {
    let v = forge(32, 64, 1, 2).unwrap();
    assert_eq!(v["found"], false);
    assert_eq!(v["candidates_tested"], 65);
    assert_eq!(v["wanted"], v["sent"]);
}

#[test]
fn crafted_mask_sifts_to_target() {
    let v = craft(256, 16, 3).unwrap();
    assert_eq!(v["success"], true);
    let (target, sifted) = (v["target"].as_str().unwrap(), v["sifted"].as_str().unwrap());
    assert_eq!(target.len(), 112);
    let diff = target.chars().zip(sifted.chars()).filter(|(a, b)| a != b).count();
    assert!(diff as u64 <= v["mismatches"].as_u64().unwrap());
    assert_eq!(v["mask"].as_str().unwrap().matches('1').count(), 112);
}

#[test]
fn composition_both_directions() {
    let good = composition(4, 1, 1, false).unwrap();
    assert_eq!(good["f_is_au2"], true);
    assert_eq!(good["g_is_asu2"], true);
    assert_eq!(good["epsilon_g"], "3/4");
    let bad = composition(4, 1, 1, true).unwrap();
    assert_eq!(bad["f_is_au2"], false);
    assert_eq!(bad["g_is_asu2"], false);
    assert_eq!(bad["iff_holds"], true);
}

#[test]
fn bad_input_is_an_error_object() {
    for s in [forge_json(40, 64, 3, 1), craft_json(8, 1, 1), composition_json(4, 20, 1, false)] {
        let v: Value = serde_json::from_str(&s).unwrap();
        assert!(v["error"].is_string(), "{s}");
    }
}
