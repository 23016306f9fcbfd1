//! Bound calculators, each optionally paired with a Monte Carlo estimate.

use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{binomial_sigma, wilson_interval, Interval, Z95};
use super::sweep::derive_seed;
use crate::adversary::{craft_bases_mask, find_colliding_message, find_subsequence, subsequence_probability, MutationSpace};
use crate::bits::BitString;
use crate::hashing::bounds::{its_key_bits, its_message_limit, its_minimal_key, subsequence_shortfall_bound};
use crate::hashing::family::composition_epsilon;
use crate::hashing::{collision_ball_success_bound, AuthScheme};
use crate::protocol::WireMessage;
use crate::quantum::RawKey;

pub const BOUND_KINDS: [&str; 5] = ["collision-ball", "mask-crafting", "subseq-exact", "key-consumption", "composition"];

/// Message sizes 10^12 .. 10^24 bits.
pub const SI_MESSAGES: [(&str, u32); 5] = [
    ("terabit", 12),
    ("petabit", 15),
    ("exabit", 18),
    ("zettabit", 21),
    ("yottabit", 24),
];

#[derive(Clone, Debug, PartialEq)]
pub enum BoundQuery {
    /// Second preimage within distance `w` of an `ell`-bit field under a z-bit digest.
    CollisionBall { ell: u64, w: u64, z_bits: u32 },
    /// At most `k` unmatched bits when embedding n/2 - k target bits in n raw bits.
    MaskCrafting { n: u64, k: u64 },
    SubseqExact { m: usize, n: usize },
    /// Key per tag of the composed scheme; with `message_bits`, the smallest z that fits.
    KeyConsumption {
        z_bits: u32,
        t_bits: u32,
        message_bits: Option<BigUint>,
    },
    /// eps'(1 - 1/|T|) + 1/|T|.
    Composition { eps_prime: BigRational, range: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub trials: u64,
    pub successes: u64,
    pub frequency: f64,
    pub wilson_interval: Interval,
    /// Binomial standard deviation at the bound value.
    pub sigma_at_bound: f64,
}

impl MonteCarlo {
    fn new(successes: u64, trials: u64, bound: f64) -> Self {
        MonteCarlo {
            trials,
            successes,
            frequency: successes as f64 / trials as f64,
            wilson_interval: wilson_interval(successes, trials, Z95).expect("trials > 0"),
            sigma_at_bound: binomial_sigma(bound, trials),
        }
    }

    /// Frequency no lower than the bound minus three sigma.
    pub fn meets(&self, bound: f64) -> bool {
        self.frequency >= bound - 3.0 * self.sigma_at_bound
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: String,
    pub params: Vec<(String, String)>,
    pub values: Vec<(String, String)>,
    /// The headline bound as a float, when it is a probability.
    pub bound: Option<f64>,
    pub monte_carlo: Option<MonteCarlo>,
}

impl BoundReport {
    pub fn value(&self, name: &str) -> Option<&str> {
        self.values.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(f, "{} ({})", self.kind, p.join(", "))?;
        for (k, v) in &self.values {
            writeln!(f, "  {k:<22} {v}")?;
        }
        if let Some(mc) = &self.monte_carlo {
            writeln!(
                f,
                "  {:<22} {}/{} = {:.6}  wilson95 [{:.6}, {:.6}]",
                "monte carlo", mc.successes, mc.trials, mc.frequency, mc.wilson_interval.lo, mc.wilson_interval.hi
            )?;
            if let Some(b) = self.bound {
                writeln!(f, "  {:<22} {:.6} (3 sigma = {:.6})", "bound", b, 3.0 * mc.sigma_at_bound)?;
            }
        }
        Ok(())
    }
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn domain(msg: String) -> crate::HashError {
    crate::HashError::Domain(msg)
}

/// One forge attempt: random outer key and frames, search the ball around
/// Eve's frame for a digest collision, then compare tags under the key.
pub fn collision_ball_trial(ell: usize, w: usize, z_bits: u32, rng: &mut ChaCha8Rng) -> bool {
    let scheme = AuthScheme::two_step(z_bits, 16);
    let key = scheme.su2_params().random_key(rng);
    let orig = WireMessage::new(1, 0x02, vec![BitString::random(ell, rng)]);
    let want = WireMessage::new(1, 0x02, vec![BitString::random(ell, rng)]);
    let target = scheme.public_hash.digest_value(&orig.frame_bits());
    let space = MutationSpace::single_bits(want, 0, 0..ell, w);
    let r = find_colliding_message(&space, target, &scheme.public_hash);
    let tag = |m: &WireMessage| scheme.tag(key, &m.frame_bits(), None).expect("two-step takes any length");
    r.found && tag(&r.message) == tag(&orig)
}

/// One crafting attempt against uniform raw bits and a uniform target of n/2 - k bits.
pub fn mask_crafting_trial(n: usize, k: usize, rng: &mut ChaCha8Rng) -> bool {
    let raw: RawKey = (0..n).map(|_| Some(rng.gen())).collect();
    let target = BitString::random(n / 2 - k, rng);
    craft_bases_mask(&raw, &target, k).is_ok()
}

fn monte_carlo(trials: u64, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> bool + Sync) -> u64 {
    (0..trials)
        .into_par_iter()
        .filter(|&t| f(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, t))))
        .count() as u64
}

fn ratio_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Evaluates `query`; `mc` = (trials, seed) adds an estimate where one exists.
pub fn bound_calc(query: &BoundQuery, mc: Option<(u64, u64)>) -> Result<BoundReport, crate::HashError> {
    let mc = mc.filter(|&(t, _)| t > 0);
    Ok(match query {
        &BoundQuery::CollisionBall { ell, w, z_bits } => {
            if z_bits == 0 {
                return Err(domain("z_bits must be positive".into()));
            }
            let b = collision_ball_success_bound(ell, w, z_bits)?;
            let estimate = match mc {
                Some((trials, seed)) => {
                    if z_bits > 32 || b.ball_size.len() > 8 {
                        return Err(domain("Monte Carlo needs z_bits <= 32 and a ball under 10^8".into()));
                    }
                    let hits = monte_carlo(trials, seed, |r| collision_ball_trial(ell as usize, w as usize, z_bits, r));
                    Some(MonteCarlo::new(hits, trials, b.full_ball))
                }
                None => None,
            };
            BoundReport {
                kind: "collision-ball".into(),
                params: vec![kv("ell", ell), kv("w", w), kv("z_bits", z_bits)],
                values: vec![
                    kv("ball_size", &b.ball_size),
                    kv("shell_bound", b.loose),
                    kv("full_ball_bound", b.full_ball),
                ],
                bound: Some(b.full_ball),
                monte_carlo: estimate,
            }
        }
        &BoundQuery::MaskCrafting { n, k } => {
            if n == 0 || 2 * k > n {
                return Err(domain(format!("need n > 0 and k <= n/2, got n={n}, k={k}")));
            }
            let bound = subsequence_shortfall_bound(n, k);
            let estimate = mc.map(|(trials, seed)| {
                let hits = monte_carlo(trials, seed, |r| mask_crafting_trial(n as usize, k as usize, r));
                MonteCarlo::new(hits, trials, bound)
            });
            BoundReport {
                kind: "mask-crafting".into(),
                params: vec![kv("n", n), kv("k", k)],
                values: vec![kv("target_bits", n / 2 - k), kv("bound", bound)],
                bound: Some(bound),
                monte_carlo: estimate,
            }
        }
        &BoundQuery::SubseqExact { m, n } => {
            let p = subsequence_probability(m, n).map_err(|e| domain(e.to_string()))?;
            let pf = ratio_f64(&p);
            let estimate = mc.map(|(trials, seed)| {
                let s = BitString::random(m, &mut ChaCha8Rng::seed_from_u64(seed));
                let hits = monte_carlo(trials, seed, |r| {
                    find_subsequence(&s, &BitString::random(n, r)).expect("non-empty").is_some()
                });
                MonteCarlo::new(hits, trials, pf)
            });
            BoundReport {
                kind: "subseq-exact".into(),
                params: vec![kv("m", m), kv("n", n)],
                values: vec![kv("probability", &p), kv("decimal", pf)],
                bound: Some(pf),
                monte_carlo: estimate,
            }
        }
        BoundQuery::KeyConsumption {
            z_bits,
            t_bits,
            message_bits,
        } => {
            let (z, t) = (*z_bits, *t_bits);
            if z == 0 || t == 0 {
                return Err(domain("z_bits and t_bits must be positive".into()));
            }
            let mut params = vec![kv("z_bits", z), kv("t_bits", t)];
            let mut values = vec![
                kv("its_key_bits", its_key_bits(z, t)),
                kv("its_message_limit", its_message_limit(z, t)),
                kv("two_step_key_bits", z.max(t) + t),
            ];
            if let Some(m) = message_bits {
                params.push(kv("message_bits", m));
                let (zmin, bits) = its_minimal_key(m, t);
                values.push(kv("minimal_z_bits", zmin));
                values.push(kv("minimal_key_bits", bits));
            }
            BoundReport {
                kind: "key-consumption".into(),
                params,
                values,
                bound: None,
                monte_carlo: None,
            }
        }
        BoundQuery::Composition { eps_prime, range } => {
            if *range == 0 || eps_prime < &BigRational::zero() || eps_prime > &BigRational::one() {
                return Err(domain("need range > 0 and 0 <= eps' <= 1".into()));
            }
            let e = composition_epsilon(eps_prime, *range);
            BoundReport {
                kind: "composition".into(),
                params: vec![kv("eps_prime", eps_prime), kv("range", range)],
                values: vec![kv("epsilon", &e), kv("decimal", ratio_f64(&e))],
                bound: None,
                monte_carlo: None,
            }
        }
    })
}

/// Minimal composed-scheme key for each SI message size, as (name, z, key bits).
pub fn key_consumption_table(t_bits: u32) -> Vec<(&'static str, u32, u64)> {
    SI_MESSAGES
        .iter()
        .map(|&(name, e)| {
            let (z, bits) = its_minimal_key(&BigUint::from(10u8).pow(e), t_bits);
            (name, z, bits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_values() {
        let r = bound_calc(&BoundQuery::CollisionBall { ell: 4096, w: 32, z_bits: 256 }, None).unwrap();
        assert!(r.bound.unwrap() >= 0.999);
        assert!(bound_calc(&BoundQuery::CollisionBall { ell: 4096, w: 32, z_bits: 256 }, Some((10, 1))).is_err());
        let r = bound_calc(&BoundQuery::MaskCrafting { n: 1024, k: 64 }, None).unwrap();
        assert!(r.bound.unwrap() >= 1.0 - (-8f64).exp() - 1e-12);
        let r = bound_calc(
            &BoundQuery::KeyConsumption {
                z_bits: 256,
                t_bits: 64,
                message_bits: None,
            },
            None,
        )
        .unwrap();
        assert_eq!(r.value("its_key_bits"), Some("576"));
    }

    #[test]
    fn composition_exact() {
        let r = bound_calc(
            &BoundQuery::Composition {
                eps_prime: crate::ratio(1, 2),
                range: 2,
            },
            None,
        )
        .unwrap();
        assert_eq!(r.value("epsilon"), Some("3/4"));
    }
}
