//! Family verifiers by name, with a text rendering of the verdicts.

use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::hashing::{verify_composition_theorem, verify_family, Au2FamilySpec, CompositionReport, Family, FamilyKind, FamilyVerdict};
use crate::HashError;

pub const VERIFY_SELECTORS: [&str; 6] = ["all-functions", "constant", "su2", "poly", "composed", "composed-collapsing"];

#[derive(Clone, Debug, PartialEq)]
pub enum VerifySelector {
    /// Every function domain -> range, checked against `kind` at `epsilon`.
    AllFunctions {
        domain: usize,
        range: usize,
        kind: FamilyKind,
        epsilon: BigRational,
    },
    /// One constant function per output, claimed SU2.
    Constant { domain: usize, range: usize },
    Su2 { z_bits: u32, t_bits: u32 },
    /// Polynomial AU2 over GF(2^z) on messages of `message_bits` bits.
    Poly { z_bits: u32, message_bits: usize },
    /// All functions M -> Z composed with the SU2 family Z -> T.
    Composed { m: usize, z_bits: u32, t_bits: u32 },
    /// As `Composed`, but inputs 0 and 1 always share an image, so F is not 1/|Z|-AU2.
    ComposedCollapsing { m: usize, z_bits: u32, t_bits: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VerifyReport {
    Family(FamilyVerdict),
    Composition(CompositionReport),
}

fn pow(base: usize, e: usize) -> Result<usize, HashError> {
    base.checked_pow(e as u32)
        .ok_or_else(|| HashError::Domain(format!("{base}^{e} overflows")))
}

/// All functions on `m` inputs where inputs 0 and 1 share their image.
pub fn collapsing_family(m: usize, range: usize) -> Result<Family, HashError> {
    if m < 2 {
        return Err(HashError::Domain("collapsing family needs at least two inputs".into()));
    }
    let members = pow(range, m - 1)?;
    Family::from_fn(m, range, members, move |h, x| (h / range.pow(x.saturating_sub(1) as u32)) % range)
}

fn small_bits(name: &str, b: u32) -> Result<(), HashError> {
    if !(1..=16).contains(&b) {
        return Err(HashError::Domain(format!("{name} must lie in 1..=16 for enumeration, got {b}")));
    }
    Ok(())
}

pub fn verify_cmd(selector: &VerifySelector) -> Result<VerifyReport, HashError> {
    Ok(match selector {
        VerifySelector::AllFunctions {
            domain,
            range,
            kind,
            epsilon,
        } => VerifyReport::Family(verify_family(&Family::all_functions(*domain, *range)?, *kind, epsilon)?),
        &VerifySelector::Constant { domain, range } => {
            let fam = Family::from_fn(domain, range, range, |h, _| h)?;
            VerifyReport::Family(verify_family(&fam, FamilyKind::Su2, &crate::ratio(1, range as u128))?)
        }
        &VerifySelector::Su2 { z_bits, t_bits } => {
            small_bits("z_bits", z_bits)?;
            small_bits("t_bits", t_bits)?;
            let fam = Family::su2_affine(z_bits, t_bits)?;
            VerifyReport::Family(verify_family(&fam, FamilyKind::Su2, &crate::ratio(1, 1u128 << t_bits))?)
        }
        &VerifySelector::Poly { z_bits, message_bits } => {
            small_bits("z_bits", z_bits)?;
            if !(1..=16).contains(&message_bits) {
                return Err(HashError::Domain(format!("message_bits must lie in 1..=16, got {message_bits}")));
            }
            let blocks = 1 + message_bits.div_ceil(z_bits as usize);
            let eps = Au2FamilySpec::new(z_bits, blocks).epsilon_prime();
            VerifyReport::Family(verify_family(&Family::poly_au2(z_bits, message_bits)?, FamilyKind::Au2, &eps)?)
        }
        &VerifySelector::Composed { m, z_bits, t_bits } | &VerifySelector::ComposedCollapsing { m, z_bits, t_bits } => {
            small_bits("z_bits", z_bits)?;
            small_bits("t_bits", t_bits)?;
            let z = 1usize << z_bits;
            let f = match selector {
                VerifySelector::Composed { .. } => Family::all_functions(m, z)?,
                _ => collapsing_family(m, z)?,
            };
            let h = Family::su2_affine(z_bits, t_bits)?;
            VerifyReport::Composition(verify_composition_theorem(&f, &h, &crate::ratio(1, z as u128))?)
        }
    })
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyReport::Family(v) => {
                writeln!(f, "claim {:?} at epsilon {}: {}", v.kind, v.bound_epsilon, if v.holds { "holds" } else { "fails" })?;
                writeln!(f, "  measured epsilon   {}", v.measured_epsilon)?;
                writeln!(f, "  collision epsilon  {}", v.collision_epsilon)?;
                writeln!(f, "  uniform outputs    {}", v.uniform_outputs)?;
                writeln!(f, "  au2 / su2 / asu2   {} / {} / {}", v.is_au2, v.is_su2, v.is_asu2)?;
                if let Some(w) = v.worst_pair {
                    writeln!(f, "  worst pair         m1={} m2={} t1={} t2={}", w.m1, w.m2, w.t1, w.t2)?;
                }
            }
            VerifyReport::Composition(c) => {
                writeln!(f, "H o F is eps-ASU2 iff F is eps'-AU2: {}", if c.iff_holds { "witnessed" } else { "violated" })?;
                writeln!(f, "  claimed eps'       {}", c.claimed_epsilon_prime)?;
                writeln!(f, "  claimed eps        {}", c.claimed_epsilon)?;
                writeln!(f, "  measured eps'(F)   {}", c.epsilon_prime_f)?;
                writeln!(f, "  measured eps(G)    {}", c.epsilon_g)?;
                writeln!(f, "  formula at eps'(F) {}", c.formula_epsilon)?;
                writeln!(f, "  exact match        {}", c.formula_exact)?;
                writeln!(f, "  F au2 / G asu2     {} / {}", c.f_is_au2, c.g_is_asu2)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composed_small() {
        let VerifyReport::Composition(c) = verify_cmd(&VerifySelector::Composed { m: 4, z_bits: 1, t_bits: 1 }).unwrap() else {
            panic!()
        };
        assert!(c.iff_holds && c.f_is_au2 && c.g_is_asu2);
        assert_eq!(c.epsilon_g, crate::ratio(3, 4));
    }

    #[test]
    fn collapsing_breaks_both_sides() {
        let VerifyReport::Composition(c) =
            verify_cmd(&VerifySelector::ComposedCollapsing { m: 4, z_bits: 1, t_bits: 1 }).unwrap()
        else {
            panic!()
        };
        assert!(c.iff_holds && !c.f_is_au2 && !c.g_is_asu2);
        assert_eq!(c.epsilon_prime_f, crate::ratio(1, 1));
    }

    #[test]
    fn constant_is_not_su2() {
        let VerifyReport::Family(v) = verify_cmd(&VerifySelector::Constant { domain: 4, range: 2 }).unwrap() else {
            panic!()
        };
        assert!(!v.holds);
        assert!(v.worst_pair.is_some());
    }
}
