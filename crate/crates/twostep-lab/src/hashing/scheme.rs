//! MAC schemes for every rung of the countermeasure ladder.

use serde::{Deserialize, Serialize};

use super::mixer::PublicHashSpec;
use super::poly::{poly_au2_value, Au2FamilySpec};
use super::su2::{Su2Key, Su2Params};
use crate::bits::BitString;
use crate::HashError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuthVariant {
    /// t = h_K(f(m)).
    TwoStep,
    /// t = h_K(f(salt || m)) with a public per-link constant.
    Salted(BitString),
    /// Public nonce chosen by the sender, sent next to the tag.
    NonceAlice,
    /// Public nonce chosen by the receiver as a challenge.
    NonceBob,
    /// t = h_K(f(S || m)) with one secret S per session.
    FixedSecret { secret_bits: usize },
    /// t = h_K(f(S || m)) with a fresh secret S per tag.
    FreshSecret { secret_bits: usize },
    /// t = h_K(f_S(m)) with f_S drawn from a polynomial AU2 family.
    ItsComposed(Au2FamilySpec),
}

impl AuthVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AuthVariant::TwoStep => "twostep",
            AuthVariant::Salted(_) => "salt",
            AuthVariant::NonceAlice => "nonce-a",
            AuthVariant::NonceBob => "nonce-b",
            AuthVariant::FixedSecret { .. } => "fixed-secret",
            AuthVariant::FreshSecret { .. } => "fresh-secret",
            AuthVariant::ItsComposed(_) => "its",
        }
    }

    /// True when the first-stage digest is computable without secret key.
    pub fn digest_is_public(&self) -> bool {
        matches!(
            self,
            AuthVariant::TwoStep | AuthVariant::Salted(_) | AuthVariant::NonceAlice | AuthVariant::NonceBob
        )
    }

    pub fn uses_nonce(&self) -> bool {
        matches!(self, AuthVariant::NonceAlice | AuthVariant::NonceBob)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthScheme {
    pub variant: AuthVariant,
    pub public_hash: PublicHashSpec,
    pub t_bits: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag(pub BitString);

impl Tag {
    pub fn bits(&self) -> &BitString {
        &self.0
    }
}

pub const ITS_MAX_BLOCKS: usize = 4096;

pub const AUTH_NAMES: [&str; 7] = ["twostep", "salt", "nonce-a", "nonce-b", "fixed-secret", "fresh-secret", "its"];

/// Published salt for the salted rung.
pub fn default_salt() -> BitString {
    BitString::from_u64(0x5a17_c0de_2b84_91e3, 64)
}

impl AuthScheme {
    pub fn new(variant: AuthVariant, z_bits: u32, t_bits: u32) -> Self {
        Self {
            variant,
            public_hash: PublicHashSpec::new(z_bits),
            t_bits,
        }
    }

    pub fn two_step(z_bits: u32, t_bits: u32) -> Self {
        Self::new(AuthVariant::TwoStep, z_bits, t_bits)
    }

    /// Scheme by its rung name. Secrets are 64 bits; the ITS family works in
    /// GF(2^z) with room for `ITS_MAX_BLOCKS` blocks.
    pub fn from_name(name: &str, z_bits: u32, t_bits: u32) -> Option<Self> {
        let variant = match name.to_ascii_lowercase().as_str() {
            "twostep" => AuthVariant::TwoStep,
            "salt" => AuthVariant::Salted(default_salt()),
            "nonce-a" => AuthVariant::NonceAlice,
            "nonce-b" => AuthVariant::NonceBob,
            "fixed-secret" => AuthVariant::FixedSecret { secret_bits: 64 },
            "fresh-secret" => AuthVariant::FreshSecret { secret_bits: 64 },
            "its" => AuthVariant::ItsComposed(Au2FamilySpec::new(z_bits, ITS_MAX_BLOCKS)),
            _ => return None,
        };
        Some(Self::new(variant, z_bits, t_bits))
    }

    /// Longest message the scheme can tag, if bounded.
    pub fn max_message_bits(&self) -> Option<u128> {
        match &self.variant {
            AuthVariant::ItsComposed(f) => Some(f.max_message_bits()),
            _ => None,
        }
    }

    /// Width of the first-stage digest fed to the outer hash.
    pub fn digest_bits(&self) -> u32 {
        match &self.variant {
            AuthVariant::ItsComposed(f) => f.z_bits,
            _ => self.public_hash.z_bits,
        }
    }

    pub fn su2_params(&self) -> Su2Params {
        Su2Params::new(self.digest_bits(), self.t_bits)
    }

    /// Secret bits drawn per tag besides the outer key.
    pub fn secret_bits_per_tag(&self) -> usize {
        match &self.variant {
            AuthVariant::FreshSecret { secret_bits } => *secret_bits,
            AuthVariant::ItsComposed(f) => f.z_bits as usize,
            _ => 0,
        }
    }

    /// Secret bits drawn once per session.
    pub fn secret_bits_per_session(&self) -> usize {
        match &self.variant {
            AuthVariant::FixedSecret { secret_bits } => *secret_bits,
            _ => 0,
        }
    }

    pub fn key_bits_per_tag(&self) -> usize {
        self.su2_params().key_bits() + self.secret_bits_per_tag()
    }

    /// First-stage digest. `prefix` is the nonce for the nonce rungs and the
    /// secret S for the secret rungs.
    pub fn digest(&self, message: &BitString, prefix: Option<&BitString>) -> Result<u64, HashError> {
        match &self.variant {
            AuthVariant::TwoStep => {
                forbid(prefix)?;
                Ok(self.public_hash.digest_value(message))
            }
            AuthVariant::Salted(salt) => {
                forbid(prefix)?;
                Ok(self.public_hash.digest_value(&salt.concat(message)))
            }
            AuthVariant::NonceAlice
            | AuthVariant::NonceBob
            | AuthVariant::FixedSecret { .. }
            | AuthVariant::FreshSecret { .. } => {
                let p = prefix.ok_or(HashError::MissingSecret)?;
                Ok(self.public_hash.digest_value(&p.concat(message)))
            }
            AuthVariant::ItsComposed(family) => {
                let p = prefix.ok_or(HashError::MissingSecret)?;
                if p.len() != family.z_bits as usize {
                    return Err(HashError::DigestLength {
                        expected: family.z_bits as usize,
                        got: p.len(),
                    });
                }
                poly_au2_value(family, p.to_u64(), message)
            }
        }
    }

    pub fn tag(&self, key: Su2Key, message: &BitString, prefix: Option<&BitString>) -> Result<Tag, HashError> {
        let d = self.digest(message, prefix)?;
        let v = self.su2_params().eval_value(key, d);
        Ok(Tag(BitString::from_u64(v, self.t_bits as usize)))
    }
}

fn forbid(prefix: Option<&BitString>) -> Result<(), HashError> {
    match prefix {
        Some(_) => Err(HashError::ForbiddenSecret),
        None => Ok(()),
    }
}

/// Tag for `message` under `scheme`; see [`AuthScheme::digest`] for `per_message_secret`.
pub fn two_step_tag(
    scheme: &AuthScheme,
    key: Su2Key,
    message: &BitString,
    per_message_secret: Option<&BitString>,
) -> Result<Tag, HashError> {
    scheme.tag(key, message, per_message_secret)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secret_rules() {
        let m = BitString::parse("0110").unwrap();
        let k = Su2Key { a: 3, b: 1 };
        let s = BitString::parse("1111").unwrap();
        let two = AuthScheme::two_step(8, 4);
        assert!(two.tag(k, &m, None).is_ok());
        assert_eq!(two.tag(k, &m, Some(&s)), Err(HashError::ForbiddenSecret));
        let fresh = AuthScheme::new(AuthVariant::FreshSecret { secret_bits: 4 }, 8, 4);
        assert_eq!(fresh.tag(k, &m, None), Err(HashError::MissingSecret));
        assert!(fresh.tag(k, &m, Some(&s)).is_ok());
    }

    #[test]
    fn key_accounting() {
        let its = AuthScheme::new(AuthVariant::ItsComposed(Au2FamilySpec::new(32, 1024)), 12, 16);
        assert_eq!(its.key_bits_per_tag(), 32 + 16 + 32);
        assert_eq!(AuthScheme::two_step(12, 16).key_bits_per_tag(), 16 + 16);
        assert_eq!(AuthScheme::two_step(16, 8).key_bits_per_tag(), 24);
    }
}
