//! Hash families, MAC schemes, exhaustive verifiers and bound calculators.

pub mod bounds;
pub mod family;
pub mod mixer;
pub mod poly;
pub mod scheme;
pub mod su2;

pub use bounds::{collision_ball_success_bound, key_consumption, BallBound, KeyConsumption};
pub use family::{verify_composition_theorem, verify_family, CompositionReport, Family, FamilyKind, FamilyVerdict};
pub use mixer::{public_hash_f, PublicHashSpec};
pub use poly::{poly_au2_eval, Au2FamilySpec};
pub use scheme::{default_salt, two_step_tag, AuthScheme, AuthVariant, Tag, AUTH_NAMES, ITS_MAX_BLOCKS};
pub use su2::{su2_eval, Su2Key, Su2Params};
