//! Eve's toolkit and complete attack strategies.

pub mod forge;
pub mod strategy;
pub mod subseq;

pub use forge::{digest_in_context, find_colliding_message, ForgeResult, MutationSpace};
pub use strategy::{execute_attack, Attack, AttackStrategy, Row};
pub use subseq::{craft_bases_mask, find_subsequence, subsequence_probability, swap_atoms, CraftedMask, SubseqError};
