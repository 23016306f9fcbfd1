//! Experiment configuration, seeded sweeps, statistics, bound calculators
//! and family verifiers.

pub mod calc;
pub mod config;
pub mod stats;
pub mod sweep;
pub mod verify;

pub use calc::{bound_calc, key_consumption_table, BoundQuery, BoundReport, MonteCarlo, BOUND_KINDS};
pub use config::{ConfigError, ExperimentConfig, CONFIG_KEYS};
pub use stats::{wilson_interval, Interval};
pub use sweep::{
    attack_succeeded, derive_seed, jsonl_bytes, run_sweep, run_trial, summary_csv, write_jsonl, Summary, SweepResult,
    TrialRecord, SCHEMA_VERSION,
};
pub use verify::{verify_cmd, VerifyReport, VerifySelector, VERIFY_SELECTORS};
