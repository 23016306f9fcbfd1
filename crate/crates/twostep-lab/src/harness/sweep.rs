//! Seeded Monte Carlo sweeps and their JSON-lines reports.

use std::io::{self, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ExperimentConfig};
use super::stats::{wilson_interval, Interval, Z95};
use crate::adversary::{execute_attack, AttackStrategy};
use crate::protocol::{KeyRelation, SessionOutcome};

pub const SCHEMA_VERSION: u32 = 1;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output for state `master + (trial + 1) * gamma`.
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    let mut z = master.wrapping_add(trial.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub relation: KeyRelation,
    pub case: Option<u8>,
    pub abort: Option<String>,
    pub tag_failure: bool,
    pub qber: Option<f64>,
    pub pre_ec_mismatches: usize,
    pub pre_ec_compared: usize,
    pub final_key_bits: usize,
    pub key_bits_consumed: usize,
    pub tags_sent: usize,
    /// Messages Eve altered or made up.
    pub forged: usize,
    /// Of those, the ones whose tag was checked.
    pub forged_checked: usize,
    pub forged_accepted: usize,
    pub candidates_tested: u64,
    pub max_weight: Option<usize>,
    pub guessed_bits: Option<usize>,
    pub success: bool,
    #[serde(skip)]
    pub wall_micros: u64,
}

/// Whether the outcome is what the strategy aims for. Delayed targets also
/// count separate worlds, the fallback when the collision search fails.
pub fn attack_succeeded(strategy: &AttackStrategy, out: &SessionOutcome) -> bool {
    let want = strategy.expected_relation();
    match strategy {
        AttackStrategy::StraightforwardMitm => out.relation != KeyRelation::Aborted,
        _ if want == KeyRelation::AllEqual && out.variant.delayed_auth() => {
            matches!(out.relation, KeyRelation::AllEqual | KeyRelation::SeparateWorlds)
        }
        _ => out.relation == want,
    }
}

impl TrialRecord {
    pub fn from_outcome(trial: u64, seed: u64, strategy: &AttackStrategy, out: &SessionOutcome) -> Self {
        let checked: Vec<_> = out.events.iter().filter(|e| e.forged && e.accepted.is_some()).collect();
        TrialRecord {
            trial,
            seed,
            relation: out.relation,
            case: out.correlation_case,
            abort: out.abort_by.as_ref().map(|a| format!("{:?}: {:?}", a.party, a.kind)),
            tag_failure: out.abort_by.as_ref().is_some_and(|a| a.is_tag_failure()),
            qber: out.qber_observed,
            pre_ec_mismatches: out.pre_ec_mismatches,
            pre_ec_compared: out.pre_ec_compared,
            final_key_bits: out.final_a.as_ref().map_or(0, |k| k.len()),
            key_bits_consumed: out.key_bits_consumed,
            tags_sent: out.tags_sent,
            forged: out.forged_sent(),
            forged_checked: checked.len(),
            forged_accepted: out.forged_accepted(),
            candidates_tested: out.events.iter().filter_map(|e| e.candidates_tested).sum(),
            max_weight: out.events.iter().filter_map(|e| e.weight).max(),
            guessed_bits: out.eve_guessed_bits,
            success: attack_succeeded(strategy, out),
            wall_micros: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: Option<f64>,
    pub wilson_interval: Option<Interval>,
    pub mean_qber: Option<f64>,
    /// Mean final-key length over trials that produced one.
    pub mean_key_bits: Option<f64>,
    pub aborts: u64,
    pub tag_failures: u64,
    pub forged_checked: u64,
    pub forged_accepted: u64,
    pub degenerate: bool,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0u64), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl Summary {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let trials = records.len() as u64;
        let successes = records.iter().filter(|r| r.success).count() as u64;
        Summary {
            trials,
            successes,
            success_rate: (trials > 0).then(|| successes as f64 / trials as f64),
            wilson_interval: wilson_interval(successes, trials, Z95),
            mean_qber: mean(records.iter().filter_map(|r| r.qber)),
            mean_key_bits: mean(records.iter().filter(|r| r.final_key_bits > 0).map(|r| r.final_key_bits as f64)),
            aborts: records.iter().filter(|r| r.abort.is_some()).count() as u64,
            tag_failures: records.iter().filter(|r| r.tag_failure).count() as u64,
            forged_checked: records.iter().map(|r| r.forged_checked as u64).sum(),
            forged_accepted: records.iter().map(|r| r.forged_accepted as u64).sum(),
            degenerate: trials == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

impl SweepResult {
    /// True when the summary is exactly what the records aggregate to.
    pub fn reaggregates(&self) -> bool {
        Summary::from_records(&self.records) == self.summary
    }
}

/// One trial's outcome with the seed it ran under.
pub fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<(u64, SessionOutcome), ConfigError> {
    let session = config.session()?;
    let seed = derive_seed(config.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((seed, execute_attack(&config.attack(), &session, &mut rng)))
}

/// Validates, then runs every trial in parallel; records come back in trial order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, ConfigError> {
    let session = config.session()?;
    let attack = config.attack();
    let records: Vec<TrialRecord> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(config.seed, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t0 = Instant::now();
            let out = execute_attack(&attack, &session, &mut rng);
            let mut rec = TrialRecord::from_outcome(trial, seed, &attack.strategy, &out);
            rec.wall_micros = t0.elapsed().as_micros() as u64;
            rec
        })
        .collect();
    let summary = Summary::from_records(&records);
    Ok(SweepResult {
        config: config.clone(),
        records,
        summary,
    })
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line<'a> {
    Header {
        schema_version: u32,
        variant: &'a str,
        config: &'a ExperimentConfig,
    },
    Trial(&'a TrialRecord),
    Summary(&'a Summary),
}

/// Header line, one line per trial, then the summary line.
pub fn write_jsonl<W: Write>(result: &SweepResult, mut w: W) -> io::Result<()> {
    let mut line = |l: Line| -> io::Result<()> {
        serde_json::to_writer(&mut w, &l)?;
        w.write_all(b"\n")
    };
    line(Line::Header {
        schema_version: SCHEMA_VERSION,
        variant: result.config.variant().name(),
        config: &result.config,
    })?;
    for r in &result.records {
        line(Line::Trial(r))?;
    }
    line(Line::Summary(&result.summary))
}

pub fn jsonl_bytes(result: &SweepResult) -> Vec<u8> {
    let mut buf = Vec::new();
    write_jsonl(result, &mut buf).expect("writing to memory");
    buf
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

/// Two-line CSV: header and the summary row.
pub fn summary_csv(result: &SweepResult) -> String {
    let c = &result.config;
    let s = &result.summary;
    let (lo, hi) = s.wilson_interval.map_or((None, None), |i| (Some(i.lo), Some(i.hi)));
    format!(
        "schema_version,protocol,auth,attack,z_bits,t_bits,n,trials,seed,successes,success_rate,wilson_lo,wilson_hi,mean_qber,mean_key_bits,aborts,tag_failures,forged_checked,forged_accepted,degenerate\n\
         {},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        SCHEMA_VERSION,
        c.variant().name(),
        c.auth,
        c.attack.name(),
        c.z_bits,
        c.t_bits,
        c.n,
        s.trials,
        c.seed,
        s.successes,
        opt(s.success_rate),
        opt(lo),
        opt(hi),
        opt(s.mean_qber),
        opt(s.mean_key_bits),
        s.aborts,
        s.tag_failures,
        s.forged_checked,
        s.forged_accepted,
        s.degenerate
    )
}
