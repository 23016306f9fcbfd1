//! Experiment configuration and its flat `key = value` file encoding.
//!
//! Keys: protocol, auth, z_bits, t_bits, attack, n, loss, flip, ec_code,
//! w_max, k_budget, vacuum, distort, trials, seed, out. Blank lines and
//! lines starting with `#` are ignored. A missing `protocol` means the
//! variant the attack targets, or protocol 1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adversary::{Attack, AttackStrategy};
use crate::hashing::{AuthScheme, AUTH_NAMES};
use crate::protocol::ec::ec_code;
use crate::protocol::{SessionConfig, SessionParams, Variant};
use crate::quantum::ChannelParams;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Option<Variant>,
    pub auth: String,
    pub z_bits: u32,
    pub t_bits: u32,
    pub attack: AttackStrategy,
    pub n: usize,
    pub loss: f64,
    pub flip: f64,
    pub ec_code: usize,
    pub w_max: usize,
    pub k_budget: usize,
    pub vacuum: f64,
    pub distort: f64,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let atk = Attack::new(AttackStrategy::None);
        Self {
            protocol: None,
            auth: "twostep".into(),
            z_bits: 12,
            t_bits: 16,
            attack: AttackStrategy::None,
            n: 4096,
            loss: 0.0,
            flip: 0.0,
            ec_code: SessionParams::default().ec_code,
            w_max: atk.w_max,
            k_budget: atk.k_budget,
            vacuum: atk.vacuum,
            distort: atk.distort,
            trials: 100,
            seed: 1,
            out: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 16] = [
    "protocol", "auth", "z_bits", "t_bits", "attack", "n", "loss", "flip", "ec_code", "w_max", "k_budget", "vacuum",
    "distort", "trials", "seed", "out",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let bad = || ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        };
        match key {
            "protocol" => self.protocol = Some(Variant::parse(value).ok_or_else(bad)?),
            "auth" => {
                let name = value.to_ascii_lowercase();
                if !AUTH_NAMES.contains(&name.as_str()) {
                    return Err(bad());
                }
                self.auth = name;
            }
            "z_bits" => self.z_bits = num(key, value)?,
            "t_bits" => self.t_bits = num(key, value)?,
            "attack" => self.attack = AttackStrategy::parse(value).ok_or_else(bad)?,
            "n" => self.n = num(key, value)?,
            "loss" => self.loss = num(key, value)?,
            "flip" => self.flip = num(key, value)?,
            "ec_code" => self.ec_code = num(key, value)?,
            "w_max" => self.w_max = num(key, value)?,
            "k_budget" => self.k_budget = num(key, value)?,
            "vacuum" => self.vacuum = num(key, value)?,
            "distort" => self.distort = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = (!value.is_empty()).then(|| value.to_string()),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(p) = self.protocol {
            writeln!(s, "protocol = {}", p.name()).unwrap();
        }
        writeln!(s, "auth = {}", self.auth).unwrap();
        writeln!(s, "z_bits = {}", self.z_bits).unwrap();
        writeln!(s, "t_bits = {}", self.t_bits).unwrap();
        writeln!(s, "attack = {}", self.attack.name()).unwrap();
        writeln!(s, "n = {}", self.n).unwrap();
        writeln!(s, "loss = {:?}", self.loss).unwrap();
        writeln!(s, "flip = {:?}", self.flip).unwrap();
        writeln!(s, "ec_code = {}", self.ec_code).unwrap();
        writeln!(s, "w_max = {}", self.w_max).unwrap();
        writeln!(s, "k_budget = {}", self.k_budget).unwrap();
        writeln!(s, "vacuum = {:?}", self.vacuum).unwrap();
        writeln!(s, "distort = {:?}", self.distort).unwrap();
        writeln!(s, "trials = {}", self.trials).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        if let Some(o) = &self.out {
            writeln!(s, "out = {o}").unwrap();
        }
        s
    }

    /// Protocol variant the sessions run.
    pub fn variant(&self) -> Variant {
        self.protocol
            .or(self.attack.target_variant())
            .unwrap_or(Variant::P1)
    }

    pub fn attack(&self) -> Attack {
        Attack {
            strategy: self.attack,
            w_max: self.w_max,
            k_budget: self.k_budget,
            vacuum: self.vacuum,
            distort: self.distort,
        }
    }

    fn auth_scheme(&self) -> Result<AuthScheme, ConfigError> {
        if !(1..=64).contains(&self.z_bits) {
            return Err(ConfigError::Invalid(format!("z_bits must lie in 1..=64, got {}", self.z_bits)));
        }
        AuthScheme::from_name(&self.auth, self.z_bits, self.t_bits)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown auth scheme {}", self.auth)))
    }

    /// Session configuration for every trial; validates first.
    pub fn session(&self) -> Result<SessionConfig, ConfigError> {
        self.validate()?;
        Ok(self.session_unchecked())
    }

    fn session_unchecked(&self) -> SessionConfig {
        SessionConfig::new(
            self.variant(),
            AuthScheme::from_name(&self.auth, self.z_bits, self.t_bits).expect("validated"),
            SessionParams {
                n_slots: self.n,
                channel: ChannelParams {
                    loss_prob: self.loss,
                    flip_prob: self.flip,
                },
                ec_code: self.ec_code,
                ledger_bits: None,
            },
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if let (Some(p), Some(t)) = (self.protocol, self.attack.target_variant()) {
            if p != t {
                return invalid(format!("attack {} targets protocol {}, not {}", self.attack, t.name(), p.name()));
            }
        }
        if ec_code(self.ec_code).is_none() {
            return invalid(format!("unknown EC code {}", self.ec_code));
        }
        for (k, v) in [("vacuum", self.vacuum), ("distort", self.distort)] {
            if !(0.0..=1.0).contains(&v) {
                return invalid(format!("{k} must lie in [0, 1], got {v}"));
            }
        }
        if self.w_max > 8 {
            return invalid(format!("w_max above 8 is not searchable, got {}", self.w_max));
        }
        for (k, v) in [("z_bits", self.z_bits), ("t_bits", self.t_bits)] {
            if !(1..=64).contains(&v) {
                return invalid(format!("{k} must lie in 1..=64, got {v}"));
            }
        }
        self.auth_scheme()?;
        self.session_unchecked().validate().map_err(ConfigError::Invalid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.protocol = Some(Variant::P2);
        c.attack = AttackStrategy::P2OneSidedQm;
        c.loss = 0.1 + 0.2;
        c.out = Some("runs/a b.jsonl".into());
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::parse("nonsense"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(ExperimentConfig::parse("n = -4"), Err(ConfigError::BadValue { .. })));
        let c = ExperimentConfig::parse("protocol = 3\nattack = p1-interleave").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("flip = 1.5").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("z_bits = 0").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn attack_picks_protocol() {
        let c = ExperimentConfig::parse("attack = p3-intercept-resend").unwrap();
        assert_eq!(c.variant(), Variant::P3);
        assert!(c.validate().is_ok());
    }
}
