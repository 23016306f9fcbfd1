//! Alice and Bob as state machines, the honest driver, and session outcomes.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::confirm::{confirm, ConfirmSpec};
use super::ec::{ec_code, ec_correct, ec_syndrome};
use super::frame::{concat_frames, WireMessage, MSG_P1, MSG_P2, MSG_P3, MSG_S2, MSG_S3, MSG_S4};
use super::ledger::KeyLedger;
use super::pa::{pa_apply, pa_output_len, PaSpec};
use super::sift::{apply_mask, bases_to_bits, detected_bits};
use super::{MsgSpec, Role, TagRule, Variant};
use crate::bits::BitString;
use crate::hashing::{AuthScheme, AuthVariant, Su2Key, Tag};
use crate::quantum::{self, BasisString, ChannelParams, QuantumFrame, RawKey};

pub const ACK_BYTE: u64 = 0xac;
pub const NONCE_BITS: usize = 64;
pub const EPS_BITS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub n_slots: usize,
    /// Applied to the channel into Bob, whoever prepared the states.
    pub channel: ChannelParams,
    pub ec_code: usize,
    /// Overrides the computed pool size when set.
    pub ledger_bits: Option<usize>,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            n_slots: 1024,
            channel: ChannelParams::IDEAL,
            ec_code: super::ec::default_code_index(),
            ledger_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub variant: Variant,
    pub auth: AuthScheme,
    pub params: SessionParams,
}

impl SessionConfig {
    pub fn new(variant: Variant, auth: AuthScheme, params: SessionParams) -> Self {
        Self { variant, auth, params }
    }

    /// Key bits a session needs from the pre-shared pool.
    pub fn ledger_need(&self) -> usize {
        let mut need = self.variant.tag_count() * self.auth.key_bits_per_tag() + self.auth.secret_bits_per_session();
        if self.variant.otp_syndrome() {
            let code = ec_code(self.params.ec_code).expect("unknown EC code");
            need += code.syndrome_bits(self.params.n_slots);
        }
        need
    }

    /// Rejects parameters a session cannot run with.
    pub fn validate(&self) -> Result<(), String> {
        let p = &self.params;
        if p.n_slots < 16 {
            return Err(format!("n_slots must be at least 16, got {}", p.n_slots));
        }
        if ec_code(p.ec_code).is_none() {
            return Err(format!("unknown EC code {}", p.ec_code));
        }
        for (name, v) in [("loss", p.channel.loss_prob), ("flip", p.channel.flip_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} probability {v} outside [0, 1]"));
            }
        }
        if !(1..=64).contains(&self.auth.t_bits) {
            return Err(format!("t_bits must lie in 1..=64, got {}", self.auth.t_bits));
        }
        if let Some(cap) = self.auth.max_message_bits() {
            let need = self.longest_tagged_bits();
            if need > cap {
                return Err(format!(
                    "{} slots need tags over {need} bits; the scheme takes at most {cap}",
                    p.n_slots
                ));
            }
        }
        Ok(())
    }

    /// Upper bound on the bits under any one tag.
    pub fn longest_tagged_bits(&self) -> u128 {
        let n = self.params.n_slots as u128;
        let syn = ec_code(self.params.ec_code).map_or(n, |c| c.syndrome_bits(self.params.n_slots) as u128);
        let frame = |t: u8| -> u128 {
            let data = match t {
                MSG_S2 if self.variant.alice_sends_bases() => vec![NONCE_BITS as u128],
                MSG_S2 => vec![n, n],
                MSG_S3 | MSG_S4 => vec![n],
                MSG_P1 => vec![8, syn, 32, 32],
                MSG_P2 => vec![1, EPS_BITS as u128],
                _ => vec![32, 32, 2 * n],
            };
            48 + data.iter().map(|d| 32 + d.div_ceil(8) * 8).sum::<u128>()
        };
        self.variant
            .schedule()
            .iter()
            .map(|s| match &s.tag {
                TagRule::None => 0,
                TagRule::Own { .. } => frame(s.msg_type),
                TagRule::Delayed { covers, .. } => covers.iter().map(|&t| frame(t)).sum(),
            })
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortKind {
    TagFailure { msg_type: u8 },
    OutOfOrder { expected: Option<u8>, got: u8 },
    WrongProtocol { got: u8 },
    Malformed { msg_type: u8, detail: String },
    ConfirmationFailed,
    PeerReportedFailure,
    LedgerExhausted(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortReason {
    pub party: Role,
    pub kind: AbortKind,
}

impl AbortReason {
    pub fn is_tag_failure(&self) -> bool {
        matches!(self.kind, AbortKind::TagFailure { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    Finished,
    Aborted(AbortReason),
}

#[derive(Clone, Debug)]
struct TagKey {
    su2: Su2Key,
    secret: Option<BitString>,
}

/// One legitimate party. Messages go in through [`Party::receive`]; replies come back.
#[derive(Clone, Debug)]
pub struct Party {
    role: Role,
    cfg: SessionConfig,
    ledger: KeyLedger,
    tag_keys: Vec<TagKey>,
    session_secret: Option<BitString>,
    rng: ChaCha8Rng,
    incoming: Vec<MsgSpec>,
    outgoing: Vec<MsgSpec>,
    next_in: usize,
    sent: BTreeMap<u8, Vec<u8>>,
    received: BTreeMap<u8, Vec<u8>>,
    challenge_sent: Option<BitString>,
    challenge_received: Option<BitString>,
    raw: RawKey,
    bases: BasisString,
    mask: Option<BitString>,
    sifted: Option<BitString>,
    corrected: Option<BitString>,
    epsilon: Option<f64>,
    pa: Option<PaSpec>,
    final_key: Option<BitString>,
    tags_sent: usize,
    verify_tags: bool,
    status: Status,
}

impl Party {
    /// Both parties of a session, sharing one key pool.
    pub fn pair(cfg: &SessionConfig, rng: &mut ChaCha8Rng) -> (Party, Party) {
        let size = cfg.params.ledger_bits.unwrap_or_else(|| cfg.ledger_need());
        let pool = BitString::random(size, rng);
        let alice = Party::new(Role::Alice, cfg.clone(), pool.clone(), rng.gen());
        let bob = Party::new(Role::Bob, cfg.clone(), pool, rng.gen());
        (alice, bob)
    }

    pub fn new(role: Role, cfg: SessionConfig, pool: BitString, seed: u64) -> Party {
        let schedule = cfg.variant.schedule();
        let (outgoing, incoming) = schedule.into_iter().partition(|s| s.sender == role);
        let mut p = Party {
            role,
            ledger: KeyLedger::new(pool),
            tag_keys: Vec::new(),
            session_secret: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            incoming,
            outgoing,
            next_in: 0,
            sent: BTreeMap::new(),
            received: BTreeMap::new(),
            challenge_sent: None,
            challenge_received: None,
            raw: Vec::new(),
            bases: Vec::new(),
            mask: None,
            sifted: None,
            corrected: None,
            epsilon: None,
            pa: None,
            final_key: None,
            tags_sent: 0,
            verify_tags: true,
            status: Status::Running,
            cfg,
        };
        if let Err(e) = p.draw_keys() {
            p.abort(AbortKind::LedgerExhausted(e.to_string()));
        }
        p
    }

    /// A party that accepts every tag; Eve's stand-in in a straightforward MITM.
    pub fn without_verification(mut self) -> Self {
        self.verify_tags = false;
        self
    }

    fn draw_keys(&mut self) -> Result<(), super::ledger::LedgerExhausted> {
        let su2 = self.cfg.auth.su2_params();
        for _ in 0..self.cfg.variant.tag_count() {
            let k = self.ledger.draw(su2.key_bits(), "tag-key")?;
            let extra = self.cfg.auth.secret_bits_per_tag();
            let secret = if extra > 0 {
                Some(self.ledger.draw(extra, "tag-secret")?)
            } else {
                None
            };
            self.tag_keys.push(TagKey {
                su2: su2.key_from_bits(&k),
                secret,
            });
        }
        let s = self.cfg.auth.secret_bits_per_session();
        if s > 0 {
            self.session_secret = Some(self.ledger.draw(s, "session-secret")?);
        }
        Ok(())
    }

    fn abort(&mut self, kind: AbortKind) {
        if self.status == Status::Running {
            self.status = Status::Aborted(AbortReason { party: self.role, kind });
        }
    }

    fn n(&self) -> usize {
        self.cfg.params.n_slots
    }

    fn pid(&self) -> u8 {
        self.cfg.variant.protocol_id()
    }

    // ---- authentication ----

    fn prefix(&self, slot: usize, nonce: Option<&BitString>, sending: bool) -> Option<Option<BitString>> {
        Some(match &self.cfg.auth.variant {
            AuthVariant::TwoStep | AuthVariant::Salted(_) => None,
            AuthVariant::NonceAlice => Some(nonce?.clone()),
            AuthVariant::NonceBob => {
                let c = if sending { &self.challenge_received } else { &self.challenge_sent };
                Some(c.clone().unwrap_or_default())
            }
            AuthVariant::FixedSecret { .. } => self.session_secret.clone(),
            AuthVariant::FreshSecret { .. } | AuthVariant::ItsComposed(_) => self.tag_keys[slot].secret.clone(),
        })
    }

    fn body(frames: &BTreeMap<u8, Vec<u8>>, rule: &TagRule, own: u8) -> Option<BitString> {
        let covers = match rule {
            TagRule::None => return None,
            TagRule::Own { .. } => vec![own],
            TagRule::Delayed { covers, .. } => covers.clone(),
        };
        let parts: Option<Vec<&[u8]>> = covers.iter().map(|t| frames.get(t).map(|f| f.as_slice())).collect();
        Some(concat_frames(parts?))
    }

    fn slot(rule: &TagRule) -> usize {
        match rule {
            TagRule::Own { slot } | TagRule::Delayed { slot, .. } => *slot,
            TagRule::None => 0,
        }
    }

    fn send(&mut self, msg_type: u8, fields: Vec<BitString>) -> WireMessage {
        let mut msg = WireMessage::new(self.pid(), msg_type, fields);
        self.sent.insert(msg_type, msg.frame_bytes());
        match self.cfg.auth.variant {
            AuthVariant::NonceAlice => msg.nonce = Some(BitString::random(NONCE_BITS, &mut self.rng)),
            AuthVariant::NonceBob => {
                let c = BitString::random(NONCE_BITS, &mut self.rng);
                msg.nonce = Some(c.clone());
                // the challenge takes effect after this message is tagged
                let rule = self.rule_out(msg_type);
                msg.tag = self.tag_for(&rule, msg_type, None);
                self.challenge_sent = Some(c);
                return msg;
            }
            _ => {}
        }
        let rule = self.rule_out(msg_type);
        msg.tag = self.tag_for(&rule, msg_type, msg.nonce.as_ref());
        msg
    }

    fn tag_for(&mut self, rule: &TagRule, msg_type: u8, nonce: Option<&BitString>) -> Option<Tag> {
        let body = Self::body(&self.sent, rule, msg_type)?;
        let slot = Self::slot(rule);
        let prefix = self.prefix(slot, nonce, true).expect("sender always has its nonce");
        match self.cfg.auth.tag(self.tag_keys[slot].su2, &body, prefix.as_ref()) {
            Ok(t) => {
                self.tags_sent += 1;
                Some(t)
            }
            Err(e) => {
                self.abort(AbortKind::Malformed {
                    msg_type,
                    detail: e.to_string(),
                });
                None
            }
        }
    }

    fn rule_out(&self, msg_type: u8) -> TagRule {
        self.outgoing
            .iter()
            .find(|s| s.msg_type == msg_type)
            .map(|s| s.tag.clone())
            .unwrap_or(TagRule::None)
    }

    fn verify(&self, rule: &TagRule, msg: &WireMessage) -> bool {
        if !self.verify_tags {
            return true;
        }
        let Some(body) = Self::body(&self.received, rule, msg.msg_type) else {
            return true;
        };
        let slot = Self::slot(rule);
        let Some(prefix) = self.prefix(slot, msg.nonce.as_ref(), false) else {
            return false;
        };
        match (&msg.tag, self.cfg.auth.tag(self.tag_keys[slot].su2, &body, prefix.as_ref())) {
            (Some(got), Ok(want)) => *got == want,
            _ => false,
        }
    }

    // ---- message handling ----

    /// Alice prepares the quantum states of (S1).
    pub fn start(&mut self) -> QuantumFrame {
        assert_eq!(self.role, Role::Alice);
        self.raw = quantum::random_raw(self.n(), &mut self.rng);
        self.bases = quantum::random_bases(self.n(), &mut self.rng);
        quantum::prepare(&self.raw, &self.bases).expect("fresh raw key has no empty slot")
    }

    /// Bob measures (S1) and answers with (S2).
    pub fn receive_quantum(&mut self, mut frame: QuantumFrame) -> Vec<WireMessage> {
        assert_eq!(self.role, Role::Bob);
        if self.status != Status::Running {
            return Vec::new();
        }
        let n = self.n();
        let bases = quantum::random_bases(n, &mut self.rng);
        let raw = match quantum::measure(&mut frame, &bases, self.cfg.params.channel, &mut self.rng) {
            Ok(r) => r,
            Err(e) => {
                self.abort(AbortKind::Malformed {
                    msg_type: 0,
                    detail: e.to_string(),
                });
                return Vec::new();
            }
        };
        self.bases = bases.iter().zip(&raw).map(|(b, r)| r.and(*b)).collect();
        self.raw = raw;
        let fields = if self.cfg.variant.alice_sends_bases() {
            if self.cfg.variant.uses_nonce_s2() {
                vec![BitString::random(NONCE_BITS, &mut self.rng)]
            } else {
                vec![BitString::from_u64(ACK_BYTE, 8)]
            }
        } else {
            vec![bases_to_bits(&self.bases), detected_bits(&self.bases)]
        };
        let s2 = self.send(MSG_S2, fields);
        self.outbox(vec![s2])
    }

    /// Drops outgoing messages once tagging failed.
    fn outbox(&self, msgs: Vec<WireMessage>) -> Vec<WireMessage> {
        match &self.status {
            Status::Aborted(AbortReason {
                kind: AbortKind::Malformed { .. },
                ..
            }) => Vec::new(),
            _ => msgs,
        }
    }

    pub fn receive(&mut self, msg: &WireMessage) -> Vec<WireMessage> {
        if self.status != Status::Running {
            return Vec::new();
        }
        if msg.protocol_id != self.pid() {
            self.abort(AbortKind::WrongProtocol { got: msg.protocol_id });
            return Vec::new();
        }
        let expected = self.incoming.get(self.next_in).cloned();
        let Some(spec) = expected.filter(|s| s.msg_type == msg.msg_type) else {
            self.abort(AbortKind::OutOfOrder {
                expected: self.incoming.get(self.next_in).map(|s| s.msg_type),
                got: msg.msg_type,
            });
            return Vec::new();
        };
        self.received.insert(msg.msg_type, msg.frame_bytes());
        if !self.verify(&spec.tag, msg) {
            self.abort(AbortKind::TagFailure { msg_type: msg.msg_type });
            return Vec::new();
        }
        if self.cfg.auth.variant == AuthVariant::NonceBob {
            self.challenge_received = msg.nonce.clone();
        }
        self.next_in += 1;
        let out = match (self.role, msg.msg_type) {
            (Role::Alice, MSG_S2) => self.alice_on_s2(msg),
            (Role::Alice, MSG_S4) => self.alice_on_s4(msg),
            (Role::Alice, MSG_P2) => self.alice_on_p2(msg),
            (Role::Bob, MSG_S3) => self.bob_on_s3(msg),
            (Role::Bob, MSG_P1) => self.bob_on_p1(msg),
            (Role::Bob, MSG_P3) => self.bob_on_p3(msg),
            _ => Err(format!("no handler for {}", msg.name())),
        };
        match out {
            Ok(v) => self.outbox(v),
            Err(detail) => {
                self.abort(AbortKind::Malformed {
                    msg_type: msg.msg_type,
                    detail,
                });
                Vec::new()
            }
        }
    }

    fn field<'m>(msg: &'m WireMessage, i: usize, len: Option<usize>) -> Result<&'m BitString, String> {
        let f = msg.fields.get(i).ok_or_else(|| format!("{} lacks field {i}", msg.name()))?;
        match len {
            Some(l) if f.len() != l => Err(format!("{} field {i} has {} bits, expected {l}", msg.name(), f.len())),
            _ => Ok(f),
        }
    }

    fn sift_with(&mut self, mask: BitString) -> Result<(), String> {
        self.sifted = Some(apply_mask(&self.raw, &mask).map_err(|e| e.to_string())?);
        self.mask = Some(mask);
        Ok(())
    }

    fn alice_on_s2(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>, String> {
        if self.cfg.variant.alice_sends_bases() {
            let width = if self.cfg.variant.uses_nonce_s2() { NONCE_BITS } else { 8 };
            Self::field(msg, 0, Some(width))?;
            let bases = bases_to_bits(&self.bases);
            return Ok(vec![self.send(MSG_S3, vec![bases])]);
        }
        let n = self.n();
        let bb = Self::field(msg, 0, Some(n))?;
        let det = Self::field(msg, 1, Some(n))?;
        let mask = BitString::from_bools((0..n).map(|k| det.get(k) && Some(bb.get(k)) == self.bases[k]));
        self.sift_with(mask.clone())?;
        let s3 = self.send(MSG_S3, vec![mask]);
        let p1 = self.build_p1()?;
        Ok(vec![s3, p1])
    }

    fn alice_on_s4(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>, String> {
        let mask = Self::field(msg, 0, Some(self.n()))?.clone();
        self.sift_with(mask)?;
        Ok(vec![self.build_p1()?])
    }

    fn build_p1(&mut self) -> Result<WireMessage, String> {
        let key = self.sifted.clone().expect("sifted before P1");
        let code = ec_code(self.cfg.params.ec_code).ok_or("unknown EC code")?;
        let mut syndrome = ec_syndrome(code, &key);
        if self.cfg.variant.otp_syndrome() {
            let pad = self.ledger.draw(syndrome.len(), "otp").map_err(|e| e.to_string())?;
            syndrome = syndrome.xor(&pad);
        }
        let co = ConfirmSpec::new(self.rng.gen());
        let value = confirm(&co, &key);
        let fields = vec![
            BitString::from_u64(code.index as u64, 8),
            syndrome,
            BitString::from_u64(co.point, 32),
            BitString::from_u64(value, 32),
        ];
        Ok(self.send(MSG_P1, fields))
    }

    fn alice_on_p2(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>, String> {
        let ok = Self::field(msg, 0, Some(1))?.get(0);
        let eps = Self::field(msg, 1, Some(EPS_BITS))?.to_u64() as f64 / 65536.0;
        if !ok {
            self.abort(AbortKind::PeerReportedFailure);
            return Ok(Vec::new());
        }
        self.epsilon = Some(eps);
        let key = self.sifted.clone().expect("sifted before P2");
        let r = pa_output_len(key.len(), eps);
        let out = if self.cfg.variant.has_p3() {
            let pa = PaSpec::random(key.len(), r, &mut self.rng);
            let fields = vec![
                BitString::from_u64(r as u64, 32),
                BitString::from_u64(key.len() as u64, 32),
                pa.seed.clone(),
            ];
            self.pa = Some(pa);
            vec![self.send(MSG_P3, fields)]
        } else {
            self.pa = Some(self.derived_pa(key.len(), r));
            Vec::new()
        };
        self.final_key = Some(pa_apply(self.pa.as_ref().unwrap(), &key).map_err(|e| e.to_string())?);
        self.status = Status::Finished;
        Ok(out)
    }

    fn bob_on_s3(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>, String> {
        let n = self.n();
        let f = Self::field(msg, 0, Some(n))?.clone();
        if self.cfg.variant.alice_sends_bases() {
            let mask = BitString::from_bools((0..n).map(|k| self.bases[k] == Some(f.get(k))));
            self.sift_with(mask.clone())?;
            Ok(vec![self.send(MSG_S4, vec![mask])])
        } else {
            self.sift_with(f)?;
            Ok(Vec::new())
        }
    }

    fn bob_on_p1(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>, String> {
        let key = self.sifted.clone().ok_or("P1 before sifting")?;
        let idx = Self::field(msg, 0, Some(8))?.to_u64() as usize;
        let code = ec_code(idx).ok_or_else(|| format!("unknown EC code {idx}"))?;
        let mut syndrome = Self::field(msg, 1, Some(code.syndrome_bits(key.len())))?.clone();
        let point = Self::field(msg, 2, Some(32))?.to_u64();
        let value = Self::field(msg, 3, Some(32))?.to_u64();
        if self.cfg.variant.otp_syndrome() {
            let pad = self.ledger.draw(syndrome.len(), "otp").map_err(|e| e.to_string())?;
            syndrome = syndrome.xor(&pad);
        }
        let (corrected, flipped) = ec_correct(code, &key, &syndrome).map_err(|e| e.to_string())?;
        if confirm(&ConfirmSpec::new(point), &corrected) != value {
            let fail = self.send(MSG_P2, vec![BitString::zeros(1), BitString::zeros(EPS_BITS)]);
            self.abort(AbortKind::ConfirmationFailed);
            return Ok(vec![fail]);
        }
        let eps = if key.is_empty() { 0.0 } else { flipped as f64 / key.len() as f64 };
        let enc = ((eps * 65536.0).round() as u64).min(65535);
        self.epsilon = Some(enc as f64 / 65536.0);
        self.corrected = Some(corrected.clone());
        let p2 = self.send(MSG_P2, vec![BitString::ones(1), BitString::from_u64(enc, EPS_BITS)]);
        if !self.cfg.variant.has_p3() {
            let r = pa_output_len(corrected.len(), self.epsilon.unwrap());
            let pa = self.derived_pa(corrected.len(), r);
            self.final_key = Some(pa_apply(&pa, &corrected).map_err(|e| e.to_string())?);
            self.pa = Some(pa);
            self.status = Status::Finished;
        }
        Ok(vec![p2])
    }

    fn bob_on_p3(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>, String> {
        let key = self.corrected.clone().ok_or("P3 before reconciliation")?;
        let r = Self::field(msg, 0, Some(32))?.to_u64() as usize;
        let n = Self::field(msg, 1, Some(32))?.to_u64() as usize;
        let seed = Self::field(msg, 2, None)?.clone();
        let pa = PaSpec { r, n, seed };
        self.final_key = Some(pa_apply(&pa, &key).map_err(|e| e.to_string())?);
        self.pa = Some(pa);
        self.status = Status::Finished;
        Ok(Vec::new())
    }

    /// PA seed expanded from the public digests of the two sifting messages
    /// this party saw, for the variants without (P3).
    fn derived_pa(&self, n: usize, r: usize) -> PaSpec {
        derived_pa(&self.cfg.auth, self.sifting_frames(), n, r)
    }

    fn sifting_frames(&self) -> [Vec<u8>; 2] {
        self.cfg.variant.sifting_messages().map(|t| {
            self.sent
                .get(&t)
                .or_else(|| self.received.get(&t))
                .cloned()
                .unwrap_or_default()
        })
    }

    // ---- observation ----

    pub fn role(&self) -> Role {
        self.role
    }
    pub fn status(&self) -> &Status {
        &self.status
    }
    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }
    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }
    pub fn raw(&self) -> &RawKey {
        &self.raw
    }
    pub fn bases(&self) -> &BasisString {
        &self.bases
    }
    pub fn mask(&self) -> Option<&BitString> {
        self.mask.as_ref()
    }
    pub fn sifted(&self) -> Option<&BitString> {
        self.sifted.as_ref()
    }
    /// Bob's key after error correction; Alice's sifted key.
    pub fn reconciled(&self) -> Option<&BitString> {
        match self.role {
            Role::Alice => self.sifted.as_ref(),
            Role::Bob => self.corrected.as_ref(),
        }
    }
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }
    pub fn pa(&self) -> Option<&PaSpec> {
        self.pa.as_ref()
    }
    pub fn final_key(&self) -> Option<&BitString> {
        self.final_key.as_ref()
    }
    pub fn key_bits_consumed(&self) -> usize {
        self.ledger.consumed()
    }
    pub fn tags_sent(&self) -> usize {
        self.tags_sent
    }
}

/// ChaCha8 seed from f-digests of the two sifting frames.
pub fn derive_pa_seed(auth: &AuthScheme, frames: [Vec<u8>; 2]) -> [u8; 32] {
    let mut seed = [0u8; 32];
    for (i, f) in frames.iter().enumerate() {
        let d = auth.public_hash.digest_bytes(f, f.len() * 8);
        seed[i * 8..i * 8 + 8].copy_from_slice(&d.to_le_bytes());
    }
    seed
}

/// PA for the variants without (P3), expanded from [`derive_pa_seed`].
pub fn derived_pa(auth: &AuthScheme, frames: [Vec<u8>; 2], n: usize, r: usize) -> PaSpec {
    let mut rng = ChaCha8Rng::from_seed(derive_pa_seed(auth, frames));
    PaSpec::random(n, r, &mut rng)
}

// ---- outcomes ----

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub direction: String,
    pub msg_type: String,
    pub forged: bool,
    pub weight: Option<usize>,
    pub candidates_tested: Option<u64>,
    pub accepted: Option<bool>,
    pub note: Option<String>,
}

impl TraceEvent {
    pub fn plain(direction: &str, msg: &WireMessage) -> Self {
        Self {
            direction: direction.to_string(),
            msg_type: msg.name().to_string(),
            forged: false,
            weight: None,
            candidates_tested: None,
            accepted: None,
            note: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveReport {
    pub sifted_ea: Option<BitString>,
    pub sifted_eb: Option<BitString>,
    pub final_ea: Option<BitString>,
    pub final_eb: Option<BitString>,
    /// Bits of Alice's key Eve had to guess, when she guessed.
    pub guessed_bits: Option<usize>,
    pub events: Vec<TraceEvent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyRelation {
    /// K^A = K^E = K^B.
    AllEqual,
    /// K^A = K^{E<->A} != K^{E<->B} = K^B.
    SeparateWorlds,
    /// K^A != K^E = K^B.
    OneSided,
    /// K^A = K^B and Eve holds neither.
    Honest,
    /// Keys disagree without Eve holding both.
    Mismatch,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub variant: Variant,
    pub final_a: Option<BitString>,
    pub final_b: Option<BitString>,
    pub final_ea: Option<BitString>,
    pub final_eb: Option<BitString>,
    pub sifted_a: Option<BitString>,
    pub sifted_b: Option<BitString>,
    pub sifted_ea: Option<BitString>,
    pub sifted_eb: Option<BitString>,
    pub abort_by: Option<AbortReason>,
    pub correlation_case: Option<u8>,
    pub relation: KeyRelation,
    /// Error rate Bob reported after correction.
    pub qber_observed: Option<f64>,
    /// Raw-bit disagreements on slots where the true bases of Alice and Bob agree.
    pub pre_ec_mismatches: usize,
    pub pre_ec_compared: usize,
    pub key_bits_consumed: usize,
    pub tags_sent: usize,
    pub eve_guessed_bits: Option<usize>,
    pub events: Vec<TraceEvent>,
}

impl SessionOutcome {
    pub fn pre_ec_disagreement(&self) -> Option<f64> {
        (self.pre_ec_compared > 0).then(|| self.pre_ec_mismatches as f64 / self.pre_ec_compared as f64)
    }

    pub fn forged_sent(&self) -> usize {
        self.events.iter().filter(|e| e.forged).count()
    }

    pub fn forged_accepted(&self) -> usize {
        self.events.iter().filter(|e| e.forged && e.accepted == Some(true)).count()
    }

    /// Final key Eve shares with both parties, when there is one.
    pub fn final_e(&self) -> Option<&BitString> {
        (self.relation == KeyRelation::AllEqual).then_some(self.final_a.as_ref()).flatten()
    }
}

fn approx(x: &BitString, y: &BitString) -> bool {
    x.len() == y.len() && x.hamming(y) * 10 <= x.len()
}

/// Correlation case of the sifted keys, or `None` when no case box matches.
pub fn classify_case(delayed: bool, a: &BitString, ea: &BitString, eb: &BitString, b: &BitString) -> Option<u8> {
    if delayed {
        if a == ea && !approx(ea, eb) && eb == b {
            Some(2)
        } else if !approx(a, ea) && eb == b {
            Some(4)
        } else {
            None
        }
    } else if a == ea && approx(ea, eb) && approx(eb, b) {
        Some(1)
    } else if approx(a, ea) && !approx(ea, eb) && approx(eb, b) {
        Some(3)
    } else {
        None
    }
}

pub fn relation(
    fa: Option<&BitString>,
    fb: Option<&BitString>,
    fea: Option<&BitString>,
    feb: Option<&BitString>,
    aborted: bool,
) -> KeyRelation {
    let (Some(a), Some(b)) = (fa, fb) else {
        return KeyRelation::Aborted;
    };
    if aborted {
        return KeyRelation::Aborted;
    }
    let ea_ok = fea == Some(a);
    let eb_ok = feb == Some(b);
    if a == b {
        if ea_ok || eb_ok {
            KeyRelation::AllEqual
        } else {
            KeyRelation::Honest
        }
    } else if ea_ok && eb_ok {
        KeyRelation::SeparateWorlds
    } else if eb_ok {
        KeyRelation::OneSided
    } else {
        KeyRelation::Mismatch
    }
}

fn pre_ec(alice: &Party, bob: &Party) -> (usize, usize) {
    let mut diff = 0;
    let mut total = 0;
    for k in 0..alice.raw.len().min(bob.raw.len()) {
        if bob.bases[k].is_some() && bob.bases[k] == alice.bases[k] {
            total += 1;
            diff += (bob.raw[k] != alice.raw[k]) as usize;
        }
    }
    (diff, total)
}

impl SessionOutcome {
    pub fn from_parties(alice: &Party, bob: &Party, eve: Option<EveReport>) -> Self {
        let abort_by = [alice, bob].iter().find_map(|p| match &p.status {
            Status::Aborted(r) => Some(r.clone()),
            _ => None,
        });
        let unfinished = alice.status != Status::Finished || bob.status != Status::Finished;
        let eve = eve.unwrap_or_default();
        let variant = alice.cfg.variant;
        let correlation_case = match (&alice.sifted, &eve.sifted_ea, &eve.sifted_eb, &bob.sifted) {
            (Some(a), Some(ea), Some(eb), Some(b)) => classify_case(variant.delayed_auth(), a, ea, eb, b),
            _ => None,
        };
        let rel = relation(
            alice.final_key.as_ref(),
            bob.final_key.as_ref(),
            eve.final_ea.as_ref(),
            eve.final_eb.as_ref(),
            unfinished,
        );
        let (pre_ec_mismatches, pre_ec_compared) = pre_ec(alice, bob);
        SessionOutcome {
            variant,
            final_a: alice.final_key.clone(),
            final_b: bob.final_key.clone(),
            final_ea: eve.final_ea,
            final_eb: eve.final_eb,
            sifted_a: alice.sifted.clone(),
            sifted_b: bob.sifted.clone(),
            sifted_ea: eve.sifted_ea,
            sifted_eb: eve.sifted_eb,
            abort_by,
            correlation_case,
            relation: rel,
            qber_observed: bob.epsilon,
            pre_ec_mismatches,
            pre_ec_compared,
            key_bits_consumed: alice.key_bits_consumed().max(bob.key_bits_consumed()),
            tags_sent: alice.tags_sent + bob.tags_sent,
            eve_guessed_bits: eve.guessed_bits,
            events: eve.events,
        }
    }
}

/// An active attacker controlling both channels.
pub trait Adversary: Sync {
    fn drive(&self, alice: &mut Party, bob: &mut Party, rng: &mut ChaCha8Rng) -> EveReport;
}

/// Delivers every message unchanged.
pub fn drive_honest(alice: &mut Party, bob: &mut Party) -> Vec<TraceEvent> {
    let mut events = Vec::new();
    let frame = alice.start();
    let mut queue: VecDeque<(Role, WireMessage)> = bob.receive_quantum(frame).into_iter().map(|m| (Role::Alice, m)).collect();
    while let Some((to, msg)) = queue.pop_front() {
        let (dir, party) = match to {
            Role::Alice => ("B->A", &mut *alice),
            Role::Bob => ("A->B", &mut *bob),
        };
        events.push(TraceEvent::plain(dir, &msg));
        queue.extend(party.receive(&msg).into_iter().map(|m| (to.peer(), m)));
    }
    events
}

pub fn run_protocol(cfg: &SessionConfig, adversary: Option<&dyn Adversary>, rng: &mut ChaCha8Rng) -> SessionOutcome {
    let (mut alice, mut bob) = Party::pair(cfg, rng);
    match adversary {
        None => {
            let events = drive_honest(&mut alice, &mut bob);
            let report = EveReport {
                events,
                ..Default::default()
            };
            let mut out = SessionOutcome::from_parties(&alice, &bob, Some(report));
            out.correlation_case = None;
            out
        }
        Some(adv) => {
            let report = adv.drive(&mut alice, &mut bob, rng);
            SessionOutcome::from_parties(&alice, &bob, Some(report))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(variant: Variant, n: usize) -> SessionConfig {
        SessionConfig::new(
            variant,
            AuthScheme::two_step(12, 16),
            SessionParams {
                n_slots: n,
                ..Default::default()
            },
        )
    }

    #[test]
    fn honest_runs_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for v in Variant::ALL {
            let out = run_protocol(&cfg(v, 512), None, &mut rng);
            assert_eq!(out.abort_by, None, "{v:?}");
            assert_eq!(out.relation, KeyRelation::Honest, "{v:?}");
            assert!(out.final_a.as_ref().unwrap().len() > 100);
            assert_eq!(out.tags_sent, v.tag_count());
        }
    }

    #[test]
    fn ledger_exhaustion_aborts() {
        let mut c = cfg(Variant::P1, 64);
        c.params.ledger_bits = Some(100);
        let out = run_protocol(&c, None, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(out.abort_by.unwrap().kind, AbortKind::LedgerExhausted(_)));
    }

    #[test]
    fn out_of_order_aborts() {
        let c = cfg(Variant::P1, 64);
        let (mut alice, mut bob) = Party::pair(&c, &mut ChaCha8Rng::seed_from_u64(2));
        let frame = alice.start();
        let s2 = bob.receive_quantum(frame).pop().unwrap();
        let mut s4 = s2.clone();
        s4.msg_type = MSG_S4;
        alice.receive(&s4);
        assert!(matches!(
            alice.status(),
            Status::Aborted(AbortReason {
                kind: AbortKind::OutOfOrder { .. },
                ..
            })
        ));
    }
}
