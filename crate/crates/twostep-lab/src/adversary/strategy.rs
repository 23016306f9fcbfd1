//! Complete attack strategies. Eve owns both channels and drives Alice and Bob
//! message by message.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forge::{find_colliding_message, MutationSpace};
use super::subseq::{craft_bases_mask, swap_atoms};
use crate::bits::BitString;
use crate::hashing::AuthVariant;
use crate::protocol::confirm::{confirm, confirm_bit_delta, ConfirmSpec};
use crate::protocol::ec::{ec_code, ec_correct, ec_syndrome, EcCode};
use crate::protocol::frame::{MSG_P1, MSG_P2, MSG_P3, MSG_S2, MSG_S3, MSG_S4};
use crate::protocol::pa::{pa_apply, pa_output_len, PaSolver, PaSpec};
use crate::protocol::session::{derived_pa, drive_honest, NONCE_BITS};
use crate::protocol::sift::{apply_mask, bases_to_bits};
use crate::protocol::{
    run_protocol, AbortKind, Adversary, EveReport, KeyRelation, Party, Role, SessionConfig, SessionOutcome, Status,
    TagRule, TraceEvent, WireMessage,
};
use crate::protocol::{MsgSpec, Variant};
use crate::quantum::{self, BasisString, QuantumFrame, RawKey, Slot};

/// Null-space directions offered to the PA-seed collision search.
const PA_ATOMS: usize = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Row {
    ASends,
    BSends,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackStrategy {
    None,
    StraightforwardMitm,
    P1InterleaveQm,
    P2OneSidedQm,
    P2BidirectionalQm,
    P3InterceptResend,
    Matrix { row: Row, qm: bool, delayed: bool },
    /// The Protocol 1-3 attacks against the variants without (P3).
    NoP3 { protocol: u8 },
    OtpEcQm,
    OtpEcGuess,
}

impl AttackStrategy {
    pub const MATRIX: [AttackStrategy; 8] = [
        AttackStrategy::Matrix { row: Row::ASends, qm: true, delayed: false },
        AttackStrategy::Matrix { row: Row::ASends, qm: true, delayed: true },
        AttackStrategy::Matrix { row: Row::ASends, qm: false, delayed: false },
        AttackStrategy::Matrix { row: Row::ASends, qm: false, delayed: true },
        AttackStrategy::Matrix { row: Row::BSends, qm: true, delayed: false },
        AttackStrategy::Matrix { row: Row::BSends, qm: true, delayed: true },
        AttackStrategy::Matrix { row: Row::BSends, qm: false, delayed: false },
        AttackStrategy::Matrix { row: Row::BSends, qm: false, delayed: true },
    ];

    /// Every strategy that attacks a session.
    pub fn all() -> Vec<AttackStrategy> {
        let mut v = vec![
            AttackStrategy::StraightforwardMitm,
            AttackStrategy::P1InterleaveQm,
            AttackStrategy::P2OneSidedQm,
            AttackStrategy::P2BidirectionalQm,
            AttackStrategy::P3InterceptResend,
        ];
        v.extend(Self::MATRIX);
        v.extend((1..=3).map(|protocol| AttackStrategy::NoP3 { protocol }));
        v.extend([AttackStrategy::OtpEcQm, AttackStrategy::OtpEcGuess]);
        v
    }

    pub fn name(&self) -> String {
        match self {
            AttackStrategy::None => "none".into(),
            AttackStrategy::StraightforwardMitm => "mitm".into(),
            AttackStrategy::P1InterleaveQm => "p1-interleave".into(),
            AttackStrategy::P2OneSidedQm => "p2-onesided".into(),
            AttackStrategy::P2BidirectionalQm => "p2-bidirectional".into(),
            AttackStrategy::P3InterceptResend => "p3-intercept-resend".into(),
            AttackStrategy::Matrix { row, qm, delayed } => format!(
                "matrix-{}-{}-{}",
                if *row == Row::ASends { "a" } else { "b" },
                if *qm { "qm" } else { "noqm" },
                if *delayed { "del" } else { "imm" }
            ),
            AttackStrategy::NoP3 { protocol } => format!("nop3-{protocol}"),
            AttackStrategy::OtpEcQm => "otp-qm".into(),
            AttackStrategy::OtpEcGuess => "otp-guess".into(),
        }
    }

    pub fn parse(s: &str) -> Option<AttackStrategy> {
        let s = s.to_ascii_lowercase();
        std::iter::once(AttackStrategy::None)
            .chain(Self::all())
            .find(|a| a.name() == s)
    }

    /// Protocol variant the strategy attacks; `None` keeps the configured one.
    pub fn target_variant(&self) -> Option<Variant> {
        Some(match self {
            AttackStrategy::None | AttackStrategy::StraightforwardMitm => return None,
            AttackStrategy::P1InterleaveQm => Variant::P1,
            AttackStrategy::P2OneSidedQm | AttackStrategy::P2BidirectionalQm => Variant::P2,
            AttackStrategy::P3InterceptResend => Variant::P3,
            AttackStrategy::Matrix { row, delayed, .. } => match (row, delayed) {
                (Row::ASends, false) => Variant::P1,
                (Row::ASends, true) => Variant::P2,
                (Row::BSends, false) => Variant::P3,
                (Row::BSends, true) => Variant::P3Delayed,
            },
            AttackStrategy::NoP3 { protocol } => match protocol {
                1 => Variant::P1NoP3,
                2 => Variant::P2NoP3,
                _ => Variant::P3NoP3,
            },
            AttackStrategy::OtpEcQm | AttackStrategy::OtpEcGuess => Variant::P1OtpEc,
        })
    }

    pub fn needs_memory(&self) -> bool {
        match self.plan() {
            Some(Plan::ASends { qm, .. }) | Some(Plan::BSends { qm, .. }) => qm,
            Some(Plan::Bidirectional) => true,
            _ => false,
        }
    }

    /// Correlation case of the sifted keys the strategy produces.
    pub fn expected_case(&self) -> Option<u8> {
        match self.plan()? {
            Plan::ASends { interleave: true, .. } => Some(1),
            Plan::ASends { qm, delayed, .. } | Plan::BSends { qm, delayed } => Some(match (qm, delayed) {
                (true, true) => 2,
                (false, true) => 4,
                (_, false) => 3,
            }),
            Plan::Bidirectional | Plan::Mitm => None,
        }
    }

    /// Final-key relation the strategy produces.
    pub fn expected_relation(&self) -> KeyRelation {
        match self {
            AttackStrategy::None => KeyRelation::Honest,
            AttackStrategy::StraightforwardMitm => KeyRelation::Aborted,
            AttackStrategy::NoP3 { protocol: 2 | 3 } => KeyRelation::SeparateWorlds,
            _ if self.expected_case() == Some(4) => KeyRelation::OneSided,
            _ => KeyRelation::AllEqual,
        }
    }

    fn plan(&self) -> Option<Plan> {
        let a = |qm, delayed, interleave| Plan::ASends { qm, delayed, interleave };
        let b = |qm, delayed| Plan::BSends { qm, delayed };
        Some(match *self {
            AttackStrategy::None => return None,
            AttackStrategy::StraightforwardMitm => Plan::Mitm,
            AttackStrategy::P1InterleaveQm => a(true, false, true),
            AttackStrategy::P2OneSidedQm => a(true, true, false),
            AttackStrategy::P2BidirectionalQm => Plan::Bidirectional,
            AttackStrategy::P3InterceptResend => b(false, false),
            AttackStrategy::Matrix { row: Row::ASends, qm, delayed } => a(qm, delayed, qm && !delayed),
            AttackStrategy::Matrix { row: Row::BSends, qm, delayed } => b(qm, delayed),
            AttackStrategy::NoP3 { protocol: 1 } => a(true, false, true),
            AttackStrategy::NoP3 { protocol: 2 } => a(true, true, false),
            AttackStrategy::NoP3 { .. } => b(false, false),
            AttackStrategy::OtpEcQm => a(true, false, false),
            AttackStrategy::OtpEcGuess => a(false, false, false),
        })
    }
}

impl fmt::Display for AttackStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Plan {
    ASends { qm: bool, delayed: bool, interleave: bool },
    BSends { qm: bool, delayed: bool },
    Bidirectional,
    Mitm,
}

/// A strategy with Eve's knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attack {
    pub strategy: AttackStrategy,
    /// Most atoms flipped in one forged message.
    pub w_max: usize,
    /// Mismatches tolerated when crafting Alice's sifting mask.
    pub k_budget: usize,
    /// Fraction of slots sent as vacuum in the interleaving attack.
    pub vacuum: f64,
    /// Fraction of her key with Bob that Eve flips before (Pa').
    pub distort: f64,
}

impl Attack {
    pub fn new(strategy: AttackStrategy) -> Self {
        Self {
            strategy,
            w_max: 3,
            k_budget: 16,
            vacuum: 0.1,
            distort: 0.0,
        }
    }
}

/// Runs `attack` against the variant it targets, or `cfg.variant` when it names none.
pub fn execute_attack(attack: &Attack, cfg: &SessionConfig, rng: &mut ChaCha8Rng) -> SessionOutcome {
    let mut cfg = cfg.clone();
    if let Some(v) = attack.strategy.target_variant() {
        cfg.variant = v;
    }
    match attack.strategy {
        AttackStrategy::None => run_protocol(&cfg, None, rng),
        _ => run_protocol(&cfg, Some(attack), rng),
    }
}

impl Adversary for Attack {
    fn drive(&self, alice: &mut Party, bob: &mut Party, rng: &mut ChaCha8Rng) -> EveReport {
        let mut run = Run::new(self, alice.config().clone());
        match self.strategy.plan() {
            None => run.report.events = drive_honest(alice, bob),
            Some(Plan::Mitm) => run.mitm(alice, bob, rng),
            Some(Plan::Bidirectional) => {
                run.bidirectional(alice, bob, rng);
            }
            Some(Plan::ASends { qm, interleave, .. }) => {
                run.a_sends(alice, bob, qm, interleave, rng);
            }
            Some(Plan::BSends { qm, .. }) => {
                run.b_sends(alice, bob, qm, rng);
            }
        }
        run.report
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mark {
    Forward,
    /// Replaced where no tag needs to match.
    Plain,
    Forged { weight: usize, tested: u64 },
    /// No collision available; sent with the intercepted tag regardless.
    Blind { tested: u64 },
}

/// Eve's copy of one side's sifted key and the indices she is unsure of.
#[derive(Clone, Debug)]
struct EveKey {
    bits: BitString,
    unsure: Vec<usize>,
}

fn pick(msgs: &[WireMessage], t: u8) -> Option<WireMessage> {
    msgs.iter().find(|m| m.msg_type == t).cloned()
}

/// Sifted-key indices of the selected slots among `slots`.
fn sifted_indices(mask: &BitString, slots: &BTreeSet<usize>) -> Vec<usize> {
    let mut out = Vec::new();
    let mut idx = 0;
    for k in 0..mask.len() {
        if mask.get(k) {
            if slots.contains(&k) {
                out.push(idx);
            }
            idx += 1;
        }
    }
    out
}

fn single_bits(msg: &WireMessage, field: usize, positions: impl IntoIterator<Item = usize>) -> Vec<Vec<usize>> {
    let off = msg.field_bit_offset(field);
    positions.into_iter().map(|p| vec![off + p]).collect()
}

fn in_field(msg: &WireMessage, field: usize, atoms: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let off = msg.field_bit_offset(field);
    atoms.into_iter().map(|a| a.into_iter().map(|p| off + p).collect()).collect()
}

fn to_bits(frame: &[u8]) -> BitString {
    BitString::from_bytes(frame, frame.len() * 8)
}

fn eps_of(p2: &WireMessage) -> f64 {
    p2.fields[1].to_u64() as f64 / 65536.0
}

fn pa_of(p3: &WireMessage) -> PaSpec {
    PaSpec {
        r: p3.fields[0].to_u64() as usize,
        n: p3.fields[1].to_u64() as usize,
        seed: p3.fields[2].clone(),
    }
}

fn idx(r: Role) -> usize {
    match r {
        Role::Alice => 0,
        Role::Bob => 1,
    }
}

struct Run<'a> {
    atk: &'a Attack,
    cfg: SessionConfig,
    schedule: Vec<MsgSpec>,
    /// Messages as the legitimate parties sent them.
    orig: BTreeMap<(Role, u8), WireMessage>,
    /// Messages as Eve delivered them.
    dlv: BTreeMap<(Role, u8), WireMessage>,
    /// Last nonce delivered to the sender when it sent each message.
    sender_nonce: BTreeMap<(Role, u8), Option<BitString>>,
    last_dlv_nonce: [Option<BitString>; 2],
    last_sent_nonce: [Option<BitString>; 2],
    report: EveReport,
}

impl<'a> Run<'a> {
    fn new(atk: &'a Attack, cfg: SessionConfig) -> Self {
        Self {
            atk,
            schedule: cfg.variant.schedule(),
            cfg,
            orig: BTreeMap::new(),
            dlv: BTreeMap::new(),
            sender_nonce: BTreeMap::new(),
            last_dlv_nonce: [None, None],
            last_sent_nonce: [None, None],
            report: EveReport::default(),
        }
    }

    fn pid(&self) -> u8 {
        self.cfg.variant.protocol_id()
    }

    fn code(&self) -> &'static EcCode {
        ec_code(self.cfg.params.ec_code).expect("configured EC code exists")
    }

    fn rule(&self, t: u8) -> TagRule {
        self.schedule
            .iter()
            .find(|s| s.msg_type == t)
            .map(|s| s.tag.clone())
            .unwrap_or(TagRule::None)
    }

    fn covers(&self, tagged: u8) -> Vec<u8> {
        match self.rule(tagged) {
            TagRule::None => Vec::new(),
            TagRule::Own { .. } => vec![tagged],
            TagRule::Delayed { covers, .. } => covers,
        }
    }

    // ---- channel plumbing ----

    fn intercept(&mut self, from: Role, msgs: Vec<WireMessage>) -> Vec<WireMessage> {
        for m in &msgs {
            self.orig.insert((from, m.msg_type), m.clone());
            self.sender_nonce
                .insert((from, m.msg_type), self.last_dlv_nonce[idx(from)].clone());
            self.last_sent_nonce[idx(from)] = m.nonce.clone();
            let dir = if from == Role::Alice { "A->E" } else { "B->E" };
            self.report.events.push(TraceEvent::plain(dir, m));
        }
        msgs
    }

    fn deliver(&mut self, to: &mut Party, msg: WireMessage, mark: Mark) -> Vec<WireMessage> {
        let role = to.role();
        let was_running = to.is_running();
        self.dlv.insert((role, msg.msg_type), msg.clone());
        self.last_dlv_nonce[idx(role)] = msg.nonce.clone();
        let out = to.receive(&msg);
        let rejected = matches!(
            to.status(),
            Status::Aborted(r) if r.party == role && r.kind == AbortKind::TagFailure { msg_type: msg.msg_type }
        );
        let mut ev = TraceEvent::plain(if role == Role::Alice { "E->A" } else { "E->B" }, &msg);
        ev.forged = mark != Mark::Forward;
        ev.accepted = (was_running && self.rule(msg.msg_type) != TagRule::None).then_some(!rejected);
        match mark {
            Mark::Forged { weight, tested } => {
                ev.weight = Some(weight);
                ev.candidates_tested = Some(tested);
            }
            Mark::Blind { tested } => {
                ev.candidates_tested = Some(tested);
                ev.note = Some("no collision; intercepted tag reused".into());
            }
            _ => {}
        }
        self.report.events.push(ev);
        self.intercept(role, out)
    }

    fn forward(&mut self, to: &mut Party, msg: WireMessage) -> Vec<WireMessage> {
        self.deliver(to, msg, Mark::Forward)
    }

    // ---- authentication context ----

    /// Public bits the sender hashed ahead of the covered frames of `tagged`.
    fn sender_ctx(&self, from: Role, tagged: u8) -> Option<BitString> {
        match &self.cfg.auth.variant {
            AuthVariant::TwoStep => Some(BitString::new()),
            AuthVariant::Salted(s) => Some(s.clone()),
            AuthVariant::NonceAlice => Some(self.orig.get(&(from, tagged))?.nonce.clone().unwrap_or_default()),
            AuthVariant::NonceBob => Some(self.sender_nonce.get(&(from, tagged))?.clone().unwrap_or_default()),
            _ => None,
        }
    }

    /// Public bits the receiver will hash ahead of the covered frames of `tagged`.
    fn receiver_ctx(&self, to: Role, tagged: u8) -> Option<BitString> {
        match &self.cfg.auth.variant {
            AuthVariant::NonceAlice => Some(self.orig.get(&(to.peer(), tagged))?.nonce.clone().unwrap_or_default()),
            AuthVariant::NonceBob => Some(self.last_sent_nonce[idx(to)].clone().unwrap_or_default()),
            _ => self.sender_ctx(to.peer(), tagged),
        }
    }

    /// `want` for `to`, mutated within `atoms` so the peer's tag on `tagged` still verifies.
    /// `planned` holds covered frames the receiver has not been given yet.
    fn forge(
        &mut self,
        to: Role,
        tagged: u8,
        mut want: WireMessage,
        atoms: Vec<Vec<usize>>,
        planned: &BTreeMap<u8, Vec<u8>>,
    ) -> (WireMessage, Mark, Vec<usize>) {
        let from = to.peer();
        if let Some(o) = self.orig.get(&(from, want.msg_type)) {
            want.nonce = o.nonce.clone();
            if want.msg_type == tagged {
                want.tag = o.tag.clone();
            }
        }
        let covers = self.covers(tagged);
        if covers.is_empty() {
            return (want, Mark::Plain, Vec::new());
        }
        let blind = (want.clone(), Mark::Blind { tested: 0 }, Vec::new());
        let (Some(sctx), Some(rctx)) = (self.sender_ctx(from, tagged), self.receiver_ctx(to, tagged)) else {
            return blind;
        };
        let mut signed = sctx;
        for c in &covers {
            match self.orig.get(&(from, *c)) {
                Some(m) => signed.extend(&m.frame_bits()),
                None => return blind,
            }
        }
        let spec = self.cfg.auth.public_hash;
        let target = spec.digest_value(&signed);
        let Some(pos) = covers.iter().position(|&c| c == want.msg_type) else {
            return blind;
        };
        let seen = |c: u8| -> Option<BitString> {
            planned
                .get(&c)
                .map(|f| to_bits(f))
                .or_else(|| self.dlv.get(&(to, c)).map(|m| m.frame_bits()))
        };
        let mut prefix = rctx;
        let mut suffix = BitString::new();
        for (i, &c) in covers.iter().enumerate() {
            if i == pos {
                continue;
            }
            let Some(f) = seen(c) else { return blind };
            if i < pos {
                prefix.extend(&f);
            } else {
                suffix.extend(&f);
            }
        }
        let space = MutationSpace {
            base: want.clone(),
            prefix,
            suffix,
            atoms,
            w_max: self.atk.w_max,
        };
        let r = find_colliding_message(&space, target, &spec);
        if r.found {
            let mark = Mark::Forged {
                weight: r.weight_used,
                tested: r.candidates_tested,
            };
            (r.message, mark, r.atoms_used)
        } else {
            (want, Mark::Blind { tested: r.candidates_tested }, Vec::new())
        }
    }

    /// Delivers `want` in place of the peer's message of the same type.
    fn substitute(&mut self, to: &mut Party, want: WireMessage, atoms: Vec<Vec<usize>>) -> (Vec<WireMessage>, Vec<usize>) {
        let (msg, mark, used) = self.forge(to.role(), want.msg_type, want, atoms, &BTreeMap::new());
        (self.deliver(to, msg, mark), used)
    }

    // ---- quantum stage ----

    /// Random states for Bob, a `vacuum` fraction of them empty. Empty slots still
    /// get a basis for Eve's own sifting messages.
    fn fake_states(n: usize, vacuum: f64, rng: &mut ChaCha8Rng) -> (RawKey, BasisString, QuantumFrame) {
        let mut raw = Vec::with_capacity(n);
        let mut bases = Vec::with_capacity(n);
        let mut slots = Vec::with_capacity(n);
        for _ in 0..n {
            if vacuum > 0.0 && rng.gen::<f64>() < vacuum {
                raw.push(None);
                bases.push(Some(rng.gen()));
                slots.push(Slot::Lost);
            } else {
                let (bit, basis) = (rng.gen(), rng.gen());
                raw.push(Some(bit));
                bases.push(Some(basis));
                slots.push(Slot::Prepared { basis, bit });
            }
        }
        (raw, bases, QuantumFrame::from_slots(slots))
    }

    /// Eve's results on her side with Bob, her bases, and Alice's states if stored.
    fn quantum_stage(
        &mut self,
        alice: &mut Party,
        bob: &mut Party,
        qm: bool,
        vacuum: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<(RawKey, BasisString, Option<quantum::MemoryHandle>, WireMessage)> {
        let n = self.cfg.params.n_slots;
        let mut frame_a = alice.start();
        let (raw, bases, memory, to_bob) = if qm {
            let (raw, bases, f) = Self::fake_states(n, vacuum, rng);
            (raw, bases, Some(quantum::memory_store(frame_a)), f)
        } else {
            let bases = quantum::random_bases(n, rng);
            let (raw, f) = quantum::intercept_resend(&mut frame_a, &bases, rng).ok()?;
            let mut slots = f.slots().to_vec();
            if vacuum > 0.0 {
                for s in slots.iter_mut() {
                    if rng.gen::<f64>() < vacuum {
                        *s = Slot::Lost;
                    }
                }
            }
            (raw, bases, None, QuantumFrame::from_slots(slots))
        };
        let out = bob.receive_quantum(to_bob);
        let out = self.intercept(Role::Bob, out);
        Some((raw, bases, memory, pick(&out, MSG_S2)?))
    }

    // ---- sifting, Alice sends bases ----

    fn a_sends(&mut self, alice: &mut Party, bob: &mut Party, qm: bool, interleave: bool, rng: &mut ChaCha8Rng) -> Option<()> {
        let n = self.cfg.params.n_slots;
        let pid = self.pid();
        let delayed = self.cfg.variant.delayed_auth();
        // vacuum keeps Bob's key shorter than Alice's, so her pad covers his syndrome
        let vacuum = if interleave || self.cfg.variant.otp_syndrome() {
            self.atk.vacuum
        } else {
            0.0
        };
        let (raw_e, bases_e, memory, s2) = self.quantum_stage(alice, bob, qm, vacuum, rng)?;
        let out = self.forward(alice, s2);
        let s3 = pick(&out, MSG_S3)?;
        let bases_a: BasisString = s3.fields[0].iter().map(Some).collect();
        let raw_known = match memory {
            Some(mut m) => quantum::memory_measure(&mut m, &bases_a, rng).ok()?,
            None => raw_e.clone(),
        };

        // (Sd'') Eve's bases to Bob
        let want = WireMessage::new(pid, MSG_S3, vec![bases_to_bits(&bases_e)]);
        let atoms = if delayed { Vec::new() } else { single_bits(&want, 0, 0..n) };
        let out = self.substitute(bob, want, atoms).0;
        let s4 = pick(&out, MSG_S4)?;
        let sent = self.dlv[&(Role::Bob, MSG_S3)].fields[0].clone();
        let changed: BTreeSet<usize> = (0..n).filter(|&k| bases_e[k].is_some_and(|b| b != sent.get(k))).collect();
        let mask_b = s4.fields[0].clone();
        let k_eb = EveKey {
            bits: apply_mask(&raw_e, &mask_b).ok()?,
            unsure: sifted_indices(&mask_b, &changed),
        };

        // (Se'') Alice's mask
        let out = if interleave {
            match craft_bases_mask(&raw_known, &k_eb.bits, self.atk.k_budget) {
                Ok(c) => {
                    let want = WireMessage::new(pid, MSG_S4, vec![c.mask.clone()]);
                    let atoms = in_field(&want, 0, swap_atoms(&raw_known, &c.mask));
                    self.substitute(alice, want, atoms).0
                }
                Err(_) => self.forward(alice, s4),
            }
        } else if delayed {
            self.forward(alice, s4)
        } else {
            let mask = BitString::from_bools((0..n).map(|k| bases_e[k] == bases_a[k]));
            let want = WireMessage::new(pid, MSG_S4, vec![mask]);
            let atoms = single_bits(&want, 0, 0..n);
            self.substitute(alice, want, atoms).0
        };
        let p1 = pick(&out, MSG_P1)?;
        let mask_a = self.dlv[&(Role::Alice, MSG_S4)].fields[0].clone();
        let guessed: BTreeSet<usize> = if qm {
            BTreeSet::new()
        } else {
            (0..n).filter(|&k| mask_a.get(k) && bases_e[k] != bases_a[k]).collect()
        };
        let k_ea = EveKey {
            bits: apply_mask(&raw_known, &mask_a).ok()?,
            unsure: sifted_indices(&mask_a, &guessed),
        };
        self.post(alice, bob, p1, k_ea, k_eb, interleave, rng)
    }

    // ---- sifting, Bob sends bases ----

    fn b_sends(&mut self, alice: &mut Party, bob: &mut Party, qm: bool, rng: &mut ChaCha8Rng) -> Option<()> {
        let n = self.cfg.params.n_slots;
        let pid = self.pid();
        let delayed = self.cfg.variant.delayed_auth();
        let (raw_e, bases_e, memory, s2) = self.quantum_stage(alice, bob, qm, 0.0, rng)?;
        let (bb, det) = (s2.fields[0].clone(), s2.fields[1].clone());
        let bases_b: BasisString = (0..n).map(|k| det.get(k).then(|| bb.get(k))).collect();
        let mask_eb = BitString::from_bools((0..n).map(|k| bases_b[k].is_some() && bases_e[k] == bases_b[k]));

        // (Sd'') Bob's bases to Alice
        let (raw_known, out) = match memory {
            Some(mut m) => {
                let listen: BasisString = bases_b.iter().map(|b| Some(b.unwrap_or(false))).collect();
                let raw = quantum::memory_measure(&mut m, &listen, rng).ok()?;
                (raw, self.forward(alice, s2))
            }
            None if delayed => (raw_e.clone(), self.forward(alice, s2)),
            None => {
                let want = WireMessage::new(pid, MSG_S2, vec![bases_to_bits(&bases_e), BitString::ones(n)]);
                let atoms = single_bits(&want, 0, 0..n);
                (raw_e.clone(), self.substitute(alice, want, atoms).0)
            }
        };
        let s3 = pick(&out, MSG_S3)?;
        let p1 = pick(&out, MSG_P1)?;
        let mask_a = s3.fields[0].clone();
        let shown = self.dlv[&(Role::Alice, MSG_S2)].fields[0].clone();
        let guessed: BTreeSet<usize> = if qm {
            BTreeSet::new()
        } else {
            (0..n).filter(|&k| mask_a.get(k) && bases_e[k] != Some(shown.get(k))).collect()
        };
        let k_ea = EveKey {
            bits: apply_mask(&raw_known, &mask_a).ok()?,
            unsure: sifted_indices(&mask_a, &guessed),
        };

        // (Se'') the mask Bob sees
        let want = WireMessage::new(pid, MSG_S3, vec![mask_eb.clone()]);
        let atoms = if delayed {
            Vec::new()
        } else {
            single_bits(&want, 0, (0..n).filter(|&k| det.get(k)))
        };
        self.substitute(bob, want, atoms);
        if !bob.is_running() {
            return None;
        }
        let sent = self.dlv[&(Role::Bob, MSG_S3)].fields[0].clone();
        let turned_on: BTreeSet<usize> = (0..n).filter(|&k| sent.get(k) && !mask_eb.get(k)).collect();
        let k_eb = EveKey {
            bits: apply_mask(&raw_e, &sent).ok()?,
            unsure: sifted_indices(&sent, &turned_on),
        };
        self.post(alice, bob, p1, k_ea, k_eb, false, rng)
    }

    // ---- post-processing ----

    fn post(
        &mut self,
        alice: &mut Party,
        bob: &mut Party,
        p1: WireMessage,
        k_ea: EveKey,
        k_eb: EveKey,
        untouched: bool,
        rng: &mut ChaCha8Rng,
    ) -> Option<()> {
        self.report.sifted_ea = Some(k_ea.bits.clone());
        self.report.sifted_eb = Some(k_eb.bits.clone());
        if untouched {
            return self.post_untouched(alice, bob, p1, k_ea.bits, k_eb.bits);
        }
        let code = self.code();
        let ct = p1.fields[1].clone();

        // (Pb') Eve reconciles with Alice
        let (ka, pad) = if self.cfg.variant.otp_syndrome() {
            let mut guess = k_ea.bits.clone();
            for &i in &k_ea.unsure {
                guess.set(i, rng.gen());
            }
            self.report.guessed_bits = Some(k_ea.unsure.len());
            let mut pad = ct.xor(&ec_syndrome(code, &guess));
            let need = code.syndrome_bits(k_eb.bits.len());
            if pad.len() >= need {
                pad = pad.slice(0, need);
            } else {
                pad.extend(&BitString::random(need - pad.len(), rng));
            }
            (guess, Some(pad))
        } else {
            (ec_correct(code, &k_ea.bits, &ct).ok()?.0, None)
        };

        // (Pa') Eve's reconciliation message to Bob
        let mut kb = k_eb.bits.clone();
        let mut dirty: BTreeSet<usize> = k_eb.unsure.iter().copied().collect();
        let flips = ((self.atk.distort * kb.len() as f64).round() as usize).min(kb.len());
        for i in rand::seq::index::sample(rng, kb.len(), flips) {
            kb.flip(i);
            dirty.insert(i);
        }
        let co = ConfirmSpec::new(p1.fields[2].to_u64());
        let p1_for = |key: &BitString| {
            let mut syn = ec_syndrome(code, key);
            if let Some(p) = &pad {
                syn = syn.xor(p);
            }
            let fields = vec![
                p1.fields[0].clone(),
                syn,
                p1.fields[2].clone(),
                BitString::from_u64(confirm(&co, key), 32),
            ];
            WireMessage::new(p1.protocol_id, MSG_P1, fields)
        };
        let want = p1_for(&kb);
        let mut flip_at = Vec::new();
        let mut atoms = Vec::new();
        if self.rule(MSG_P1) != TagRule::None {
            let (syn_off, val_off) = (want.field_bit_offset(1), want.field_bit_offset(3));
            let bl = code.block_len;
            for b in 0..kb.len() / bl {
                let i = b * bl;
                if (i..i + bl).any(|j| dirty.contains(&j)) {
                    continue;
                }
                let mut unit = BitString::zeros(kb.len());
                unit.set(i, true);
                let syn = ec_syndrome(code, &unit);
                let delta = confirm_bit_delta(&co, i);
                let mut atom: Vec<usize> = (0..syn.len()).filter(|&s| syn.get(s)).map(|s| syn_off + s).collect();
                atom.extend((0..32).filter(|&j| delta >> (31 - j) & 1 == 1).map(|j| val_off + j));
                atoms.push(atom);
                flip_at.push(i);
            }
        }
        let (msg, mark, used) = self.forge(Role::Bob, MSG_P1, want, atoms, &BTreeMap::new());
        for a in used {
            kb.flip(flip_at[a]);
        }
        let out = self.deliver(bob, msg, mark);
        let p2 = pick(&out, MSG_P2)?;
        let eps = eps_of(&p2);
        let out = self.forward(alice, p2);

        // (Pc') privacy amplification
        if !self.cfg.variant.has_p3() {
            self.report.final_ea = self.derived_final(Role::Alice, &ka, eps);
            self.report.final_eb = self.derived_final(Role::Bob, &kb, eps);
            return Some(());
        }
        let p3 = pick(&out, MSG_P3)?;
        let pa_a = pa_of(&p3);
        let final_ea = pa_apply(&pa_a, &ka).ok();
        self.report.final_ea = final_ea.clone();
        self.report.final_eb = self.forge_pa(bob, &pa_a, &kb, final_ea, rng);
        Some(())
    }

    /// Forwards the post-processing unchanged; Eve only follows along.
    fn post_untouched(&mut self, alice: &mut Party, bob: &mut Party, p1: WireMessage, ka: BitString, kb: BitString) -> Option<()> {
        let (kb, _) = ec_correct(self.code(), &kb, &p1.fields[1]).ok()?;
        let out = self.forward(bob, p1);
        let p2 = pick(&out, MSG_P2)?;
        let eps = eps_of(&p2);
        let out = self.forward(alice, p2);
        if !self.cfg.variant.has_p3() {
            self.report.final_ea = self.derived_final(Role::Alice, &ka, eps);
            self.report.final_eb = self.derived_final(Role::Bob, &kb, eps);
            return Some(());
        }
        let p3 = pick(&out, MSG_P3)?;
        let pa = pa_of(&p3);
        self.forward(bob, p3);
        self.report.final_ea = pa_apply(&pa, &ka).ok();
        self.report.final_eb = pa_apply(&pa, &kb).ok();
        Some(())
    }

    /// Final key of `side` in the variants without (P3), from the frames that side saw.
    fn derived_final(&self, side: Role, key: &BitString, eps: f64) -> Option<BitString> {
        let frames = self.cfg.variant.sifting_messages().map(|t| {
            self.orig
                .get(&(side, t))
                .or_else(|| self.dlv.get(&(side, t)))
                .map(|m| m.frame_bytes())
                .unwrap_or_default()
        });
        let r = pa_output_len(key.len(), eps);
        pa_apply(&derived_pa(&self.cfg.auth, frames, key.len(), r), key).ok()
    }

    /// (Pc'): a PA seed for Bob that maps his key to `target` and keeps the tag valid.
    /// Returns Bob's final key as Eve knows it.
    fn forge_pa(
        &mut self,
        bob: &mut Party,
        pa_a: &PaSpec,
        kb: &BitString,
        target: Option<BitString>,
        rng: &mut ChaCha8Rng,
    ) -> Option<BitString> {
        let (r, nb) = (pa_a.r, kb.len());
        let mut seed = if nb == pa_a.n {
            pa_a.seed.clone()
        } else {
            BitString::random(nb + r.max(1) - 1, rng)
        };
        let mut null_atoms = Vec::new();
        let public = self.cfg.auth.variant.digest_is_public();
        if let (Some(t), Ok(solver)) = (&target, PaSolver::new(kb, r)) {
            if t.len() == r {
                seed = solver.solve(&seed, t);
                if public {
                    let free: Vec<usize> = solver.free_indices().collect();
                    null_atoms = free.iter().rev().take(PA_ATOMS).map(|&u| solver.null_vector(u)).collect();
                }
            }
        }
        let pid = self.pid();
        let want = WireMessage::new(
            pid,
            MSG_P3,
            vec![BitString::from_u64(r as u64, 32), BitString::from_u64(nb as u64, 32), seed.clone()],
        );
        let atoms = in_field(&want, 2, null_atoms);
        let (mut msg, mut mark, _) = self.forge(Role::Bob, MSG_P3, want.clone(), atoms, &BTreeMap::new());
        if matches!(mark, Mark::Blind { .. }) && public {
            let atoms = single_bits(&want, 2, 0..seed.len());
            (msg, mark, _) = self.forge(Role::Bob, MSG_P3, want, atoms, &BTreeMap::new());
        }
        let sent = pa_of(&msg);
        self.deliver(bob, msg, mark);
        pa_apply(&sent, kb).ok()
    }

    // ---- bidirectional attack on Protocol 2 ----

    fn bidirectional(&mut self, alice: &mut Party, bob: &mut Party, rng: &mut ChaCha8Rng) -> Option<()> {
        let pid = self.pid();
        let code = self.code();
        let mut memory = quantum::memory_store(alice.start());

        // Alice's leg first, up to her bases
        let mut s2e = WireMessage::new(pid, MSG_S2, vec![BitString::random(NONCE_BITS, rng)]);
        if self.cfg.auth.variant.uses_nonce() {
            s2e.nonce = Some(BitString::random(NONCE_BITS, rng));
        }
        let out = self.deliver(alice, s2e, Mark::Plain);
        let s3 = pick(&out, MSG_S3)?;
        let bases_a: BasisString = s3.fields[0].iter().map(Some).collect();
        let raw_a = quantum::memory_measure(&mut memory, &bases_a, rng).ok()?;

        // Bob's leg, harvesting his tag on (S2, S4, P2)
        let copy = quantum::prepare(&raw_a, &bases_a).ok()?;
        let out = bob.receive_quantum(copy);
        self.intercept(Role::Bob, out);
        let out = self.deliver(bob, s3, Mark::Plain);
        let s4 = pick(&out, MSG_S4)?;
        let mask_b = s4.fields[0].clone();
        let ke = apply_mask(&raw_a, &mask_b).ok()?;
        let co = ConfirmSpec::new(rng.gen());
        let mut p1e = WireMessage::new(
            pid,
            MSG_P1,
            vec![
                BitString::from_u64(code.index as u64, 8),
                ec_syndrome(code, &ke),
                BitString::from_u64(co.point, 32),
                BitString::from_u64(confirm(&co, &ke), 32),
            ],
        );
        if self.cfg.auth.variant.uses_nonce() {
            p1e.nonce = Some(BitString::random(NONCE_BITS, rng));
        }
        let out = self.deliver(bob, p1e, Mark::Plain);
        let p2 = pick(&out, MSG_P2)?;

        // back to Alice: a mask giving her the same key, colliding under Bob's tag
        let want = WireMessage::new(pid, MSG_S4, vec![mask_b.clone()]);
        let atoms = in_field(&want, 0, swap_atoms(&raw_a, &mask_b));
        let planned = BTreeMap::from([(MSG_P2, p2.frame_bytes())]);
        let (msg, mark, _) = self.forge(Role::Alice, MSG_P2, want, atoms, &planned);
        let out = self.deliver(alice, msg, mark);
        pick(&out, MSG_P1)?;
        let out = self.forward(alice, p2);
        let p3 = pick(&out, MSG_P3)?;
        let pa_a = pa_of(&p3);
        self.report.sifted_ea = alice.sifted().cloned();
        self.report.sifted_eb = Some(ke.clone());
        let final_ea = pa_apply(&pa_a, &ke).ok();
        self.report.final_ea = final_ea.clone();
        self.report.final_eb = self.forge_pa(bob, &pa_a, &ke, final_ea, rng);
        Some(())
    }

    // ---- straightforward man in the middle ----

    fn mitm(&mut self, alice: &mut Party, bob: &mut Party, rng: &mut ChaCha8Rng) {
        let size = self.cfg.params.ledger_bits.unwrap_or_else(|| self.cfg.ledger_need());
        let mut eve_b = Party::new(Role::Bob, self.cfg.clone(), BitString::random(size, rng), rng.gen()).without_verification();
        let mut eve_a =
            Party::new(Role::Alice, self.cfg.clone(), BitString::random(size, rng), rng.gen()).without_verification();
        self.leg(alice, &mut eve_b, Role::Alice);
        self.leg(&mut eve_a, bob, Role::Bob);
        self.report.final_ea = eve_b.final_key().cloned();
        self.report.final_eb = eve_a.final_key().cloned();
        self.report.sifted_ea = eve_b.sifted().cloned();
        self.report.sifted_eb = eve_a.sifted().cloned();
    }

    /// One complete session between a legitimate party and Eve's stand-in.
    fn leg(&mut self, a: &mut Party, b: &mut Party, real: Role) {
        let frame = a.start();
        let first = b.receive_quantum(frame);
        let first = if real == Role::Bob { self.intercept(Role::Bob, first) } else { first };
        let mut queue: VecDeque<(Role, WireMessage)> = first.into_iter().map(|m| (Role::Alice, m)).collect();
        while let Some((to, msg)) = queue.pop_front() {
            let party = if to == Role::Alice { &mut *a } else { &mut *b };
            let out = if to == real {
                self.deliver(party, msg, Mark::Plain)
            } else {
                party.receive(&msg)
            };
            queue.extend(out.into_iter().map(|m| (to.peer(), m)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::AuthScheme;
    use crate::protocol::SessionParams;
    use rand::SeedableRng;

    fn cfg(n: usize) -> SessionConfig {
        SessionConfig::new(
            Variant::P1,
            AuthScheme::two_step(12, 16),
            SessionParams {
                n_slots: n,
                ..Default::default()
            },
        )
    }

    #[test]
    fn names_round_trip() {
        for s in AttackStrategy::all() {
            assert_eq!(AttackStrategy::parse(&s.name()), Some(s));
        }
    }

    #[test]
    fn mitm_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = execute_attack(&Attack::new(AttackStrategy::StraightforwardMitm), &cfg(128), &mut rng);
        assert_eq!(out.relation, KeyRelation::Aborted);
        assert!(out.abort_by.unwrap().is_tag_failure());
    }

    #[test]
    fn interleave_shares_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = execute_attack(&Attack::new(AttackStrategy::P1InterleaveQm), &cfg(1024), &mut rng);
        assert_eq!(out.correlation_case, Some(1));
        assert_eq!(out.relation, KeyRelation::AllEqual);
    }
}
