//! Protocols 1-3 and their variants as message-passing state machines.

pub mod confirm;
pub mod ec;
pub mod frame;
pub mod ledger;
pub mod pa;
pub mod session;
pub mod sift;

use serde::{Deserialize, Serialize};

pub use confirm::{confirm, ConfirmSpec};
pub use ec::{ec_correct, ec_syndrome, EcCode};
pub use frame::WireMessage;
pub use ledger::KeyLedger;
pub use pa::{pa_apply, PaSpec};
pub use session::{
    run_protocol, AbortKind, AbortReason, Adversary, EveReport, KeyRelation, Party, SessionConfig, SessionOutcome,
    SessionParams, Status, TraceEvent,
};
pub use sift::{apply_mask, sift_mask};

use frame::{MSG_P1, MSG_P2, MSG_P3, MSG_S2, MSG_S3, MSG_S4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::Alice => Role::Bob,
            Role::Bob => Role::Alice,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    P1,
    P2,
    P3,
    P1NoP3,
    P2NoP3,
    P3NoP3,
    P1OtpEc,
    /// Bob sends bases, authentication delayed to the last two messages.
    P3Delayed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TagRule {
    None,
    Own { slot: usize },
    /// Tag over the concatenated frames of `covers`, in that order.
    Delayed { slot: usize, covers: Vec<u8> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsgSpec {
    pub msg_type: u8,
    pub sender: Role,
    pub tag: TagRule,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::P1,
        Variant::P2,
        Variant::P3,
        Variant::P1NoP3,
        Variant::P2NoP3,
        Variant::P3NoP3,
        Variant::P1OtpEc,
        Variant::P3Delayed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::P1 => "1",
            Variant::P2 => "2",
            Variant::P3 => "3",
            Variant::P1NoP3 => "1-noP3",
            Variant::P2NoP3 => "2-noP3",
            Variant::P3NoP3 => "3-noP3",
            Variant::P1OtpEc => "1-otpEC",
            Variant::P3Delayed => "3-delayed",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }

    pub fn protocol_id(self) -> u8 {
        match self {
            Variant::P1 => 0x01,
            Variant::P2 => 0x02,
            Variant::P3 => 0x03,
            Variant::P1NoP3 => 0x11,
            Variant::P2NoP3 => 0x12,
            Variant::P3NoP3 => 0x13,
            Variant::P1OtpEc => 0x21,
            Variant::P3Delayed => 0x33,
        }
    }

    /// True when Alice sends her bases (Protocols 1 and 2), false when Bob does.
    pub fn alice_sends_bases(self) -> bool {
        !matches!(self, Variant::P3 | Variant::P3NoP3 | Variant::P3Delayed)
    }

    pub fn delayed_auth(self) -> bool {
        matches!(self, Variant::P2 | Variant::P2NoP3 | Variant::P3Delayed)
    }

    pub fn has_p3(self) -> bool {
        !matches!(self, Variant::P1NoP3 | Variant::P2NoP3 | Variant::P3NoP3)
    }

    pub fn otp_syndrome(self) -> bool {
        self == Variant::P1OtpEc
    }

    pub fn uses_nonce_s2(self) -> bool {
        matches!(self, Variant::P2 | Variant::P2NoP3)
    }

    /// The two sifting messages, in protocol order.
    pub fn sifting_messages(self) -> [u8; 2] {
        if self.alice_sends_bases() {
            [MSG_S3, MSG_S4]
        } else {
            [MSG_S2, MSG_S3]
        }
    }

    pub fn schedule(self) -> Vec<MsgSpec> {
        use Role::{Alice as A, Bob as B};
        let own = |slot| TagRule::Own { slot };
        let del = |slot, covers: &[u8]| TagRule::Delayed {
            slot,
            covers: covers.to_vec(),
        };
        let m = |msg_type, sender, tag| MsgSpec { msg_type, sender, tag };
        let mut s = match self {
            Variant::P1 | Variant::P1NoP3 | Variant::P1OtpEc => vec![
                m(MSG_S2, B, own(0)),
                m(MSG_S3, A, own(1)),
                m(MSG_S4, B, own(2)),
                m(MSG_P1, A, own(3)),
                m(MSG_P2, B, own(4)),
                m(MSG_P3, A, own(5)),
            ],
            Variant::P2 => vec![
                m(MSG_S2, B, TagRule::None),
                m(MSG_S3, A, TagRule::None),
                m(MSG_S4, B, TagRule::None),
                m(MSG_P1, A, TagRule::None),
                m(MSG_P2, B, del(0, &[MSG_S2, MSG_S4, MSG_P2])),
                m(MSG_P3, A, del(1, &[MSG_S3, MSG_P1, MSG_P3])),
            ],
            Variant::P2NoP3 => vec![
                m(MSG_S2, B, TagRule::None),
                m(MSG_S3, A, TagRule::None),
                m(MSG_S4, B, TagRule::None),
                m(MSG_P1, A, del(0, &[MSG_S3, MSG_P1])),
                m(MSG_P2, B, del(1, &[MSG_S2, MSG_S4, MSG_P2])),
            ],
            Variant::P3 | Variant::P3NoP3 => vec![
                m(MSG_S2, B, own(0)),
                m(MSG_S3, A, own(1)),
                m(MSG_P1, A, own(2)),
                m(MSG_P2, B, own(3)),
                m(MSG_P3, A, own(4)),
            ],
            Variant::P3Delayed => vec![
                m(MSG_S2, B, TagRule::None),
                m(MSG_S3, A, TagRule::None),
                m(MSG_P1, A, TagRule::None),
                m(MSG_P2, B, del(0, &[MSG_S2, MSG_P2])),
                m(MSG_P3, A, del(1, &[MSG_S3, MSG_P1, MSG_P3])),
            ],
        };
        if !self.has_p3() {
            s.retain(|x| x.msg_type != MSG_P3);
        }
        s
    }

    pub fn tag_count(self) -> usize {
        self.schedule().iter().filter(|s| s.tag != TagRule::None).count()
    }
}
