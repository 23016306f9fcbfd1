//! Canonical wire framing. The frame bytes are the exact authentication input.
//!
//! Layout: protocol_id (1 byte), msg_type (1 byte), field count (u32 LE),
//! then per field its bit length (u32 LE) and the bits MSB-first, zero-padded
//! to a byte. Tag and nonce travel next to the frame, never inside it.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::hashing::Tag;

pub const MSG_S2: u8 = 0x02;
pub const MSG_S3: u8 = 0x03;
pub const MSG_S4: u8 = 0x04;
pub const MSG_P1: u8 = 0x11;
pub const MSG_P2: u8 = 0x12;
pub const MSG_P3: u8 = 0x13;

pub fn msg_name(msg_type: u8) -> &'static str {
    match msg_type {
        MSG_S2 => "S2",
        MSG_S3 => "S3",
        MSG_S4 => "S4",
        MSG_P1 => "P1",
        MSG_P2 => "P2",
        MSG_P3 => "P3",
        _ => "??",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMessage {
    pub protocol_id: u8,
    pub msg_type: u8,
    pub fields: Vec<BitString>,
    pub tag: Option<Tag>,
    /// Public nonce or challenge for the nonce rungs.
    pub nonce: Option<BitString>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after last field")]
    Trailing(usize),
}

impl WireMessage {
    pub fn new(protocol_id: u8, msg_type: u8, fields: Vec<BitString>) -> Self {
        Self {
            protocol_id,
            msg_type,
            fields,
            tag: None,
            nonce: None,
        }
    }

    pub fn frame_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.protocol_id, self.msg_type];
        out.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for f in &self.fields {
            out.extend_from_slice(&(f.len() as u32).to_le_bytes());
            out.extend_from_slice(&f.to_bytes());
        }
        out
    }

    pub fn frame_bits(&self) -> BitString {
        let bytes = self.frame_bytes();
        BitString::from_bytes(&bytes, bytes.len() * 8)
    }

    /// Bit offset of the first data bit of `field` within the frame.
    pub fn field_bit_offset(&self, field: usize) -> usize {
        let mut byte = 6;
        for f in &self.fields[..field] {
            byte += 4 + f.len().div_ceil(8);
        }
        (byte + 4) * 8
    }

    /// Parses a frame; tag and nonce are left empty.
    pub fn from_frame_bytes(bytes: &[u8]) -> Result<Self, FrameError> {
        let take = |at: usize, n: usize| bytes.get(at..at + n).ok_or(FrameError::Truncated(at));
        let head = take(0, 6)?;
        let count = u32::from_le_bytes(head[2..6].try_into().unwrap()) as usize;
        let mut at = 6;
        let mut fields = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = u32::from_le_bytes(take(at, 4)?.try_into().unwrap()) as usize;
            at += 4;
            let data = take(at, len.div_ceil(8))?;
            fields.push(BitString::from_bytes(data, len));
            at += len.div_ceil(8);
        }
        if at != bytes.len() {
            return Err(FrameError::Trailing(bytes.len() - at));
        }
        Ok(Self::new(head[0], head[1], fields))
    }

    pub fn name(&self) -> &'static str {
        msg_name(self.msg_type)
    }
}

/// Concatenation of frames, as used for delayed authentication.
pub fn concat_frames<'a, I: IntoIterator<Item = &'a [u8]>>(frames: I) -> BitString {
    let mut bytes = Vec::new();
    for f in frames {
        bytes.extend_from_slice(f);
    }
    BitString::from_bytes(&bytes, bytes.len() * 8)
}
