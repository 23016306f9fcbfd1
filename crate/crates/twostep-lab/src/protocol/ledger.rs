//! Pre-shared key pool with a monotone cursor. No bit is ever issued twice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("key ledger exhausted: {purpose} needs {wanted} bits, {left} left")]
pub struct LedgerExhausted {
    pub purpose: String,
    pub wanted: usize,
    pub left: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyLedger {
    pool: BitString,
    cursor: usize,
    consumed: BTreeMap<String, usize>,
}

impl KeyLedger {
    pub fn new(pool: BitString) -> Self {
        Self {
            pool,
            cursor: 0,
            consumed: BTreeMap::new(),
        }
    }

    pub fn draw(&mut self, bits: usize, purpose: &str) -> Result<BitString, LedgerExhausted> {
        let left = self.remaining();
        if bits > left {
            return Err(LedgerExhausted {
                purpose: purpose.to_string(),
                wanted: bits,
                left,
            });
        }
        let out = self.pool.slice(self.cursor, self.cursor + bits);
        self.cursor += bits;
        *self.consumed.entry(purpose.to_string()).or_default() += bits;
        Ok(out)
    }

    pub fn remaining(&self) -> usize {
        self.pool.len() - self.cursor
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }

    pub fn consumed_by(&self) -> &BTreeMap<String, usize> {
        &self.consumed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_disjoint_and_exhaust() {
        let pool = BitString::parse("110010").unwrap();
        let mut l = KeyLedger::new(pool);
        assert_eq!(l.draw(2, "a").unwrap().to_string(), "11");
        assert_eq!(l.draw(3, "b").unwrap().to_string(), "001");
        let err = l.draw(2, "a").unwrap_err();
        assert_eq!((err.wanted, err.left), (2, 1));
        assert_eq!(l.consumed(), 5);
        assert_eq!(l.consumed_by()["a"], 2);
    }
}
