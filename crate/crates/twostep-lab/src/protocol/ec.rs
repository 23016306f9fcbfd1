//! Published systematic linear codes on 16-bit blocks with coset-leader decoding.

use std::sync::OnceLock;

use serde::Serialize;

use crate::bits::BitString;

pub const EC_CODES_TEXT: &str = include_str!("../../../../docs/ec_codes_v1.txt");

#[derive(Clone, Debug, Serialize)]
pub struct EcCode {
    pub index: usize,
    pub block_len: usize,
    pub syndrome_len: usize,
    pub radius: usize,
    /// Parity-check columns, one per block position.
    pub columns: Vec<u32>,
    #[serde(skip)]
    leaders: Vec<u16>,
}

struct CodeSet {
    codes: Vec<EcCode>,
    default: usize,
}

fn code_set() -> &'static CodeSet {
    static SET: OnceLock<CodeSet> = OnceLock::new();
    SET.get_or_init(|| {
        let mut codes = Vec::new();
        let mut default = 0;
        for line in EC_CODES_TEXT.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.first() {
                Some(&"code") => {
                    let num = |i: usize| parts[i].parse::<usize>().expect("bad code line");
                    let columns: Vec<u32> = parts[5..]
                        .iter()
                        .map(|c| u32::from_str_radix(c, 16).expect("bad column"))
                        .collect();
                    let mut code = EcCode {
                        index: num(1),
                        block_len: num(2),
                        syndrome_len: num(3),
                        radius: num(4),
                        columns,
                        leaders: Vec::new(),
                    };
                    assert_eq!(code.columns.len(), code.block_len);
                    code.leaders = leader_table(&code);
                    codes.push(code);
                }
                Some(&"default") => default = parts[1].parse().expect("bad default line"),
                _ => {}
            }
        }
        CodeSet { codes, default }
    })
}

pub fn ec_codes() -> &'static [EcCode] {
    &code_set().codes
}

pub fn default_code_index() -> usize {
    code_set().default
}

pub fn ec_code(index: usize) -> Option<&'static EcCode> {
    ec_codes().get(index)
}

/// Minimum-weight error pattern per syndrome; ties go to the smaller pattern.
fn leader_table(code: &EcCode) -> Vec<u16> {
    let mut patterns: Vec<u32> = (0..1u32 << code.block_len).collect();
    patterns.sort_by_key(|p| (p.count_ones(), *p));
    let mut table = vec![u16::MAX; 1 << code.syndrome_len];
    let mut filled = vec![false; table.len()];
    for p in patterns {
        let s = code.block_syndrome(p as u16) as usize;
        if !filled[s] {
            filled[s] = true;
            table[s] = p as u16;
        }
    }
    table
}

impl EcCode {
    /// Block bit j (MSB-first position in the key) is bit 15 - j of `block`.
    pub fn block_syndrome(&self, block: u16) -> u32 {
        let mut s = 0;
        for (j, &c) in self.columns.iter().enumerate() {
            if block >> (self.block_len - 1 - j) & 1 == 1 {
                s ^= c;
            }
        }
        s
    }

    pub fn coset_leader(&self, syndrome: u32) -> u16 {
        self.leaders[syndrome as usize]
    }

    pub fn blocks(&self, key_len: usize) -> usize {
        key_len.div_ceil(self.block_len)
    }

    pub fn syndrome_bits(&self, key_len: usize) -> usize {
        self.blocks(key_len) * self.syndrome_len
    }

    fn block(&self, key: &BitString, b: usize) -> u16 {
        let mut v = 0u16;
        for j in 0..self.block_len {
            let i = b * self.block_len + j;
            v = (v << 1) | (i < key.len() && key.get(i)) as u16;
        }
        v
    }
}

pub fn ec_syndrome(code: &EcCode, key: &BitString) -> BitString {
    let mut out = BitString::new();
    for b in 0..code.blocks(key.len()) {
        let s = code.block_syndrome(code.block(key, b));
        out.extend(&BitString::from_u64(s as u64, code.syndrome_len));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syndrome has {got} bits, expected {expected}")]
pub struct SyndromeLength {
    pub expected: usize,
    pub got: usize,
}

/// Corrected key and the number of key bits the decoder flipped.
pub fn ec_correct(code: &EcCode, key: &BitString, syndrome: &BitString) -> Result<(BitString, usize), SyndromeLength> {
    let expected = code.syndrome_bits(key.len());
    if syndrome.len() != expected {
        return Err(SyndromeLength {
            expected,
            got: syndrome.len(),
        });
    }
    let mut out = key.clone();
    let mut flipped = 0;
    for b in 0..code.blocks(key.len()) {
        let s = syndrome.slice(b * code.syndrome_len, (b + 1) * code.syndrome_len).to_u64() as u32;
        let e = code.coset_leader(code.block_syndrome(code.block(key, b)) ^ s);
        for j in 0..code.block_len {
            let i = b * code.block_len + j;
            if e >> (code.block_len - 1 - j) & 1 == 1 && i < key.len() {
                out.flip(i);
                flipped += 1;
            }
        }
    }
    Ok((out, flipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_set_loads() {
        let codes = ec_codes();
        assert_eq!(codes.len(), 3);
        assert_eq!(default_code_index(), 2);
        assert_eq!(
            codes.iter().map(|c| (c.syndrome_len, c.radius)).collect::<Vec<_>>(),
            vec![(5, 1), (6, 1), (8, 2)]
        );
    }

    #[test]
    fn leaders_respect_radius() {
        for code in ec_codes() {
            for p in 0..=u16::MAX {
                if p.count_ones() as usize <= code.radius {
                    assert_eq!(code.coset_leader(code.block_syndrome(p)), p, "code {}", code.index);
                }
            }
        }
    }
}
