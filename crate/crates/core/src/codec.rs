//! Fixed-width big-endian bit blocks for every symbol kind.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::alphabet::Alphabets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Action,
    Observation,
    Reward,
    Return,
}

impl SymbolKind {
    fn slot(self) -> usize {
        match self {
            SymbolKind::Action => 0,
            SymbolKind::Observation => 1,
            SymbolKind::Reward => 2,
            SymbolKind::Return => 3,
        }
    }
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymbolKind::Action => "action",
            SymbolKind::Observation => "observation",
            SymbolKind::Reward => "reward",
            SymbolKind::Return => "return",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("{kind} index {index} out of range (symbol count {count})")]
    IndexOutOfRange {
        kind: SymbolKind,
        index: usize,
        count: usize,
    },
    #[error("{kind} block must be {expected} bits wide, got {got}")]
    WidthMismatch {
        kind: SymbolKind,
        expected: u32,
        got: usize,
    },
    #[error("bit pattern {code} is not a valid {kind} code (symbol count {count})")]
    InvalidCode {
        kind: SymbolKind,
        code: u64,
        count: usize,
    },
    #[error("not a bit string: {0:?}")]
    Parse(String),
}

/// Number of bits needed to address `count` symbols.
pub fn bit_width(count: usize) -> u32 {
    if count <= 1 {
        0
    } else {
        usize::BITS - (count - 1).leading_zeros()
    }
}

/// Bits of `value`, most significant first, in a block of `width` bits.
pub fn bits_msb_first(value: u64, width: u32) -> impl Iterator<Item = u8> {
    (0..width).rev().map(move |i| ((value >> i) & 1) as u8)
}

/// An owned string of bits, most significant first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn from_value(value: u64, width: u32) -> Self {
        Self(bits_msb_first(value, width).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn value(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(CodecError::Parse(s.to_string())),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(BitString)
    }
}

/// Block widths and symbol counts for actions, observations, rewards and
/// discretized returns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitCodec {
    counts: [usize; 4],
    widths: [u32; 4],
}

impl BitCodec {
    pub fn new(alphabets: &Alphabets, return_levels: usize) -> Self {
        Self::from_counts(
            alphabets.action_count(),
            alphabets.observation_count(),
            alphabets.reward_count(),
            return_levels,
        )
    }

    pub fn from_counts(actions: usize, observations: usize, rewards: usize, returns: usize) -> Self {
        let counts = [actions, observations, rewards, returns];
        Self {
            counts,
            widths: counts.map(bit_width),
        }
    }

    pub fn width(&self, kind: SymbolKind) -> u32 {
        self.widths[kind.slot()]
    }

    pub fn count(&self, kind: SymbolKind) -> usize {
        self.counts[kind.slot()]
    }

    /// Width of an observation block followed by a reward block.
    pub fn percept_width(&self) -> u32 {
        self.width(SymbolKind::Observation) + self.width(SymbolKind::Reward)
    }

    pub fn encode(&self, kind: SymbolKind, index: usize) -> Result<BitString, CodecError> {
        let count = self.count(kind);
        if index >= count {
            return Err(CodecError::IndexOutOfRange { kind, index, count });
        }
        Ok(BitString::from_value(index as u64, self.width(kind)))
    }

    pub fn decode(&self, kind: SymbolKind, bits: &BitString) -> Result<usize, CodecError> {
        let expected = self.width(kind);
        if bits.len() != expected as usize {
            return Err(CodecError::WidthMismatch {
                kind,
                expected,
                got: bits.len(),
            });
        }
        let code = bits.value();
        let count = self.count(kind);
        if code >= count as u64 {
            return Err(CodecError::InvalidCode { kind, code, count });
        }
        Ok(code as usize)
    }
}

/// Free-function form of [`BitCodec::encode`].
pub fn encode_symbol(kind: SymbolKind, index: usize, codec: &BitCodec) -> Result<BitString, CodecError> {
    codec.encode(kind, index)
}

/// Free-function form of [`BitCodec::decode`].
pub fn decode_symbol(kind: SymbolKind, bits: &BitString, codec: &BitCodec) -> Result<usize, CodecError> {
    codec.decode(kind, bits)
}
