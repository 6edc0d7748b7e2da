use std::fmt;
use std::str::FromStr;

use crate::error::{MpfError, Result};

/// A point of `{0,1}^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryState {
    bits: Vec<u8>,
}

impl BinaryState {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(MpfError::InvalidArgument("binary state needs d >= 1".into()));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(MpfError::InvalidArgument(format!(
                "binary state entry {b} is not 0 or 1"
            )));
        }
        Ok(Self { bits })
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "binary state needs d >= 1");
        Self { bits: vec![0; d] }
    }

    /// Bit `i` of `index` becomes entry `i`.
    pub fn from_index(index: u64, d: usize) -> Self {
        assert!(d >= 1 && d <= 64);
        Self {
            bits: (0..d).map(|i| ((index >> i) & 1) as u8).collect(),
        }
    }

    pub fn to_index(&self) -> u64 {
        assert!(self.bits.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn flipped(&self, k: usize) -> Self {
        let mut bits = self.bits.clone();
        bits[k] ^= 1;
        Self { bits }
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| b ^ 1).collect(),
        }
    }

    pub fn set(&mut self, k: usize, value: u8) {
        debug_assert!(value <= 1);
        self.bits[k] = value;
    }

    /// Packs the bits into 64-bit words, used as a membership key.
    pub(crate) fn packed(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.bits.len().div_ceil(64)];
        for (i, &b) in self.bits.iter().enumerate() {
            words[i / 64] |= (b as u64) << (i % 64);
        }
        words
    }
}

impl AsRef<[u8]> for BinaryState {
    fn as_ref(&self) -> &[u8] {
        &self.bits
    }
}

impl fmt::Display for BinaryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for BinaryState {
    type Err = MpfError;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .bytes()
            .map(|c| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                other => Err(MpfError::InvalidArgument(format!(
                    "unexpected character {:?} in binary state",
                    other as char
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }
}
