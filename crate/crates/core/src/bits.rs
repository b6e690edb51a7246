//! Fixed-width bit strings with the big-endian index mapping used for
//! messages, keys and ciphers.

use std::fmt;
use std::ops::BitXor;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Messages wider than this do not fit a `u64` index.
pub const MAX_INDEX_BITS: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn zeros(width: usize) -> Self {
        BitString(vec![false; width])
    }

    /// Big-endian encoding of `value` in `width` bits.
    pub fn from_index(value: u64, width: usize) -> Result<Self> {
        if width > MAX_INDEX_BITS || (width < MAX_INDEX_BITS && value >> width != 0) {
            return Err(Error::Input(format!(
                "index {value} does not fit in {width} bits"
            )));
        }
        Ok(BitString(
            (0..width).rev().map(|i| (value >> i) & 1 == 1).collect(),
        ))
    }

    pub fn to_index(&self) -> Result<u64> {
        if self.0.len() > MAX_INDEX_BITS {
            return Err(Error::Input(format!(
                "{} bits do not fit a u64 index",
                self.0.len()
            )));
        }
        Ok(self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64))
    }

    pub fn random<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Self {
        BitString((0..width).map(|_| rng.random::<bool>()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn prefix(&self, width: usize) -> Option<BitString> {
        self.0.get(..width).map(|b| BitString(b.to_vec()))
    }

    /// Splits into `[..at]` and `[at..]`.
    pub fn split_at(&self, at: usize) -> (BitString, BitString) {
        let (a, b) = self.0.split_at(at);
        (BitString(a.to_vec()), BitString(b.to_vec()))
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        BitString(bits)
    }

    /// Bitwise XOR of equal-width strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len() != other.len() {
            return Err(Error::Input(format!(
                "xor of {}-bit and {}-bit strings",
                self.len(),
                other.len()
            )));
        }
        Ok(BitString(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    pub fn flip(&mut self, pos: usize) {
        self.0[pos] = !self.0[pos];
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    /// Panics on width mismatch; use [`BitString::xor`] for a checked form.
    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs).expect("bit strings of equal width")
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
