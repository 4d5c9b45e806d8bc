//! Bit-level primitives: bitstrings, position keys, positional extraction,
//! concatenation and the XOR one-time pad.
//!
//! Positions are 1-indexed everywhere they cross the library boundary. Bits
//! are written leftmost first, so `"0111"` has a zero at position 1.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// An ordered, finite sequence of bits.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn ones(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    /// Builds a bitstring from numeric digits, rejecting anything other than 0 or 1.
    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        digits
            .iter()
            .map(|&d| match d {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Parse(format!("bit value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit at a 1-indexed position.
    pub fn get(&self, position: usize) -> Option<bool> {
        position.checked_sub(1).and_then(|i| self.bits.get(i).copied())
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn count_zeros(&self) -> usize {
        self.len() - self.count_ones()
    }

    /// Overwrites every bit with zero, keeping the length.
    pub fn wipe(&mut self) {
        self.bits.iter_mut().for_each(|b| *b = false);
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self::new(bits)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl FromStr for BitString {
    type Err = Error;

    /// Parses the ASCII `0`/`1` text format. A single trailing newline
    /// (`\n` or `\r\n`) is accepted.
    fn from_str(s: &str) -> Result<Self> {
        let line = s.strip_suffix('\n').unwrap_or(s);
        let line = line.strip_suffix('\r').unwrap_or(line);
        line.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!(
                    "unexpected character {other:?} at column {}",
                    i + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

/// A strictly ascending list of 1-indexed positions into a bitstring of
/// `domain_len` bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PositionKey {
    positions: Vec<usize>,
    domain_len: usize,
}

impl PositionKey {
    pub fn new(positions: Vec<usize>, domain_len: usize) -> Result<Self> {
        if let Some(&bad) = positions.iter().find(|&&p| p == 0 || p > domain_len) {
            return Err(Error::DomainMismatch(format!(
                "position {bad} is outside 1..={domain_len}"
            )));
        }
        if let Some(w) = positions.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidKey(format!(
                "positions must be strictly ascending, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { positions, domain_len })
    }

    /// Parses the comma-separated text format, e.g. `"2,3,4,6,8,12,14"`.
    /// The text does not carry the domain length, so the caller supplies it.
    pub fn parse(text: &str, domain_len: usize) -> Result<Self> {
        Self::new(parse_positions(text)?, domain_len)
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn domain_len(&self) -> usize {
        self.domain_len
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.positions.binary_search(&position).is_ok()
    }
}

impl fmt::Display for PositionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.positions.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Parses a comma-separated list of decimal positions without validating
/// it against a domain.
pub fn parse_positions(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|field| {
            let field = field.trim();
            field
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad position {field:?}: {e}")))
        })
        .collect()
}

/// A secretly shared balanced key: `2n` bits with exactly `n` ones.
#[derive(Clone, PartialEq, Eq)]
pub struct SharedKey {
    raw: BitString,
}

impl SharedKey {
    pub fn new(raw: BitString) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidKey("key is empty".into()));
        }
        if !raw.len().is_multiple_of(2) {
            return Err(Error::InvalidKey(format!("key length {} is odd", raw.len())));
        }
        let ones = raw.count_ones();
        if ones * 2 != raw.len() {
            return Err(Error::InvalidKey(format!(
                "key is unbalanced: {ones} ones in {} bits",
                raw.len()
            )));
        }
        Ok(Self { raw })
    }

    pub fn raw(&self) -> &BitString {
        &self.raw
    }

    pub fn into_raw(self) -> BitString {
        self.raw
    }

    /// Half-length `n`; the key itself is `2n` bits.
    pub fn half_len(&self) -> usize {
        self.raw.len() / 2
    }

    pub fn position_keys(&self) -> (PositionKey, PositionKey) {
        derive_position_keys(self)
    }
}

impl FromStr for SharedKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.parse()?)
    }
}

impl fmt::Display for SharedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.raw.fmt(f)
    }
}

impl fmt::Debug for SharedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SharedKey({})", self.raw)
    }
}

/// Splits a balanced key into the ascending positions of its ones (the
/// r-key) and of its zeros (the p-key).
pub fn derive_position_keys(key: &SharedKey) -> (PositionKey, PositionKey) {
    let domain_len = key.raw.len();
    let mut ones = Vec::with_capacity(key.half_len());
    let mut zeros = Vec::with_capacity(key.half_len());
    for (i, bit) in key.raw.iter().enumerate() {
        if bit {
            ones.push(i + 1);
        } else {
            zeros.push(i + 1);
        }
    }
    (
        PositionKey { positions: ones, domain_len },
        PositionKey { positions: zeros, domain_len },
    )
}

/// Reads `sequence` at every position of `positions`, in key order.
pub fn extract(positions: &PositionKey, sequence: &BitString) -> Result<BitString> {
    if positions.domain_len != sequence.len() {
        return Err(Error::DomainMismatch(format!(
            "position key indexes {} bits but sequence has {}",
            positions.domain_len,
            sequence.len()
        )));
    }
    Ok(positions
        .positions
        .iter()
        .map(|&p| sequence.bits[p - 1])
        .collect())
}

/// `a` followed by `b`.
pub fn concat(a: &BitString, b: &BitString) -> BitString {
    let mut bits = Vec::with_capacity(a.len() + b.len());
    bits.extend_from_slice(&a.bits);
    bits.extend_from_slice(&b.bits);
    BitString { bits }
}

/// Bitwise addition mod 2. Encrypts and decrypts.
pub fn xor(a: &BitString, b: &BitString) -> Result<BitString> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.bits.iter().zip(&b.bits).map(|(x, y)| x ^ y).collect())
}

/// `len` independent uniform bits.
pub fn random_bits<R: Rng + ?Sized>(len: usize, rng: &mut R) -> BitString {
    (0..len).map(|_| rng.random::<bool>()).collect()
}

/// A uniformly random arrangement of `n` ones and `n` zeros.
pub fn random_balanced_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SharedKey> {
    if n == 0 {
        return Err(Error::InvalidParameter("half-length must be at least 1".into()));
    }
    let mut bits = vec![true; n];
    bits.resize(2 * n, false);
    bits.shuffle(rng);
    Ok(SharedKey { raw: BitString { bits } })
}
