use std::collections::HashSet;
use std::fmt;

use crate::bits::{self, BitString};
use crate::error::{Error, Result};

/// Which cryptosystem produced a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum System {
    One,
    Two,
}

/// The role a key plays inside a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyKind {
    /// Extracted with the r-key of the shared key.
    ExtractedR,
    /// Extracted with the p-key of the shared key.
    ExtractedP,
    /// r-part followed by p-part, used to carry a fresh key.
    Attached,
    /// Fresh key generated by party A and carried under the attached key.
    Fresh,
    FinalR,
    FinalP,
}

/// Identity of a key for one-time-use bookkeeping. Two keys with equal bits
/// but different origins are different keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KeyId {
    pub system: System,
    pub step: u32,
    pub kind: KeyKind,
}

impl KeyId {
    pub fn new(system: System, step: u32, kind: KeyKind) -> Self {
        Self { system, step, kind }
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let system = match self.system {
            System::One => "system-one",
            System::Two => "system-two",
        };
        let kind = match self.kind {
            KeyKind::ExtractedR => "k^r",
            KeyKind::ExtractedP => "k^p",
            KeyKind::Attached => "k",
            KeyKind::Fresh => "X",
            KeyKind::FinalR => "x^r",
            KeyKind::FinalP => "x^p",
        };
        write!(f, "{system} step {} key {kind}", self.step)
    }
}

/// A key together with its identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractedKey {
    pub id: KeyId,
    pub bits: BitString,
}

/// The three things a key may be spent on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Encryption,
    AuthenticationData,
    KeyGeneration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UsageRecord {
    pub id: KeyId,
    pub purpose: Purpose,
    pub step: u32,
}

/// Append-only record of key usage. A key identity may be spent once.
#[derive(Clone, Debug, Default)]
pub struct UsageLedger {
    records: Vec<UsageRecord>,
    spent: HashSet<KeyId>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, id: KeyId, purpose: Purpose) -> Result<()> {
        if !self.spent.insert(id) {
            return Err(Error::OneTimeViolation(id.to_string()));
        }
        self.records.push(UsageRecord { id, purpose, step: id.step });
        Ok(())
    }

    pub fn is_spent(&self, id: &KeyId) -> bool {
        self.spent.contains(id)
    }

    pub fn records(&self) -> &[UsageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// One-time-pad encryption with a ledger-checked key.
pub fn encrypt(key: &ExtractedKey, message: &BitString, ledger: &mut UsageLedger) -> Result<BitString> {
    let ciphertext = bits::xor(&key.bits, message)?;
    ledger.record(key.id, Purpose::Encryption)?;
    Ok(ciphertext)
}

/// Receiver side of [`encrypt`]; spends the key in the receiver's ledger.
pub fn decrypt(key: &ExtractedKey, ciphertext: &BitString, ledger: &mut UsageLedger) -> Result<BitString> {
    let message = bits::xor(&key.bits, ciphertext)?;
    ledger.record(key.id, Purpose::Encryption)?;
    Ok(message)
}

/// Spends a key as authentication data. The returned bits become public.
pub fn authenticate(key: &ExtractedKey, ledger: &mut UsageLedger) -> Result<BitString> {
    ledger.record(key.id, Purpose::AuthenticationData)?;
    Ok(key.bits.clone())
}
