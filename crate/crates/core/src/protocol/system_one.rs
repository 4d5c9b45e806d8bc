use crate::bits::{self, BitString, PositionKey, SharedKey};
use crate::error::{Error, Result};
use crate::protocol::ledger::{ExtractedKey, KeyId, KeyKind, System};
use crate::protocol::transcript::{Record, RecordKind};

/// One party's view of System-I: the same pair of position keys is applied
/// to every broadcast sequence.
#[derive(Clone, Debug)]
pub struct SystemOneSession {
    shared: SharedKey,
    r_key: PositionKey,
    p_key: PositionKey,
    r_set: Vec<ExtractedKey>,
    p_set: Vec<ExtractedKey>,
}

impl SystemOneSession {
    pub fn new(shared: SharedKey) -> Self {
        let (r_key, p_key) = bits::derive_position_keys(&shared);
        Self { shared, r_key, p_key, r_set: Vec::new(), p_set: Vec::new() }
    }

    pub fn shared(&self) -> &SharedKey {
        &self.shared
    }

    pub fn half_len(&self) -> usize {
        self.shared.half_len()
    }

    pub fn r_key(&self) -> &PositionKey {
        &self.r_key
    }

    pub fn p_key(&self) -> &PositionKey {
        &self.p_key
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u32 {
        self.r_set.len() as u32
    }

    pub fn r_set(&self) -> &[ExtractedKey] {
        &self.r_set
    }

    pub fn p_set(&self) -> &[ExtractedKey] {
        &self.p_set
    }

    /// Applies both position keys to the step's broadcast sequence.
    pub fn step(&mut self, sequence: &BitString) -> Result<(ExtractedKey, ExtractedKey)> {
        let k_r = bits::extract(&self.r_key, sequence)?;
        let k_p = bits::extract(&self.p_key, sequence)?;
        let step = self.steps() + 1;
        let k_r = ExtractedKey { id: KeyId::new(System::One, step, KeyKind::ExtractedR), bits: k_r };
        let k_p = ExtractedKey { id: KeyId::new(System::One, step, KeyKind::ExtractedP), bits: k_p };
        self.r_set.push(k_r.clone());
        self.p_set.push(k_p.clone());
        Ok((k_r, k_p))
    }

    /// Feeds one transcript record. Only `SEQ` records advance the session;
    /// they must arrive in step order.
    pub fn observe(&mut self, record: &Record) -> Result<Option<(ExtractedKey, ExtractedKey)>> {
        if record.kind != RecordKind::Seq {
            return Ok(None);
        }
        let expected = self.steps() + 1;
        if record.step != expected {
            return Err(Error::ProtocolOrder(format!(
                "expected sequence for step {expected}, got step {}",
                record.step
            )));
        }
        self.step(&record.payload).map(Some)
    }
}
