use crate::bits::{self, BitString, PositionKey, SharedKey};
use crate::error::{Error, Result};
use crate::protocol::ledger::{ExtractedKey, KeyId, KeyKind, Purpose, System, UsageLedger};
use crate::protocol::transcript::{Record, RecordKind};

/// Which side of the exchange a session plays. A generates the fresh key
/// and sends it under the attached key; B decodes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    A,
    B,
}

/// The pair of final keys produced by one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalKeyPair {
    pub step: u32,
    pub r: ExtractedKey,
    pub p: ExtractedKey,
}

/// Kinds of key material a session can hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Material {
    SharedKey,
    FinalKeys(usize),
    AttachedKey(u32),
    FreshKey(u32),
}

// Scratch that only lives between the sub-steps of one step.
#[derive(Debug)]
struct Pending {
    step: u32,
    attached: BitString,
    fresh: Option<BitString>,
}

impl Pending {
    fn wipe(&mut self) {
        self.attached.wipe();
        if let Some(fresh) = self.fresh.as_mut() {
            fresh.wipe();
        }
    }
}

impl Drop for Pending {
    fn drop(&mut self) {
        self.wipe();
    }
}

/// One party's view of System-II.
///
/// Each step runs as `begin_step` (attach `k_i = k_i^r .. k_i^p` from `S_i`),
/// then `encrypt_fresh` on A or `decode_fresh` on B (`c_i = k_i + X_i`), then
/// `finish_step` (extract the final keys from `S_i*` with the position keys
/// of `X_i`). Finishing a step destroys `k_i` and `X_i`.
#[derive(Debug)]
pub struct SystemTwoSession {
    role: Role,
    shared: SharedKey,
    r_key: PositionKey,
    p_key: PositionKey,
    completed: u32,
    final_keys: Vec<FinalKeyPair>,
    pending: Option<Pending>,
    ledger: UsageLedger,
    aborted: bool,
}

impl SystemTwoSession {
    pub fn new(role: Role, shared: SharedKey) -> Self {
        let (r_key, p_key) = bits::derive_position_keys(&shared);
        Self {
            role,
            shared,
            r_key,
            p_key,
            completed: 0,
            final_keys: Vec::new(),
            pending: None,
            ledger: UsageLedger::new(),
            aborted: false,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn shared(&self) -> &SharedKey {
        &self.shared
    }

    pub fn half_len(&self) -> usize {
        self.shared.half_len()
    }

    pub fn completed_steps(&self) -> u32 {
        self.completed
    }

    pub fn final_keys(&self) -> &[FinalKeyPair] {
        &self.final_keys
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    /// The ledger final keys are spent against.
    pub fn ledger_mut(&mut self) -> &mut UsageLedger {
        &mut self.ledger
    }

    fn check_live(&self) -> Result<()> {
        if self.aborted {
            Err(Error::SessionAborted)
        } else {
            Ok(())
        }
    }

    fn check_role(&self, role: Role, what: &str) -> Result<()> {
        if self.role != role {
            return Err(Error::ProtocolOrder(format!("{what} is performed by party {role:?}")));
        }
        Ok(())
    }

    fn pending_mut(&mut self, what: &str) -> Result<&mut Pending> {
        self.pending
            .as_mut()
            .ok_or_else(|| Error::ProtocolOrder(format!("{what} requires a step in progress")))
    }

    fn abort(&mut self) {
        self.pending = None;
        self.aborted = true;
    }

    /// Extracts `k_i^r` and `k_i^p` from `S_i` and attaches them. Returns the
    /// step number.
    pub fn begin_step(&mut self, sequence: &BitString) -> Result<u32> {
        self.check_live()?;
        if let Some(p) = &self.pending {
            return Err(Error::ProtocolOrder(format!("step {} is still in progress", p.step)));
        }
        let k_r = bits::extract(&self.r_key, sequence)?;
        let k_p = bits::extract(&self.p_key, sequence)?;
        let step = self.completed + 1;
        self.pending = Some(Pending { step, attached: bits::concat(&k_r, &k_p), fresh: None });
        Ok(step)
    }

    /// Party A: encrypts the fresh key under the attached key, giving `c_i`.
    pub fn encrypt_fresh(&mut self, fresh: &SharedKey) -> Result<BitString> {
        self.check_live()?;
        self.check_role(Role::A, "encrypting the fresh key")?;
        let pending = self.pending_mut("encrypting the fresh key")?;
        if pending.fresh.is_some() {
            return Err(Error::ProtocolOrder(format!(
                "fresh key for step {} was already sent",
                pending.step
            )));
        }
        let step = pending.step;
        let cipher = bits::xor(&pending.attached, fresh.raw())?;
        self.ledger.record(KeyId::new(System::Two, step, KeyKind::Attached), Purpose::Encryption)?;
        self.ledger.record(KeyId::new(System::Two, step, KeyKind::Fresh), Purpose::KeyGeneration)?;
        if let Some(p) = self.pending.as_mut() {
            p.fresh = Some(fresh.raw().clone());
        }
        Ok(cipher)
    }

    /// Party B: recovers `X_i` from `c_i`. An unbalanced result means the
    /// cipher was tampered with or the shared keys differ; the session aborts.
    pub fn decode_fresh(&mut self, cipher_key: &BitString) -> Result<()> {
        self.check_live()?;
        self.check_role(Role::B, "decoding the fresh key")?;
        let pending = self.pending_mut("decoding the fresh key")?;
        if pending.fresh.is_some() {
            return Err(Error::ProtocolOrder(format!(
                "fresh key for step {} was already decoded",
                pending.step
            )));
        }
        let step = pending.step;
        let decoded = bits::xor(&pending.attached, cipher_key)?;
        if decoded.count_ones() * 2 != decoded.len() {
            self.abort();
            return Err(Error::ProtocolCorruption(format!(
                "decoded fresh key for step {step} is not balanced"
            )));
        }
        self.ledger.record(KeyId::new(System::Two, step, KeyKind::Attached), Purpose::Encryption)?;
        self.ledger.record(KeyId::new(System::Two, step, KeyKind::Fresh), Purpose::KeyGeneration)?;
        if let Some(p) = self.pending.as_mut() {
            p.fresh = Some(decoded);
        }
        Ok(())
    }

    /// Extracts `x_i^r` and `x_i^p` from `S_i*` with the position keys of
    /// `X_i`, then destroys `k_i` and `X_i`.
    pub fn finish_step(&mut self, star_sequence: &BitString) -> Result<FinalKeyPair> {
        self.check_live()?;
        let pending = self.pending_mut("extracting final keys")?;
        let step = pending.step;
        let fresh = pending
            .fresh
            .as_ref()
            .ok_or_else(|| Error::ProtocolOrder(format!("fresh key for step {step} not yet exchanged")))?;
        let fresh = SharedKey::new(fresh.clone())?;
        let (x_r_key, x_p_key) = fresh.position_keys();
        let x_r = bits::extract(&x_r_key, star_sequence)?;
        let x_p = bits::extract(&x_p_key, star_sequence)?;
        let mut fresh = fresh.into_raw();
        fresh.wipe();

        let pair = FinalKeyPair {
            step,
            r: ExtractedKey { id: KeyId::new(System::Two, step, KeyKind::FinalR), bits: x_r },
            p: ExtractedKey { id: KeyId::new(System::Two, step, KeyKind::FinalP), bits: x_p },
        };
        self.final_keys.push(pair.clone());
        self.completed = step;
        self.destroy(step)?;
        Ok(pair)
    }

    /// Full step for party A. Returns `c_i` and the final keys.
    pub fn step_a(
        &mut self,
        sequence: &BitString,
        fresh: &SharedKey,
        star_sequence: &BitString,
    ) -> Result<(BitString, FinalKeyPair)> {
        self.check_role(Role::A, "step_a")?;
        self.begin_step(sequence)?;
        let cipher = self.encrypt_fresh(fresh)?;
        let pair = self.finish_step(star_sequence)?;
        Ok((cipher, pair))
    }

    /// Full step for party B.
    pub fn step_b(
        &mut self,
        sequence: &BitString,
        cipher_key: &BitString,
        star_sequence: &BitString,
    ) -> Result<FinalKeyPair> {
        self.check_role(Role::B, "step_b")?;
        self.begin_step(sequence)?;
        self.decode_fresh(cipher_key)?;
        self.finish_step(star_sequence)
    }

    fn scratch(&self, step: u32, what: &str) -> Result<&Pending> {
        match &self.pending {
            Some(p) if p.step == step => Ok(p),
            _ if step >= 1 && step <= self.completed => {
                Err(Error::DestroyedMaterial(format!("{what} of step {step}")))
            }
            _ if self.aborted => Err(Error::SessionAborted),
            _ => Err(Error::ProtocolOrder(format!("step {step} has not started"))),
        }
    }

    /// The attached key `k_i`, readable only while step `i` is in progress.
    pub fn attached_key(&self, step: u32) -> Result<&BitString> {
        self.scratch(step, "attached key").map(|p| &p.attached)
    }

    /// The fresh key `X_i`, readable only between its exchange and the end
    /// of step `i`.
    pub fn fresh_key(&self, step: u32) -> Result<&BitString> {
        self.scratch(step, "fresh key")?
            .fresh
            .as_ref()
            .ok_or_else(|| Error::ProtocolOrder(format!("fresh key for step {step} not yet exchanged")))
    }

    /// Zeroes and drops the scratch of `step`. Idempotent for completed
    /// steps. Destroying a step that is still in progress abandons it and
    /// aborts the session, since the peer can no longer be kept in sync.
    pub fn destroy(&mut self, step: u32) -> Result<()> {
        match self.pending.as_mut() {
            Some(p) if p.step == step => {
                p.wipe();
                self.pending = None;
                if step > self.completed {
                    self.aborted = true;
                }
                Ok(())
            }
            _ if step >= 1 && step <= self.completed => Ok(()),
            _ => Err(Error::ProtocolOrder(format!("step {step} has not started"))),
        }
    }

    /// Inventory of the key material still reachable from this session.
    pub fn held_material(&self) -> Vec<Material> {
        let mut held = vec![Material::SharedKey];
        if !self.final_keys.is_empty() {
            held.push(Material::FinalKeys(self.final_keys.len()));
        }
        if let Some(p) = &self.pending {
            held.push(Material::AttachedKey(p.step));
            if p.fresh.is_some() {
                held.push(Material::FreshKey(p.step));
            }
        }
        held
    }

    /// Feeds one transcript record to party B. `SEQ` starts a step,
    /// `CIPHERKEY` carries `c_i` and `SEQSTAR` completes it.
    pub fn observe(&mut self, record: &Record) -> Result<Option<FinalKeyPair>> {
        let expected = self.completed + 1;
        let relevant = matches!(record.kind, RecordKind::Seq | RecordKind::CipherKey | RecordKind::SeqStar);
        if relevant && record.step != expected {
            return Err(Error::ProtocolOrder(format!(
                "expected records for step {expected}, got step {}",
                record.step
            )));
        }
        match record.kind {
            RecordKind::Seq => {
                self.begin_step(&record.payload)?;
                Ok(None)
            }
            RecordKind::CipherKey => {
                self.decode_fresh(&record.payload)?;
                Ok(None)
            }
            RecordKind::SeqStar => self.finish_step(&record.payload).map(Some),
            RecordKind::Ciphertext | RecordKind::LeakedKey => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn pair(role: Role) -> SystemTwoSession {
        SystemTwoSession::new(role, "0110".parse().unwrap())
    }

    // Straight-line rerun of the n=2 trace that uses only the bit primitives.
    fn straight_line_trace() -> (String, String, String, String) {
        let k = "0110";
        let s1 = "1010";
        let x = "1001";
        let s_star = "1100";
        let at = |s: &str, i: usize| s.as_bytes()[i - 1] as char;
        let ones = |s: &str| (1..=s.len()).filter(|&i| at(s, i) == '1').collect::<Vec<_>>();
        let zeros = |s: &str| (1..=s.len()).filter(|&i| at(s, i) == '0').collect::<Vec<_>>();
        let pick = |pos: &[usize], s: &str| pos.iter().map(|&i| at(s, i)).collect::<String>();
        let attached = pick(&ones(k), s1) + &pick(&zeros(k), s1);
        let cipher: String = attached
            .chars()
            .zip(x.chars())
            .map(|(a, b)| if a == b { '0' } else { '1' })
            .collect();
        (attached, cipher, pick(&ones(x), s_star), pick(&zeros(x), s_star))
    }

    #[test]
    fn n2_trace_party_a() {
        let (attached, cipher, x_r, x_p) = straight_line_trace();
        assert_eq!((attached.as_str(), cipher.as_str()), ("0110", "1111"));
        assert_eq!((x_r.as_str(), x_p.as_str()), ("10", "10"));

        let mut a = pair(Role::A);
        let step = a.begin_step(&bs("1010")).unwrap();
        assert_eq!(a.attached_key(step).unwrap(), &bs(&attached));
        let c = a.encrypt_fresh(&"1001".parse().unwrap()).unwrap();
        assert_eq!(c, bs(&cipher));
        let fin = a.finish_step(&bs("1100")).unwrap();
        assert_eq!(fin.r.bits, bs(&x_r));
        assert_eq!(fin.p.bits, bs(&x_p));
    }

    #[test]
    fn n2_trace_party_b_agrees() {
        let mut a = pair(Role::A);
        let mut b = pair(Role::B);
        let (c, fa) = a.step_a(&bs("1010"), &"1001".parse().unwrap(), &bs("1100")).unwrap();
        let fb = b.step_b(&bs("1010"), &c, &bs("1100")).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(fb.r.bits, bs("10"));
        assert_eq!(fb.p.bits, bs("10"));
    }

    #[test]
    fn fresh_equal_to_attached_gives_zero_cipher() {
        let mut a = pair(Role::A);
        a.begin_step(&bs("1010")).unwrap();
        let c = a.encrypt_fresh(&"0110".parse().unwrap()).unwrap();
        assert_eq!(c, BitString::zeros(4));
    }

    #[test]
    fn same_inputs_same_outputs() {
        let run = || {
            let mut a = pair(Role::A);
            a.step_a(&bs("1010"), &"1001".parse().unwrap(), &bs("1100")).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unbalanced_decode_aborts() {
        let mut b = pair(Role::B);
        b.begin_step(&bs("1010")).unwrap();
        // c = k_1 decodes to all zeros.
        let err = b.decode_fresh(&bs("0110")).unwrap_err();
        assert!(matches!(err, Error::ProtocolCorruption(_)));
        assert!(b.is_aborted());
        assert_eq!(b.held_material(), vec![Material::SharedKey]);
        assert!(matches!(b.begin_step(&bs("1010")), Err(Error::SessionAborted)));
    }

    #[test]
    fn unbalanced_fresh_key_is_rejected() {
        assert!(matches!("1110".parse::<SharedKey>(), Err(Error::InvalidKey(_))));
    }

    #[test]
    fn length_mismatch() {
        let mut a = pair(Role::A);
        assert!(matches!(a.begin_step(&bs("10101")), Err(Error::DomainMismatch(_))));
        a.begin_step(&bs("1010")).unwrap();
        assert!(matches!(
            a.encrypt_fresh(&"100110".parse().unwrap()),
            Err(Error::LengthMismatch { .. })
        ));
        a.encrypt_fresh(&"1001".parse().unwrap()).unwrap();
        assert!(matches!(a.finish_step(&bs("110")), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn destroyed_material_is_unreachable() {
        let mut a = pair(Role::A);
        a.step_a(&bs("1010"), &"1001".parse().unwrap(), &bs("1100")).unwrap();
        assert!(matches!(a.attached_key(1), Err(Error::DestroyedMaterial(_))));
        assert!(matches!(a.fresh_key(1), Err(Error::DestroyedMaterial(_))));
        a.destroy(1).unwrap();
        a.destroy(1).unwrap();
        assert!(matches!(a.attached_key(1), Err(Error::DestroyedMaterial(_))));
        assert!(matches!(a.destroy(2), Err(Error::ProtocolOrder(_))));
        assert_eq!(a.held_material(), vec![Material::SharedKey, Material::FinalKeys(1)]);
    }

    #[test]
    fn destroying_step_in_progress_aborts() {
        let mut a = pair(Role::A);
        a.begin_step(&bs("1010")).unwrap();
        a.encrypt_fresh(&"1001".parse().unwrap()).unwrap();
        assert_eq!(
            a.held_material(),
            vec![Material::SharedKey, Material::AttachedKey(1), Material::FreshKey(1)]
        );
        a.destroy(1).unwrap();
        assert!(a.is_aborted());
        assert_eq!(a.held_material(), vec![Material::SharedKey]);
    }

    #[test]
    fn sub_steps_enforce_order_and_role() {
        let mut a = pair(Role::A);
        assert!(matches!(a.encrypt_fresh(&"1001".parse().unwrap()), Err(Error::ProtocolOrder(_))));
        a.begin_step(&bs("1010")).unwrap();
        assert!(matches!(a.begin_step(&bs("1010")), Err(Error::ProtocolOrder(_))));
        assert!(matches!(a.finish_step(&bs("1100")), Err(Error::ProtocolOrder(_))));
        assert!(matches!(a.decode_fresh(&bs("1111")), Err(Error::ProtocolOrder(_))));
        a.encrypt_fresh(&"1001".parse().unwrap()).unwrap();
        assert!(matches!(a.encrypt_fresh(&"1001".parse().unwrap()), Err(Error::ProtocolOrder(_))));
    }

    #[test]
    fn final_keys_are_single_use() {
        let mut a = pair(Role::A);
        let (_, fin) = a.step_a(&bs("1010"), &"1001".parse().unwrap(), &bs("1100")).unwrap();
        let ledger = a.ledger_mut();
        crate::protocol::encrypt(&fin.r, &bs("11"), ledger).unwrap();
        assert!(matches!(
            crate::protocol::encrypt(&fin.r, &bs("01"), ledger),
            Err(Error::OneTimeViolation(_))
        ));
    }

    #[test]
    fn fresh_key_is_spent_on_key_generation_only() {
        let mut a = pair(Role::A);
        a.step_a(&bs("1010"), &"1001".parse().unwrap(), &bs("1100")).unwrap();
        let fresh_id = KeyId::new(System::Two, 1, KeyKind::Fresh);
        let record = a.ledger().records().iter().find(|r| r.id == fresh_id).unwrap();
        assert_eq!(record.purpose, Purpose::KeyGeneration);
        assert!(matches!(
            a.ledger_mut().record(fresh_id, Purpose::Encryption),
            Err(Error::OneTimeViolation(_))
        ));
    }
}
