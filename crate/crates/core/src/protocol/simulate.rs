//! Seeded end-to-end runs of both systems: a server broadcasting uniform
//! sequences, parties A and B, and the public transcript Eve records.

use rand::Rng;

use crate::bits::{self, BitString, SharedKey};
use crate::error::{Error, Result};
use crate::protocol::ledger::{self, UsageLedger};
use crate::protocol::system_one::SystemOneSession;
use crate::protocol::system_two::{Role, SystemTwoSession};
use crate::protocol::transcript::{Record, RecordKind, Transcript};

/// What A does with each System-I r-key after extracting it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyUse {
    /// Nothing; the key stays private.
    Keep,
    /// Encrypt a random message and send the ciphertext to B.
    Encrypt,
    /// Use the key as authentication data, which publishes it.
    Authenticate,
}

#[derive(Debug)]
pub struct SystemOneRun {
    pub transcript: Transcript,
    pub a: SystemOneSession,
    pub b: SystemOneSession,
    pub a_ledger: UsageLedger,
    pub b_ledger: UsageLedger,
    /// Plaintexts A sent, one per step, when keys were used for encryption.
    pub messages: Vec<BitString>,
}

/// Runs `steps` steps of System-I. A and B must agree at every step.
pub fn run_system_one<R: Rng + ?Sized>(
    shared: &SharedKey,
    steps: u32,
    key_use: KeyUse,
    rng: &mut R,
) -> Result<SystemOneRun> {
    let n = shared.half_len();
    let mut run = SystemOneRun {
        transcript: Transcript::new(),
        a: SystemOneSession::new(shared.clone()),
        b: SystemOneSession::new(shared.clone()),
        a_ledger: UsageLedger::new(),
        b_ledger: UsageLedger::new(),
        messages: Vec::new(),
    };
    for step in 1..=steps {
        let sequence = bits::random_bits(2 * n, rng);
        run.transcript.push(Record::new(step, RecordKind::Seq, sequence.clone()));
        let (a_r, a_p) = run.a.step(&sequence)?;
        let (b_r, b_p) = run.b.step(&sequence)?;
        if a_r != b_r || a_p != b_p {
            return Err(Error::ProtocolCorruption(format!("parties disagree at step {step}")));
        }
        match key_use {
            KeyUse::Keep => {}
            KeyUse::Encrypt => {
                let message = bits::random_bits(n, rng);
                let ciphertext = ledger::encrypt(&a_r, &message, &mut run.a_ledger)?;
                run.transcript.push(Record::new(step, RecordKind::Ciphertext, ciphertext.clone()));
                let received = ledger::decrypt(&b_r, &ciphertext, &mut run.b_ledger)?;
                if received != message {
                    return Err(Error::ProtocolCorruption(format!("decryption failed at step {step}")));
                }
                run.messages.push(message);
            }
            KeyUse::Authenticate => {
                let public = ledger::authenticate(&a_r, &mut run.a_ledger)?;
                run.transcript.push(Record::new(step, RecordKind::LeakedKey, public));
            }
        }
    }
    Ok(run)
}

#[derive(Debug)]
pub struct SystemTwoRun {
    pub transcript: Transcript,
    pub a: SystemTwoSession,
    pub b: SystemTwoSession,
}

/// Runs `steps` steps of System-II with balanced fresh keys drawn from
/// `rng`. With `leak_final_r`, A spends each `x_i^r` as authentication data
/// and the transcript carries it as a leaked key.
pub fn run_system_two<R: Rng + ?Sized>(
    shared: &SharedKey,
    steps: u32,
    leak_final_r: bool,
    rng: &mut R,
) -> Result<SystemTwoRun> {
    let n = shared.half_len();
    let mut transcript = Transcript::new();
    let mut a = SystemTwoSession::new(Role::A, shared.clone());
    let mut b = SystemTwoSession::new(Role::B, shared.clone());
    for step in 1..=steps {
        let sequence = bits::random_bits(2 * n, rng);
        transcript.push(Record::new(step, RecordKind::Seq, sequence.clone()));
        a.begin_step(&sequence)?;
        b.begin_step(&sequence)?;

        let fresh = bits::random_balanced_bits(n, rng)?;
        let cipher_key = a.encrypt_fresh(&fresh)?;
        let mut fresh = fresh.into_raw();
        fresh.wipe();
        transcript.push(Record::new(step, RecordKind::CipherKey, cipher_key.clone()));
        b.decode_fresh(&cipher_key)?;
        if a.fresh_key(step)? != b.fresh_key(step)? {
            return Err(Error::ProtocolCorruption(format!("fresh key mismatch at step {step}")));
        }

        let star = bits::random_bits(2 * n, rng);
        transcript.push(Record::new(step, RecordKind::SeqStar, star.clone()));
        let final_a = a.finish_step(&star)?;
        let final_b = b.finish_step(&star)?;
        if final_a != final_b {
            return Err(Error::ProtocolCorruption(format!("final keys disagree at step {step}")));
        }
        if leak_final_r {
            let public = ledger::authenticate(&final_a.r, a.ledger_mut())?;
            transcript.push(Record::new(step, RecordKind::LeakedKey, public));
        }
    }
    Ok(SystemTwoRun { transcript, a, b })
}

/// Party B following a System-I transcript.
pub fn replay_system_one(shared: &SharedKey, transcript: &Transcript) -> Result<SystemOneSession> {
    let mut session = SystemOneSession::new(shared.clone());
    for record in transcript {
        session.observe(record)?;
    }
    Ok(session)
}

/// Party B following a System-II transcript.
pub fn replay_system_two(shared: &SharedKey, transcript: &Transcript) -> Result<SystemTwoSession> {
    let mut session = SystemTwoSession::new(Role::B, shared.clone());
    for record in transcript {
        session.observe(record)?;
    }
    Ok(session)
}
