//! The eavesdropper: what she observes, the correlation attack on reused
//! position keys, the message-stealing variant, and the closed-form
//! probabilities the attack is compared against.
//!
//! The attack works column by column. If the same position key extracted
//! `N` leaked keys from `N` sequences, the `j`-th leaked bits form a column
//! that must equal the column of the true source position across those
//! sequences. Every position whose column matches stays a candidate.

use std::fmt::Write as _;

use rand::Rng;

use crate::bits::{self, BitString, PositionKey};
use crate::error::{Error, Result};
use crate::protocol::{RecordKind, Transcript};

/// Everything Eve has seen, aligned by step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EveView {
    n: usize,
    sequences: Vec<(u32, BitString)>,
    ciphertexts: Vec<(u32, BitString)>,
    leaked_keys: Vec<(u32, BitString)>,
}

impl EveView {
    /// An empty view for keys of `n` bits extracted from `2n`-bit sequences.
    pub fn new(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    /// Builds a view from a transcript. Leaked keys are paired with the
    /// records of kind `source` (`SEQ` for System-I keys, `SEQSTAR` for
    /// System-II final keys). `n` is inferred from the first such record.
    pub fn from_transcript(transcript: &Transcript, source: RecordKind) -> Result<Self> {
        if !matches!(source, RecordKind::Seq | RecordKind::SeqStar) {
            return Err(Error::InvalidParameter(format!("{source} records are not sequences")));
        }
        let first = transcript
            .of_kind(source)
            .next()
            .ok_or_else(|| Error::InsufficientData(format!("transcript has no {source} records")))?;
        let mut view = Self::new(first.payload.len() / 2);
        for record in transcript {
            match record.kind {
                k if k == source => view.observe_sequence(record.step, record.payload.clone())?,
                RecordKind::Ciphertext => view.observe_ciphertext(record.step, record.payload.clone())?,
                RecordKind::LeakedKey => view.observe_leaked_key(record.step, record.payload.clone())?,
                _ => {}
            }
        }
        Ok(view)
    }

    pub fn observe_sequence(&mut self, step: u32, sequence: BitString) -> Result<()> {
        if sequence.len() != 2 * self.n {
            return Err(Error::DomainMismatch(format!(
                "sequence of step {step} has {} bits, expected {}",
                sequence.len(),
                2 * self.n
            )));
        }
        self.sequences.push((step, sequence));
        Ok(())
    }

    pub fn observe_ciphertext(&mut self, step: u32, ciphertext: BitString) -> Result<()> {
        self.ciphertexts.push((step, ciphertext));
        Ok(())
    }

    pub fn observe_leaked_key(&mut self, step: u32, key: BitString) -> Result<()> {
        if key.len() != self.n {
            return Err(Error::LengthMismatch { left: key.len(), right: self.n });
        }
        self.leaked_keys.push((step, key));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sequences(&self) -> &[(u32, BitString)] {
        &self.sequences
    }

    pub fn ciphertexts(&self) -> &[(u32, BitString)] {
        &self.ciphertexts
    }

    pub fn leaked_keys(&self) -> &[(u32, BitString)] {
        &self.leaked_keys
    }

    /// Number of leaked keys, `N`.
    pub fn leak_count(&self) -> usize {
        self.leaked_keys.len()
    }

    /// The same view with leaked keys replaced.
    pub fn with_leaked_keys(&self, keys: Vec<(u32, BitString)>) -> Result<Self> {
        let mut view = Self { leaked_keys: Vec::new(), ..self.clone() };
        for (step, key) in keys {
            view.observe_leaked_key(step, key)?;
        }
        Ok(view)
    }

    /// Only the records of one step.
    pub fn for_step(&self, step: u32) -> Self {
        let keep = |v: &[(u32, BitString)]| v.iter().filter(|(s, _)| *s == step).cloned().collect();
        Self {
            n: self.n,
            sequences: keep(&self.sequences),
            ciphertexts: keep(&self.ciphertexts),
            leaked_keys: keep(&self.leaked_keys),
        }
    }

    fn sequence_at(&self, step: u32) -> Option<&BitString> {
        self.sequences.iter().find(|(s, _)| *s == step).map(|(_, b)| b)
    }

    /// `(sequence, leaked key)` pairs, one per leaked key.
    fn observations(&self) -> Result<Vec<(&BitString, &BitString)>> {
        if self.leaked_keys.is_empty() {
            return Err(Error::InsufficientData("no leaked keys to correlate".into()));
        }
        self.leaked_keys
            .iter()
            .map(|(step, key)| {
                self.sequence_at(*step)
                    .map(|seq| (seq, key))
                    .ok_or_else(|| Error::InsufficientData(format!("no sequence observed for step {step}")))
            })
            .collect()
    }
}

/// Candidate source positions for every index of the targeted key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackResult {
    observations: usize,
    candidates: Vec<Vec<usize>>,
}

/// How an [`AttackResult`] scores against the true position key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recovery {
    pub recovered: Vec<bool>,
    pub full_recovery: bool,
}

impl Recovery {
    pub fn recovered_count(&self) -> usize {
        self.recovered.iter().filter(|&&r| r).count()
    }
}

impl AttackResult {
    pub fn observations(&self) -> usize {
        self.observations
    }

    /// 1-indexed candidate positions for key index `j` (0-based).
    pub fn candidates(&self) -> &[Vec<usize>] {
        &self.candidates
    }

    pub fn candidate_counts(&self) -> Vec<usize> {
        self.candidates.iter().map(Vec::len).collect()
    }

    /// The position of every index whose candidate set is a singleton.
    pub fn resolved(&self) -> Vec<Option<usize>> {
        self.candidates
            .iter()
            .map(|c| if c.len() == 1 { Some(c[0]) } else { None })
            .collect()
    }

    /// Strict scoring: an index is recovered when its candidate set is
    /// exactly the true position.
    pub fn score(&self, truth: &PositionKey) -> Recovery {
        let recovered: Vec<bool> = self
            .candidates
            .iter()
            .zip(truth.positions())
            .map(|(c, &t)| c.len() == 1 && c[0] == t)
            .collect();
        let full_recovery = recovered.len() == truth.len() && recovered.iter().all(|&r| r);
        Recovery { recovered, full_recovery }
    }

    /// Random-guess scoring: Eve picks one candidate uniformly per index.
    pub fn guess<R: Rng + ?Sized>(&self, truth: &PositionKey, rng: &mut R) -> Recovery {
        let recovered: Vec<bool> = self
            .candidates
            .iter()
            .zip(truth.positions())
            .map(|(c, &t)| !c.is_empty() && c[rng.random_range(0..c.len())] == t)
            .collect();
        let full_recovery = recovered.len() == truth.len() && recovered.iter().all(|&r| r);
        Recovery { recovered, full_recovery }
    }

    /// Line-oriented report. With `truth`, the recovered column is filled in.
    pub fn report(&self, truth: Option<&PositionKey>) -> String {
        let n = self.candidates.len();
        let big_n = self.observations;
        let recovery = truth.map(|t| self.score(t));
        let mut out = String::new();
        let _ = writeln!(out, "# correlation attack report");
        let _ = writeln!(out, "n={n}");
        let _ = writeln!(out, "observations={big_n}");
        let _ = writeln!(out, "index,candidates,recovered");
        for (j, c) in self.candidates.iter().enumerate() {
            let flag = match &recovery {
                Some(r) if r.recovered[j] => "yes",
                Some(_) => "no",
                None => "-",
            };
            let _ = writeln!(out, "{},{},{flag}", j + 1, c.len());
        }
        let resolved = self.resolved().iter().filter(|r| r.is_some()).count();
        let _ = writeln!(out, "resolved_positions={resolved}/{n}");
        match &recovery {
            Some(r) => {
                let _ = writeln!(out, "full_recovery={}", if r.full_recovery { "yes" } else { "no" });
                let rate = if n == 0 { 0.0 } else { r.recovered_count() as f64 / n as f64 };
                let _ = writeln!(out, "per_position_rate={rate:.6}");
            }
            None => {
                let _ = writeln!(out, "full_recovery=unknown");
            }
        }
        let _ = writeln!(
            out,
            "formula_success_rate={:.6}",
            attack_success_formula(n as u32, big_n as u32)
        );
        let _ = writeln!(out, "formula_guess_probability={:e}", guess_probability(n as u32));
        match balanced_key_count(n as u32) {
            Some(count) => {
                let _ = writeln!(out, "balanced_key_space={count}");
            }
            None => {
                let _ = writeln!(out, "balanced_key_space=overflow");
            }
        }
        let _ = writeln!(
            out,
            "note=guess probability 2^-n is the stated formula; a uniform guess over balanced keys succeeds with 1/C(2n,n)"
        );
        let _ = writeln!(
            out,
            "note=(1-2^-N)^n treats positions independently and ignores the 2n-1 competing columns"
        );
        out
    }
}

/// Keeps, for each key index `j`, every position whose column across the
/// observed sequences equals the column of `j`-th leaked bits.
pub fn correlation_attack(view: &EveView) -> Result<AttackResult> {
    let observations = view.observations()?;
    let n = view.n;
    let candidates = (0..n)
        .map(|j| {
            (1..=2 * n)
                .filter(|&i| {
                    observations
                        .iter()
                        .all(|(seq, key)| seq.as_slice()[i - 1] == key.as_slice()[j])
                })
                .collect()
        })
        .collect();
    Ok(AttackResult { observations: observations.len(), candidates })
}

/// A ciphertext and the plaintext Eve stole for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StolenMessage {
    pub step: u32,
    pub ciphertext: BitString,
    pub message: BitString,
}

/// Recovers each message key as `ciphertext + message`, then runs the
/// correlation attack with those keys in place of leaked ones.
pub fn message_steal_attack(view: &EveView, stolen: &[StolenMessage]) -> Result<AttackResult> {
    if stolen.is_empty() {
        return Err(Error::InsufficientData("no stolen messages".into()));
    }
    let keys = stolen
        .iter()
        .map(|s| Ok((s.step, bits::xor(&s.ciphertext, &s.message)?)))
        .collect::<Result<Vec<_>>>()?;
    correlation_attack(&view.with_leaked_keys(keys)?)
}

/// Stated probability of guessing an `n`-bit position key: `2^-n`.
pub fn guess_probability(n: u32) -> f64 {
    pow2_neg(n)
}

/// Stated success probability of the attack after `leaks` leaked keys:
/// `(1 - 2^-N)^n`.
pub fn attack_success_formula(n: u32, leaks: u32) -> f64 {
    let per_position = 1.0 - pow2_neg(leaks);
    per_position.powi(n as i32)
}

/// Probability that one wrong column matches all `leaks` leaked bits by
/// accident: `2^-N`.
pub fn accidental_match_probability(leaks: u32) -> f64 {
    pow2_neg(leaks)
}

/// Number of balanced `2n`-bit keys, `C(2n, n)`, when it fits in a `u128`.
pub fn balanced_key_count(n: u32) -> Option<u128> {
    let n = n as u128;
    // C(n+k, k) built incrementally stays integral at every step.
    (1..=n).try_fold(1u128, |acc, k| acc.checked_mul(n + k).map(|v| v / k))
}

fn pow2_neg(k: u32) -> f64 {
    if k > 1074 {
        0.0
    } else {
        (-(k as f64)).exp2()
    }
}
