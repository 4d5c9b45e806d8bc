//! Line-oriented session transcripts: one `step,kind,payload` record per
//! line, payload in the ASCII bit format.

use std::fmt;
use std::str::FromStr;

use crate::bits::BitString;
use crate::error::{Error, Result};

/// What a public record carries. The numeric codes are shared with the
/// wire frame format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecordKind {
    /// Broadcast sequence `S_i`.
    Seq,
    /// Second broadcast `S_i*` of a System-II step.
    SeqStar,
    /// `c_i = k_i + X_i`, sent from A to B.
    CipherKey,
    /// A message encrypted under an extracted key.
    Ciphertext,
    /// An extracted or final key revealed after its use.
    LeakedKey,
}

impl RecordKind {
    pub const ALL: [RecordKind; 5] = [
        RecordKind::Seq,
        RecordKind::SeqStar,
        RecordKind::CipherKey,
        RecordKind::Ciphertext,
        RecordKind::LeakedKey,
    ];

    pub fn code(self) -> u8 {
        match self {
            RecordKind::Seq => 1,
            RecordKind::SeqStar => 2,
            RecordKind::CipherKey => 3,
            RecordKind::Ciphertext => 4,
            RecordKind::LeakedKey => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Seq => "SEQ",
            RecordKind::SeqStar => "SEQSTAR",
            RecordKind::CipherKey => "CIPHERKEY",
            RecordKind::Ciphertext => "CIPHERTEXT",
            RecordKind::LeakedKey => "LEAKED_KEY",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown record kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub step: u32,
    pub kind: RecordKind,
    pub payload: BitString,
}

impl Record {
    pub fn new(step: u32, kind: RecordKind, payload: BitString) -> Self {
        Self { step, kind, payload }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.step, self.kind, self.payload)
    }
}

impl FromStr for Record {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut fields = line.trim_end_matches(['\r', '\n']).split(',');
        let (Some(step), Some(kind), Some(payload), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::Parse(format!("expected step,kind,payload in {line:?}")));
        };
        let step = step
            .parse()
            .map_err(|e| Error::Parse(format!("bad step {step:?}: {e}")))?;
        Ok(Record { step, kind: kind.parse()?, payload: payload.parse()? })
    }
}

/// Everything that crossed the public channel, in order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<Record>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Record> {
        self.records.iter()
    }

    /// Records of one kind, in transcript order.
    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &Record> + '_ {
        self.records.iter().filter(move |r| r.kind == kind)
    }
}

impl FromIterator<Record> for Transcript {
    fn from_iter<I: IntoIterator<Item = Record>>(iter: I) -> Self {
        Self { records: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a Transcript {
    type Item = &'a Record;
    type IntoIter = std::slice::Iter<'a, Record>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for Transcript {
    type Err = Error;

    /// Blank lines are skipped.
    fn from_str(text: &str) -> Result<Self> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.parse::<Record>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_text() {
        let r: Record = "3,SEQSTAR,0110".parse().unwrap();
        assert_eq!(r, Record::new(3, RecordKind::SeqStar, "0110".parse().unwrap()));
        assert_eq!(r.to_string(), "3,SEQSTAR,0110");
        assert!("3,SEQ".parse::<Record>().is_err());
        assert!("x,SEQ,01".parse::<Record>().is_err());
        assert!("1,NOPE,01".parse::<Record>().is_err());
        assert!("1,SEQ,01,1".parse::<Record>().is_err());
    }

    #[test]
    fn transcript_round_trip() {
        let text = "1,SEQ,01011101010010\n1,LEAKED_KEY,1011100\n\n2,SEQ,11001110100001\n";
        let t: Transcript = text.parse().unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.to_string(), text.replace("\n\n", "\n"));
        assert_eq!(t.of_kind(RecordKind::Seq).count(), 2);
    }

    #[test]
    fn kind_codes() {
        for kind in RecordKind::ALL {
            assert_eq!(RecordKind::from_code(kind.code()), Some(kind));
            assert_eq!(kind.as_str().parse::<RecordKind>().unwrap(), kind);
        }
        assert_eq!(RecordKind::from_code(0), None);
        assert_eq!(RecordKind::from_code(6), None);
    }
}
