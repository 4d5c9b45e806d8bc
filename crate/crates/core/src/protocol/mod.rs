//! Party state machines for both systems, the one-time-use ledger, and the
//! public transcript.

mod ledger;
mod simulate;
mod system_one;
mod system_two;
mod transcript;

pub use ledger::{
    authenticate, decrypt, encrypt, ExtractedKey, KeyId, KeyKind, Purpose, System, UsageLedger,
    UsageRecord,
};
pub use simulate::{
    replay_system_one, replay_system_two, run_system_one, run_system_two, KeyUse, SystemOneRun,
    SystemTwoRun,
};
pub use system_one::SystemOneSession;
pub use system_two::{FinalKeyPair, Material, Role, SystemTwoSession};
pub use transcript::{Record, RecordKind, Transcript};
