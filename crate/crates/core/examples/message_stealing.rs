//! Keys that only ever encrypt are still exposed once Eve learns the
//! plaintexts: ciphertext XOR message gives the key back, and the
//! correlation attack proceeds as if the keys had leaked.

use upad::adversary::{self, EveView, StolenMessage};
use upad::bits;
use upad::protocol::{self, KeyUse, RecordKind};
use upad::seeded_rng;

fn main() -> upad::Result<()> {
    let mut rng = seeded_rng(4);
    let shared = bits::random_balanced_bits(6, &mut rng)?;
    let run = protocol::run_system_one(&shared, 14, KeyUse::Encrypt, &mut rng)?;
    let view = EveView::from_transcript(&run.transcript, RecordKind::Seq)?;

    let stolen: Vec<StolenMessage> = run
        .transcript
        .of_kind(RecordKind::Ciphertext)
        .zip(&run.messages)
        .map(|(c, m)| StolenMessage { step: c.step, ciphertext: c.payload.clone(), message: m.clone() })
        .collect();
    let result = adversary::message_steal_attack(&view, &stolen)?;
    let recovery = result.score(run.a.r_key());
    println!("stolen plaintexts: {}", stolen.len());
    println!("resolved: {:?}", result.resolved());
    println!("true K^r: {}", run.a.r_key());
    println!("recovered {}/{} positions", recovery.recovered_count(), recovery.recovered.len());
    Ok(())
}
