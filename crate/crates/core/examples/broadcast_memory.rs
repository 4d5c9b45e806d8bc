//! A System-II transcript broadcast over an in-process channel to party B
//! and Eve. B replays it into the same final keys as A; Eve's copy is fed
//! to the correlation attack, which gets nowhere.

use upad::adversary::{self, EveView};
use upad::protocol::{self, RecordKind};
use upad::transport::{self, Broadcast, MemoryChannel};
use upad::{bits, seeded_rng};

fn main() -> upad::Result<()> {
    let mut rng = seeded_rng(5);
    let shared = bits::random_balanced_bits(7, &mut rng)?;
    let run = protocol::run_system_two(&shared, 40, true, &mut rng)?;

    let mut channel = MemoryChannel::new();
    let mut b = channel.subscribe();
    let mut eve = channel.subscribe();
    transport::broadcast_transcript(&mut channel, &run.transcript)?;
    channel.close()?;

    let b_session = protocol::replay_system_two(&shared, &transport::collect_transcript(&mut b)?)?;
    println!("frames: {}", run.transcript.len());
    println!("B agrees with A: {}", b_session.final_keys() == run.a.final_keys());

    let eve_copy = transport::collect_transcript(&mut eve)?;
    let view = EveView::from_transcript(&eve_copy, RecordKind::SeqStar)?;
    let step1 = adversary::correlation_attack(&view.for_step(1))?;
    println!("candidate set sizes at step 1: {:?}", step1.candidate_counts());
    Ok(())
}
