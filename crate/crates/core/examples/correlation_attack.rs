//! Eve watches a System-I session in which every r-key is published as
//! authentication data, then recovers K^r by column correlation.
//!
//! Usage: cargo run --example correlation_attack [n] [N]

use upad::adversary::{self, EveView};
use upad::bits;
use upad::protocol::{self, KeyUse, RecordKind};
use upad::seeded_rng;

fn main() -> upad::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u32>().expect("numeric argument"));
    let n = args.next().unwrap_or(7) as usize;
    let leaks = args.next().unwrap_or(12);

    let mut rng = seeded_rng(3);
    let shared = bits::random_balanced_bits(n, &mut rng)?;
    let run = protocol::run_system_one(&shared, leaks, KeyUse::Authenticate, &mut rng)?;
    let view = EveView::from_transcript(&run.transcript, RecordKind::Seq)?;
    let result = adversary::correlation_attack(&view)?;

    println!("true K^r = {}", run.a.r_key());
    for (j, c) in result.candidates().iter().enumerate() {
        println!("index {}: candidates {c:?}", j + 1);
    }
    print!("{}", result.report(Some(run.a.r_key())));
    Ok(())
}
