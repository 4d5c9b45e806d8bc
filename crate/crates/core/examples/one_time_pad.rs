//! Encrypt messages with System-I keys under the usage ledger. A second use
//! of the same key is refused.

use upad::bits;
use upad::protocol::{self, SystemOneSession, UsageLedger};
use upad::{seeded_rng, Error};

fn main() -> upad::Result<()> {
    let mut rng = seeded_rng(1);
    let shared = bits::random_balanced_bits(8, &mut rng)?;
    let mut a = SystemOneSession::new(shared.clone());
    let mut b = SystemOneSession::new(shared);
    let (mut a_ledger, mut b_ledger) = (UsageLedger::new(), UsageLedger::new());

    for _ in 0..3 {
        let sequence = bits::random_bits(16, &mut rng);
        let (a_key, _) = a.step(&sequence)?;
        let (b_key, _) = b.step(&sequence)?;
        let message = bits::random_bits(8, &mut rng);
        let cipher = protocol::encrypt(&a_key, &message, &mut a_ledger)?;
        let plain = protocol::decrypt(&b_key, &cipher, &mut b_ledger)?;
        println!("{}: m={message} c={cipher} decrypted={plain}", a_key.id);

        match protocol::encrypt(&a_key, &message, &mut a_ledger) {
            Err(Error::OneTimeViolation(msg)) => println!("  reuse refused: {msg}"),
            other => panic!("reuse was not refused: {other:?}"),
        }
    }
    Ok(())
}
