//! One System-II step at a time, showing what each party holds and that the
//! attached and fresh keys are gone once the step completes.

use upad::bits;
use upad::protocol::{Role, SystemTwoSession};
use upad::seeded_rng;

fn main() -> upad::Result<()> {
    let mut rng = seeded_rng(2);
    let n = 6;
    let shared = bits::random_balanced_bits(n, &mut rng)?;
    let mut a = SystemTwoSession::new(Role::A, shared.clone());
    let mut b = SystemTwoSession::new(Role::B, shared);

    for _ in 0..3 {
        let seq = bits::random_bits(2 * n, &mut rng);
        let step = a.begin_step(&seq)?;
        b.begin_step(&seq)?;
        println!("step {step}: S = {seq}  k = {}", a.attached_key(step)?);

        let fresh = bits::random_balanced_bits(n, &mut rng)?;
        let cipher = a.encrypt_fresh(&fresh)?;
        b.decode_fresh(&cipher)?;
        println!("  X = {fresh}  c = {cipher}  B decoded {}", b.fresh_key(step)?);

        let star = bits::random_bits(2 * n, &mut rng);
        let final_a = a.finish_step(&star)?;
        let final_b = b.finish_step(&star)?;
        assert_eq!(final_a, final_b);
        println!("  S* = {star}  x^r = {}  x^p = {}", final_a.r.bits, final_a.p.bits);
        println!("  after step: attached key -> {}", a.attached_key(step).unwrap_err());
        println!("  A holds {:?}", a.held_material());
    }
    Ok(())
}
