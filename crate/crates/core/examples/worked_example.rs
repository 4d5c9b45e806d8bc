//! System-I on the 14-bit worked example: derive the position keys, then
//! extract a key pair from each broadcast sequence.

use upad::bits;
use upad::protocol::SystemOneSession;
use upad::SharedKey;

fn main() -> upad::Result<()> {
    let key: SharedKey = "01110101000101".parse()?;
    let (r, p) = bits::derive_position_keys(&key);
    println!("K   = {key}");
    println!("K^r = {{{r}}}");
    println!("K^p = {{{p}}}");

    let sequences = ["01011101010010", "11001110100001", "10100101011010", "11001101101001"];
    let mut session = SystemOneSession::new(key);
    for s in sequences {
        let (kr, kp) = session.step(&s.parse()?)?;
        println!("S_{} = {s}  k^r = {}  k^p = {}", kr.id.step, kr.bits, kp.bits);
    }
    Ok(())
}
