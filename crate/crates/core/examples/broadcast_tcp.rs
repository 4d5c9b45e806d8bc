//! The server broadcasts framed sequences over TCP to three subscribers,
//! each of which reassembles the identical transcript.

use std::thread;

use upad::protocol::{self, KeyUse};
use upad::transport::{self, Broadcast, TcpBroadcaster, TcpSubscriber};
use upad::{bits, seeded_rng};

fn main() -> upad::Result<()> {
    let mut rng = seeded_rng(6);
    let shared = bits::random_balanced_bits(16, &mut rng)?;
    let run = protocol::run_system_one(&shared, 100, KeyUse::Keep, &mut rng)?;

    let mut server = TcpBroadcaster::bind("127.0.0.1:0")?;
    let addr = server.local_addr()?;
    println!("listening on {addr}");
    let clients: Vec<_> = (0..3)
        .map(|_| {
            thread::spawn(move || -> upad::Result<_> {
                let mut sub = TcpSubscriber::connect(addr)?;
                transport::collect_transcript(&mut sub)
            })
        })
        .collect();
    server.accept_subscribers(3)?;
    transport::broadcast_transcript(&mut server, &run.transcript)?;
    server.close()?;

    let first = transport::encode_frame(&run.transcript.records()[0])?;
    println!("first frame: {first:02X?}");
    for (i, c) in clients.into_iter().enumerate() {
        let received = c.join().expect("subscriber thread")?;
        println!("subscriber {i}: {} frames, identical: {}", received.len(), received == run.transcript);
    }
    Ok(())
}
