//! Framed broadcast of transcript records over an in-memory channel or TCP.
//!
//! Frame layout, all integers big-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "UPAD"
//! 4       1     version (1)
//! 5       1     kind (1=SEQ 2=SEQSTAR 3=CIPHERKEY 4=CIPHERTEXT 5=LEAKED_KEY)
//! 6       4     step
//! 10      4     bit_length
//! 14      ..    ceil(bit_length / 8) payload bytes, leftmost bit in the
//!               most significant position, zero padding in the last byte
//! ```

use std::io::{self, BufReader, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::protocol::{Record, RecordKind, Transcript};

pub const MAGIC: [u8; 4] = *b"UPAD";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;
/// Largest payload accepted on decode, in bits.
pub const MAX_FRAME_BITS: u32 = 1 << 24;

/// Packs bits MSB-first into bytes, zero-padding the last byte.
pub fn pack_bits(bits: &BitString) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, bit) in bits.iter().enumerate() {
        if bit {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], bit_len: usize) -> BitString {
    (0..bit_len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect()
}

/// Serializes one record as a frame. Empty payloads are not representable.
pub fn encode_frame(record: &Record) -> Result<Vec<u8>> {
    if record.payload.is_empty() {
        return Err(Error::MalformedFrame("payload must not be empty".into()));
    }
    let bit_len = u32::try_from(record.payload.len())
        .ok()
        .filter(|&l| l <= MAX_FRAME_BITS)
        .ok_or_else(|| Error::MalformedFrame(format!("payload of {} bits is too long", record.payload.len())))?;
    let payload = pack_bits(&record.payload);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(record.kind.code());
    out.extend_from_slice(&record.step.to_be_bytes());
    out.extend_from_slice(&bit_len.to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

struct Header {
    kind: RecordKind,
    step: u32,
    bit_len: u32,
}

impl Header {
    fn payload_len(&self) -> usize {
        (self.bit_len as usize).div_ceil(8)
    }
}

fn check_magic(bytes: &[u8]) -> Result<()> {
    let n = bytes.len().min(MAGIC.len());
    if bytes[..n] != MAGIC[..n] {
        return Err(Error::UnsupportedFrame(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..n]))));
    }
    Ok(())
}

fn parse_header(bytes: &[u8; HEADER_LEN]) -> Result<Header> {
    check_magic(bytes)?;
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedFrame(format!("version {}", bytes[4])));
    }
    let kind = RecordKind::from_code(bytes[5])
        .ok_or_else(|| Error::MalformedFrame(format!("unknown kind {}", bytes[5])))?;
    let step = u32::from_be_bytes(bytes[6..10].try_into().expect("4 bytes"));
    let bit_len = u32::from_be_bytes(bytes[10..14].try_into().expect("4 bytes"));
    if bit_len == 0 || bit_len > MAX_FRAME_BITS {
        return Err(Error::MalformedFrame(format!("bit length {bit_len}")));
    }
    Ok(Header { kind, step, bit_len })
}

fn parse_payload(header: &Header, payload: &[u8]) -> Result<Record> {
    let used = header.bit_len as usize % 8;
    if used != 0 {
        let last = payload[payload.len() - 1];
        if last & (0xFF >> used) != 0 {
            return Err(Error::MalformedFrame("nonzero padding bits".into()));
        }
    }
    Ok(Record::new(header.step, header.kind, unpack_bits(payload, header.bit_len as usize)))
}

/// Decodes the frame at the start of `bytes`, returning it and the number
/// of bytes it occupied.
pub fn decode_frame(bytes: &[u8]) -> Result<(Record, usize)> {
    check_magic(bytes)?;
    let header: &[u8; HEADER_LEN] = bytes
        .get(..HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or(Error::IncompleteFrame { needed: HEADER_LEN, have: bytes.len() })?;
    let header = parse_header(header)?;
    let total = HEADER_LEN + header.payload_len();
    let payload = bytes
        .get(HEADER_LEN..total)
        .ok_or(Error::IncompleteFrame { needed: total, have: bytes.len() })?;
    Ok((parse_payload(&header, payload)?, total))
}

// Fills `buf`, returning how many bytes arrived before EOF.
fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Reads one frame. Returns `None` on a clean end of stream between frames.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Record>> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(reader, &mut header)?;
    if got == 0 {
        return Ok(None);
    }
    check_magic(&header[..got])?;
    if got < HEADER_LEN {
        return Err(Error::IncompleteFrame { needed: HEADER_LEN, have: got });
    }
    let header = parse_header(&header)?;
    let mut payload = vec![0u8; header.payload_len()];
    let got = read_full(reader, &mut payload)?;
    if got < payload.len() {
        return Err(Error::IncompleteFrame { needed: HEADER_LEN + payload.len(), have: HEADER_LEN + got });
    }
    parse_payload(&header, &payload).map(Some)
}

pub fn write_frame<W: Write>(writer: &mut W, record: &Record) -> Result<()> {
    writer.write_all(&encode_frame(record)?)?;
    Ok(())
}

/// Sending side of a public channel: every subscriber gets every frame in
/// broadcast order.
pub trait Broadcast {
    fn broadcast(&mut self, record: &Record) -> Result<()>;

    fn subscriber_count(&self) -> usize;

    /// Signals end of stream to every subscriber.
    fn close(&mut self) -> Result<()>;
}

/// Receiving side of a public channel.
pub trait FrameSource {
    /// The next frame, or `None` once the broadcaster has closed.
    fn recv(&mut self) -> Result<Option<Record>>;
}

/// Broadcasts every record of a transcript, in order.
pub fn broadcast_transcript<B: Broadcast + ?Sized>(channel: &mut B, transcript: &Transcript) -> Result<()> {
    transcript.iter().try_for_each(|r| channel.broadcast(r))
}

/// Drains a source into a transcript.
pub fn collect_transcript<S: FrameSource + ?Sized>(source: &mut S) -> Result<Transcript> {
    let mut transcript = Transcript::new();
    while let Some(record) = source.recv()? {
        transcript.push(record);
    }
    Ok(transcript)
}

/// In-process channel. Frames travel as encoded bytes so both backends
/// exercise the same codec.
#[derive(Default)]
pub struct MemoryChannel {
    subscribers: Vec<mpsc::Sender<Vec<u8>>>,
}

pub struct MemorySubscriber {
    rx: mpsc::Receiver<Vec<u8>>,
}

impl MemoryChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self) -> MemorySubscriber {
        let (tx, rx) = mpsc::channel();
        self.subscribers.push(tx);
        MemorySubscriber { rx }
    }
}

impl Broadcast for MemoryChannel {
    fn broadcast(&mut self, record: &Record) -> Result<()> {
        let bytes = encode_frame(record)?;
        for (i, tx) in self.subscribers.iter().enumerate() {
            tx.send(bytes.clone())
                .map_err(|_| Error::Delivery(format!("subscriber {i} disconnected")))?;
        }
        Ok(())
    }

    fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }

    fn close(&mut self) -> Result<()> {
        self.subscribers.clear();
        Ok(())
    }
}

impl FrameSource for MemorySubscriber {
    fn recv(&mut self) -> Result<Option<Record>> {
        match self.rx.recv() {
            Ok(bytes) => decode_frame(&bytes).map(|(record, _)| Some(record)),
            Err(mpsc::RecvError) => Ok(None),
        }
    }
}

/// TCP broadcast server. Subscribers connect before broadcasting starts.
pub struct TcpBroadcaster {
    listener: TcpListener,
    clients: Vec<TcpStream>,
}

impl TcpBroadcaster {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        Ok(Self { listener: TcpListener::bind(addr)?, clients: Vec::new() })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Blocks until `count` more subscribers have connected.
    pub fn accept_subscribers(&mut self, count: usize) -> Result<()> {
        for _ in 0..count {
            let (stream, _) = self.listener.accept()?;
            stream.set_nodelay(true)?;
            self.clients.push(stream);
        }
        Ok(())
    }
}

impl Broadcast for TcpBroadcaster {
    fn broadcast(&mut self, record: &Record) -> Result<()> {
        let bytes = encode_frame(record)?;
        for (i, client) in self.clients.iter_mut().enumerate() {
            client
                .write_all(&bytes)
                .map_err(|e| Error::Delivery(format!("subscriber {i}: {e}")))?;
        }
        Ok(())
    }

    fn subscriber_count(&self) -> usize {
        self.clients.len()
    }

    fn close(&mut self) -> Result<()> {
        for client in self.clients.drain(..) {
            client.shutdown(std::net::Shutdown::Write)?;
        }
        Ok(())
    }
}

pub struct TcpSubscriber {
    reader: BufReader<TcpStream>,
}

impl TcpSubscriber {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        Ok(Self { reader: BufReader::new(TcpStream::connect(addr)?) })
    }
}

impl FrameSource for TcpSubscriber {
    fn recv(&mut self) -> Result<Option<Record>> {
        read_frame(&mut self.reader)
    }
}
