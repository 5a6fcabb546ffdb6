//! Length-prefixed binary framing over any byte stream.
//!
//! A frame is `[len: u32 BE][tag: u8][payload: len bytes]`. All integers are
//! big-endian and fixed width. Bit vectors are packed little-endian within
//! each byte: bit `t` of the vector lives in byte `t / 8` at position `t % 8`.
//! The byte-level layout of every frame is documented in `PROTOCOL.md`.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::TcpStream;

use thiserror::Error;

/// Largest payload a frame may carry.
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;

/// Bytes of framing per frame.
pub const FRAME_HEADER_LEN: usize = 5;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("frame payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte cap")]
    FrameTooLarge(usize),
    #[error("unknown frame type 0x{0:02x}")]
    UnknownFrameType(u8),
    #[error("connection closed")]
    ConnectionClosed,
    #[error("bit count {count} exceeds {available} available bits")]
    CountOutOfRange { count: usize, available: usize },
    #[error("malformed {frame:?} payload: {reason}")]
    Malformed { frame: FrameType, reason: String },
    #[error("expected {expected} frame, got {got:?}")]
    UnexpectedFrame { expected: &'static str, got: FrameType },
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            ErrorKind::UnexpectedEof
            | ErrorKind::ConnectionReset
            | ErrorKind::ConnectionAborted
            | ErrorKind::BrokenPipe => WireError::ConnectionClosed,
            _ => WireError::Io(e),
        }
    }
}

macro_rules! frame_types {
    ($($name:ident = $tag:literal),* $(,)?) => {
        /// Registered frame tags.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[repr(u8)]
        pub enum FrameType {
            $($name = $tag),*
        }

        impl FrameType {
            pub const ALL: &'static [FrameType] = &[$(FrameType::$name),*];
        }

        impl TryFrom<u8> for FrameType {
            type Error = WireError;

            fn try_from(tag: u8) -> Result<Self, WireError> {
                match tag {
                    $($tag => Ok(FrameType::$name),)*
                    other => Err(WireError::UnknownFrameType(other)),
                }
            }
        }
    };
}

frame_types! {
    Hello = 0x01,
    Accept = 0x02,
    Reject = 0x03,
    BaseOtSenderKey = 0x10,
    BaseOtReceiverKeys = 0x11,
    BaseOtCiphertexts = 0x12,
    EntryBegin = 0x20,
    StripeRequest = 0x21,
    ExtendCorrection = 0x22,
    ExtendMasked = 0x23,
    EntryAbort = 0x24,
    EntryDone = 0x25,
    SessionDone = 0x30,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub ty: FrameType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(ty: FrameType, payload: Vec<u8>) -> Self {
        Self { ty, payload }
    }

    pub fn expect(self, ty: FrameType, expected: &'static str) -> Result<Vec<u8>, WireError> {
        if self.ty == ty {
            Ok(self.payload)
        } else {
            Err(WireError::UnexpectedFrame {
                expected,
                got: self.ty,
            })
        }
    }
}

/// Writes one frame. Does not flush.
pub fn write_frame<W: Write>(out: &mut W, ty: FrameType, payload: &[u8]) -> Result<(), WireError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(WireError::FrameTooLarge(payload.len()));
    }
    let mut header = [0u8; FRAME_HEADER_LEN];
    header[..4].copy_from_slice(&(payload.len() as u32).to_be_bytes());
    header[4] = ty as u8;
    out.write_all(&header)?;
    out.write_all(payload)?;
    Ok(())
}

/// Reads one frame, blocking until it is complete.
pub fn read_frame<R: Read>(input: &mut R) -> Result<Frame, WireError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    input.read_exact(&mut header)?;
    let len = u32::from_be_bytes(header[..4].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::FrameTooLarge(len));
    }
    let ty = FrameType::try_from(header[4])?;
    let mut payload = vec![0u8; len];
    input.read_exact(&mut payload)?;
    Ok(Frame { ty, payload })
}

/// Packs bits eight per byte, least significant bit first.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (t, &b) in bits.iter().enumerate() {
        out[t / 8] |= u8::from(b) << (t % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], count: usize) -> Result<Vec<bool>, WireError> {
    if count > bytes.len() * 8 {
        return Err(WireError::CountOutOfRange {
            count,
            available: bytes.len() * 8,
        });
    }
    Ok((0..count).map(|t| (bytes[t / 8] >> (t % 8)) & 1 == 1).collect())
}

/// Traffic counters of one channel. Frame and payload byte counts are
/// maintained by the channel; `logical_bits_*` by the protocol layers that
/// know how many bits of each payload carry information.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub framed_out: u64,
    pub framed_in: u64,
    pub payload_out: u64,
    pub payload_in: u64,
    pub frames_out: u64,
    pub frames_in: u64,
    pub payload_out_by_type: BTreeMap<FrameType, u64>,
    pub payload_in_by_type: BTreeMap<FrameType, u64>,
    pub logical_bits_out: u64,
    pub logical_bits_in: u64,
}

impl ChannelStats {
    pub fn payload_out_of(&self, ty: FrameType) -> u64 {
        self.payload_out_by_type.get(&ty).copied().unwrap_or(0)
    }

    pub fn payload_in_of(&self, ty: FrameType) -> u64 {
        self.payload_in_by_type.get(&ty).copied().unwrap_or(0)
    }
}

/// A framed, buffered, byte-counting duplex channel.
pub struct CountingChannel<R: Read, W: Write> {
    reader: BufReader<R>,
    writer: BufWriter<W>,
    stats: ChannelStats,
}

impl CountingChannel<TcpStream, TcpStream> {
    pub fn tcp(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let read_half = stream.try_clone()?;
        Ok(Self::new(read_half, stream))
    }
}

impl<R: Read, W: Write> CountingChannel<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader: BufReader::with_capacity(1 << 16, reader),
            writer: BufWriter::with_capacity(1 << 16, writer),
            stats: ChannelStats::default(),
        }
    }

    pub fn send(&mut self, ty: FrameType, payload: &[u8]) -> Result<(), WireError> {
        write_frame(&mut self.writer, ty, payload)?;
        let n = payload.len() as u64;
        self.stats.framed_out += n + FRAME_HEADER_LEN as u64;
        self.stats.payload_out += n;
        self.stats.frames_out += 1;
        *self.stats.payload_out_by_type.entry(ty).or_default() += n;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Frame, WireError> {
        let frame = read_frame(&mut self.reader)?;
        let n = frame.payload.len() as u64;
        self.stats.framed_in += n + FRAME_HEADER_LEN as u64;
        self.stats.payload_in += n;
        self.stats.frames_in += 1;
        *self.stats.payload_in_by_type.entry(frame.ty).or_default() += n;
        Ok(frame)
    }

    /// Receives a frame of the given type, failing on anything else.
    pub fn recv_expect(&mut self, ty: FrameType, expected: &'static str) -> Result<Vec<u8>, WireError> {
        self.recv()?.expect(ty, expected)
    }

    pub fn flush(&mut self) -> Result<(), WireError> {
        self.writer.flush()?;
        Ok(())
    }

    pub fn add_logical_bits_out(&mut self, bits: u64) {
        self.stats.logical_bits_out += bits;
    }

    pub fn add_logical_bits_in(&mut self, bits: u64) {
        self.stats.logical_bits_in += bits;
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }
}

/// Cursor over a frame payload with typed big-endian reads.
pub struct PayloadReader<'a> {
    frame: FrameType,
    buf: &'a [u8],
}

impl<'a> PayloadReader<'a> {
    pub fn new(frame: FrameType, buf: &'a [u8]) -> Self {
        Self { frame, buf }
    }

    fn malformed(&self, reason: impl Into<String>) -> WireError {
        WireError::Malformed {
            frame: self.frame,
            reason: reason.into(),
        }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(self.malformed(format!("needed {n} more bytes, {} left", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    /// A `u16`-length-prefixed byte string.
    pub fn short_bytes(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.u16()? as usize;
        self.bytes(n)
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(self.malformed(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

/// Appends a `u16`-length-prefixed byte string.
pub fn put_short_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
    out.extend_from_slice(bytes);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        let payload: Vec<u8> = (0..12).collect();
        write_frame(&mut buf, FrameType::Hello, &payload).unwrap();
        assert_eq!(buf.len(), 17);
        assert_eq!(&buf[..5], &[0, 0, 0, 12, 0x01]);
        let frame = read_frame(&mut Cursor::new(buf)).unwrap();
        assert_eq!(frame, Frame::new(FrameType::Hello, payload));
    }

    #[test]
    fn oversized_frames_rejected() {
        let big = vec![0u8; 17 * 1024 * 1024];
        assert!(matches!(
            write_frame(&mut Vec::new(), FrameType::ExtendCorrection, &big),
            Err(WireError::FrameTooLarge(_))
        ));
        let header = [0x01, 0x10, 0x00, 0x00, 0x22];
        assert!(matches!(
            read_frame(&mut Cursor::new(header)),
            Err(WireError::FrameTooLarge(_))
        ));
    }

    #[test]
    fn truncation_and_unknown_tags() {
        let mut buf = Vec::new();
        write_frame(&mut buf, FrameType::EntryDone, &[1, 2, 3, 4]).unwrap();
        buf.truncate(7);
        assert!(matches!(read_frame(&mut Cursor::new(buf)), Err(WireError::ConnectionClosed)));
        assert!(matches!(
            read_frame(&mut Cursor::new(Vec::<u8>::new())),
            Err(WireError::ConnectionClosed)
        ));
        assert!(matches!(
            read_frame(&mut Cursor::new([0, 0, 0, 0, 0x7f])),
            Err(WireError::UnknownFrameType(0x7f))
        ));
    }

    #[test]
    fn bit_packing_convention() {
        let bits = [true, false, true, true, false, false, false, false];
        assert_eq!(pack_bits(&bits), vec![0x0D]);
        assert_eq!(pack_bits(&[]), Vec::<u8>::new());
        assert_eq!(unpack_bits(&[0x0D], 4).unwrap(), vec![true, false, true, true]);
        assert!(matches!(unpack_bits(&[0x0D], 9), Err(WireError::CountOutOfRange { .. })));
    }

    #[test]
    fn tags_are_unique() {
        for &t in FrameType::ALL {
            assert_eq!(FrameType::try_from(t as u8).unwrap(), t);
        }
    }

    #[test]
    fn counters_track_framed_bytes() {
        let mut sink = Vec::new();
        {
            let mut ch = CountingChannel::new(Cursor::new(Vec::new()), &mut sink);
            ch.send(FrameType::Hello, &[0; 32]).unwrap();
            ch.send(FrameType::SessionDone, &[]).unwrap();
            ch.flush().unwrap();
            assert_eq!(ch.stats().framed_out, 42);
            assert_eq!(ch.stats().payload_out, 32);
            assert_eq!(ch.stats().frames_out, 2);
        }
        let mut ch = CountingChannel::new(Cursor::new(sink), io::sink());
        assert_eq!(ch.recv().unwrap().ty, FrameType::Hello);
        assert_eq!(ch.recv().unwrap().ty, FrameType::SessionDone);
        assert_eq!(ch.stats().framed_in, 42);
        assert!(matches!(ch.recv(), Err(WireError::ConnectionClosed)));
    }

    proptest! {
        #[test]
        fn frames_round_trip(payload in prop::collection::vec(any::<u8>(), 0..4096), tag in 0usize..13) {
            let ty = FrameType::ALL[tag];
            let mut buf = Vec::new();
            write_frame(&mut buf, ty, &payload).unwrap();
            prop_assert_eq!(read_frame(&mut Cursor::new(buf)).unwrap(), Frame::new(ty, payload));
        }

        #[test]
        fn bits_round_trip(bits in prop::collection::vec(any::<bool>(), 0..500)) {
            prop_assert_eq!(unpack_bits(&pack_bits(&bits), bits.len()).unwrap(), bits);
        }
    }
}
