//! Session negotiation: HELLO from the client, ACCEPT or REJECT from the
//! server.
//!
//! Both sides must agree on every parameter; there is no negotiation beyond
//! accept/reject. The client's batching mode is adopted as proposed since it
//! does not change what the server computes.

use std::io::{Read, Write};

use rand::RngCore;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ProtocolError;
use crate::editdist::{Band, Batching, Threshold};
use crate::otext::build_codebook;
use crate::wire::{put_short_bytes, CountingChannel, FrameType, PayloadReader};

pub const PROTOCOL_VERSION: u8 = 1;

const HELLO_LEN: usize = 32;

/// Protocol parameters both parties must hold identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SessionConfig {
    /// Modulus size of the base-OT group, in bits.
    pub phi: u32,
    /// Number of base OTs and codeword length.
    pub kappa: u32,
    /// Alphabet size.
    pub n: u32,
    /// Distance threshold.
    pub k: u32,
    pub batching: Batching,
    pub version: u8,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            phi: 1024,
            kappa: 80,
            n: 4,
            k: 60,
            batching: Batching::PerStripe,
            version: PROTOCOL_VERSION,
        }
    }
}

impl SessionConfig {
    pub fn threshold(&self) -> Threshold {
        Threshold(self.k)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !matches!(self.phi, 1024 | 2048) {
            return Err(ProtocolError::InvalidConfig(format!("φ = {} not in {{1024, 2048}}", self.phi)));
        }
        if !matches!(self.kappa, 80 | 128) {
            return Err(ProtocolError::InvalidConfig(format!("κ = {} not in {{80, 128}}", self.kappa)));
        }
        build_codebook(self.n as usize, self.kappa as usize)
            .map_err(|e| ProtocolError::InvalidConfig(format!("n = {}: {e}", self.n)))?;
        Ok(())
    }
}

/// Why a server turned a HELLO down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[repr(u8)]
pub enum RejectReason {
    Version = 1,
    Parameter = 2,
    Malformed = 3,
}

impl RejectReason {
    fn from_u8(v: u8) -> Self {
        match v {
            1 => Self::Version,
            2 => Self::Parameter,
            _ => Self::Malformed,
        }
    }
}

/// Everything both parties know after a successful handshake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Handshake {
    pub config: SessionConfig,
    pub session_id: [u8; 16],
    pub query_len: usize,
    pub target_lens: Vec<usize>,
    /// Comparisons of the full band schedule over all entries.
    pub expected_ots: u64,
}

/// Extension capacity needed to run every entry's full schedule.
pub fn expected_ots(query_len: usize, target_lens: &[usize], k: Threshold) -> u64 {
    target_lens
        .iter()
        .map(|&m| Band::new(query_len, m, k).total_pairs() as u64)
        .sum()
}

fn session_id(client_nonce: &[u8], server_nonce: &[u8]) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update(b"escot/session/v1");
    h.update(client_nonce);
    h.update(server_nonce);
    let digest = h.finalize();
    digest[..16].try_into().unwrap()
}

fn encode_hello(config: &SessionConfig, query_len: usize, nonce: &[u8; 16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HELLO_LEN);
    out.push(config.version);
    out.extend_from_slice(&(config.phi as u16).to_be_bytes());
    out.extend_from_slice(&(config.kappa as u16).to_be_bytes());
    out.extend_from_slice(&(config.n as u16).to_be_bytes());
    out.extend_from_slice(&config.k.to_be_bytes());
    out.push(match config.batching {
        Batching::PerStripe => 0,
        Batching::WholeBand => 1,
    });
    out.extend_from_slice(&(query_len as u32).to_be_bytes());
    out.extend_from_slice(nonce);
    out
}

struct Hello {
    config: SessionConfig,
    query_len: usize,
    nonce: Vec<u8>,
}

fn decode_hello(payload: &[u8]) -> Result<Hello, ProtocolError> {
    let mut r = PayloadReader::new(FrameType::Hello, payload);
    let version = r.u8()?;
    let phi = r.u16()? as u32;
    let kappa = r.u16()? as u32;
    let n = r.u16()? as u32;
    let k = r.u32()?;
    let batching = match r.u8()? {
        0 => Batching::PerStripe,
        1 => Batching::WholeBand,
        other => return Err(ProtocolError::Violation(format!("unknown batching mode {other}"))),
    };
    let query_len = r.u32()? as usize;
    let nonce = r.bytes(16)?.to_vec();
    r.finish()?;
    Ok(Hello {
        config: SessionConfig {
            phi,
            kappa,
            n,
            k,
            batching,
            version,
        },
        query_len,
        nonce,
    })
}

fn reject<R: Read, W: Write>(
    ch: &mut CountingChannel<R, W>,
    reason: RejectReason,
    message: String,
) -> ProtocolError {
    let mut payload = vec![reason as u8];
    put_short_bytes(&mut payload, message.as_bytes());
    // the session is over either way; a failed REJECT changes nothing
    let _ = ch.send(FrameType::Reject, &payload).and_then(|_| ch.flush());
    ProtocolError::Rejected { reason, message }
}

/// Client side: propose `config`, announce the query length, and learn the
/// database shape.
pub fn client_handshake<R: Read, W: Write, G: RngCore>(
    ch: &mut CountingChannel<R, W>,
    config: &SessionConfig,
    query_len: usize,
    rng: &mut G,
) -> Result<Handshake, ProtocolError> {
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce);
    ch.send(FrameType::Hello, &encode_hello(config, query_len, &nonce))?;
    ch.flush()?;

    let frame = ch.recv()?;
    match frame.ty {
        FrameType::Accept => {}
        FrameType::Reject => {
            let mut r = PayloadReader::new(FrameType::Reject, &frame.payload);
            let reason = RejectReason::from_u8(r.u8()?);
            let message = String::from_utf8_lossy(r.short_bytes()?).into_owned();
            return Err(ProtocolError::Rejected { reason, message });
        }
        other => {
            return Err(ProtocolError::Violation(format!("expected ACCEPT, got {other:?}")));
        }
    }
    let mut r = PayloadReader::new(FrameType::Accept, &frame.payload);
    let server_nonce = r.bytes(16)?;
    let announced_ots = r.u64()?;
    let count = r.u32()? as usize;
    let target_lens = (0..count)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    r.finish()?;

    let expected = expected_ots(query_len, &target_lens, config.threshold());
    if expected != announced_ots {
        return Err(ProtocolError::Violation(format!(
            "server expects {announced_ots} transfers, schedule needs {expected}"
        )));
    }
    Ok(Handshake {
        config: *config,
        session_id: session_id(&nonce, server_nonce),
        query_len,
        target_lens,
        expected_ots: expected,
    })
}

/// Server side: accept a HELLO matching `config` exactly (batching aside),
/// or send REJECT and fail.
pub fn server_handshake<R: Read, W: Write, G: RngCore>(
    ch: &mut CountingChannel<R, W>,
    config: &SessionConfig,
    target_lens: &[usize],
    rng: &mut G,
) -> Result<Handshake, ProtocolError> {
    let payload = ch.recv_expect(FrameType::Hello, "HELLO")?;
    let hello = match decode_hello(&payload) {
        Ok(h) => h,
        Err(e) => return Err(reject(ch, RejectReason::Malformed, e.to_string())),
    };
    let proposed = hello.config;
    if proposed.version != config.version {
        return Err(reject(
            ch,
            RejectReason::Version,
            format!("version {} unsupported, server speaks {}", proposed.version, config.version),
        ));
    }
    let mismatches: Vec<String> = [
        ("phi", proposed.phi, config.phi),
        ("kappa", proposed.kappa, config.kappa),
        ("n", proposed.n, config.n),
        ("k", proposed.k, config.k),
    ]
    .iter()
    .filter(|(_, a, b)| a != b)
    .map(|(name, a, b)| format!("{name}: proposed {a}, server uses {b}"))
    .collect();
    if !mismatches.is_empty() {
        return Err(reject(ch, RejectReason::Parameter, mismatches.join("; ")));
    }
    if hello.query_len == 0 {
        return Err(reject(ch, RejectReason::Parameter, "empty query".into()));
    }

    let agreed = SessionConfig {
        batching: proposed.batching,
        ..*config
    };
    let expected = expected_ots(hello.query_len, target_lens, agreed.threshold());
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce);
    let mut out = Vec::with_capacity(28 + 4 * target_lens.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&expected.to_be_bytes());
    out.extend_from_slice(&(target_lens.len() as u32).to_be_bytes());
    for &m in target_lens {
        out.extend_from_slice(&(m as u32).to_be_bytes());
    }
    ch.send(FrameType::Accept, &out)?;
    ch.flush()?;

    Ok(Handshake {
        config: agreed,
        session_id: session_id(&hello.nonce, &nonce),
        query_len: hello.query_len,
        target_lens: target_lens.to_vec(),
        expected_ots: expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hello_layout_is_fixed() {
        let bytes = encode_hello(&SessionConfig::default(), 3500, &[9; 16]);
        assert_eq!(bytes.len(), HELLO_LEN);
        assert_eq!(&bytes[..12], &[1, 0x04, 0x00, 0x00, 80, 0, 4, 0, 0, 0, 60, 0]);
        let back = decode_hello(&bytes).unwrap();
        assert_eq!(back.config, SessionConfig::default());
        assert_eq!(back.query_len, 3500);
    }

    #[test]
    fn config_validation() {
        assert!(SessionConfig::default().validate().is_ok());
        let bad = |f: fn(&mut SessionConfig)| {
            let mut c = SessionConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.phi = 512));
        assert!(bad(|c| c.kappa = 64));
        assert!(bad(|c| c.n = 1));
        assert!(bad(|c| c.n = 256));
        assert!(!bad(|c| c.kappa = 128));
        assert!(!bad(|c| c.k = 0));
    }
}
