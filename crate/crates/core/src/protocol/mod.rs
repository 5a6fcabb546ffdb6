//! The private 1-vs-N edit-distance query.
//!
//! A session runs over one connection:
//!
//! 1. handshake (parameters, query and entry lengths);
//! 2. κ base OTs, client as sender, then OT-extension setup sized for the
//!    full band schedule of every entry;
//! 3. for each database entry in order, the client drives the banded DP;
//!    each batch of comparisons is one STRIPE_REQUEST + EXTEND_CORRECTION
//!    from the client, answered by one EXTEND_MASKED from the server;
//! 4. ENTRY_DONE or ENTRY_ABORT closes each entry, SESSION_DONE the session.
//!
//! Cell indices never cross the wire. Both sides derive the same band
//! schedule from `(m, m', k)` and walk it in lockstep; the server only sees
//! how many stripes each entry consumed.

mod handshake;
mod metrics;

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Instant;

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

pub use handshake::{
    client_handshake, expected_ots, server_handshake, Handshake, RejectReason, SessionConfig,
    PROTOCOL_VERSION,
};
pub use metrics::{EntryMetrics, SessionMetrics};

use crate::alphabet::{EncodedSequence, SequenceDatabase};
use crate::baseot::{random_seed_pairs, receive_base_ots, send_base_ots, BaseOtError, GroupParams, KeyDerivation};
use crate::editdist::{ukkonen_banded, Band, EditDistanceResult, EqualityComparator};
use crate::escot::{compare_batch_receiver, compare_batch_sender, EscotError};
use crate::otext::{build_codebook, ExtensionReceiver, ExtensionSender, OtExtError, MAX_BATCH};
use crate::wire::{ChannelStats, CountingChannel, FrameType, PayloadReader, WireError};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rejected by server ({reason:?}): {message}")]
    Rejected { reason: RejectReason, message: String },
    #[error("protocol violation: {0}")]
    Violation(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    BaseOt(#[from] BaseOtError),
    #[error(transparent)]
    OtExt(#[from] OtExtError),
    #[error(transparent)]
    Escot(#[from] EscotError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One database entry's outcome, as reported to the client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchResult {
    pub id: String,
    #[serde(serialize_with = "serialize_outcome")]
    pub outcome: EditDistanceResult,
}

fn serialize_outcome<S: serde::Serializer>(r: &EditDistanceResult, s: S) -> Result<S::Ok, S::Error> {
    match r {
        EditDistanceResult::Distance(d) => s.serialize_some(d),
        EditDistanceResult::ExceedsThreshold => s.serialize_none(),
    }
}

impl MatchResult {
    pub fn is_match(&self) -> bool {
        matches!(self.outcome, EditDistanceResult::Distance(_))
    }
}

/// What a server session observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerReport {
    pub peer: Option<SocketAddr>,
    pub config: SessionConfig,
    pub query_len: usize,
    pub metrics: SessionMetrics,
    /// Raw channel counters, including per-frame-type payload totals.
    pub stats: ChannelStats,
}

fn seed_len(config: &SessionConfig) -> usize {
    config.kappa as usize / 8
}

/// Comparator that answers the banded engine's requests through OT,
/// walking the shared stripe schedule.
struct OtComparator<'a, R: Read, W: Write> {
    ch: &'a mut CountingChannel<R, W>,
    ext: Option<&'a mut ExtensionReceiver>,
    query: &'a EncodedSequence,
    band: &'a Band,
    cursor: usize,
}

impl<R: Read, W: Write> EqualityComparator for OtComparator<'_, R, W> {
    type Error = ProtocolError;

    fn compare_batch(&mut self, pairs: &[(usize, usize)]) -> Result<Vec<bool>, ProtocolError> {
        let ext = self
            .ext
            .as_deref_mut()
            .ok_or_else(|| ProtocolError::Violation("comparison requested without an extension".into()))?;
        let mut results = Vec::with_capacity(pairs.len());
        let mut offset = 0;
        while offset < pairs.len() {
            // whole stripes only, at most MAX_BATCH transfers unless a single
            // stripe is larger
            let (mut stripes, mut len) = (0usize, 0usize);
            while offset + len < pairs.len() {
                if self.cursor + stripes >= self.band.stripe_count() {
                    return Err(ProtocolError::Violation("request runs past the band schedule".into()));
                }
                let next = self.band.stripe_len(self.cursor + stripes);
                if stripes > 0 && len + next > MAX_BATCH {
                    break;
                }
                len += next;
                stripes += 1;
            }
            if offset + len != pairs.len() && len == 0 || offset + len > pairs.len() {
                return Err(ProtocolError::Violation("request not aligned to stripes".into()));
            }
            let chunk = &pairs[offset..offset + len];
            debug_assert_eq!(chunk, self.band.pairs(self.cursor..self.cursor + stripes));
            self.ch.send(FrameType::StripeRequest, &(stripes as u32).to_be_bytes())?;
            results.extend(compare_batch_receiver(self.query, chunk, ext, self.ch)?);
            self.cursor += stripes;
            offset += len;
        }
        Ok(results)
    }
}

fn entry_payload(before: &ChannelStats, after: &ChannelStats) -> (u64, u64) {
    (after.payload_out - before.payload_out, after.payload_in - before.payload_in)
}

/// Runs the client side of a session over an established channel.
///
/// Returns one result per database entry, in database order, together with
/// the client's traffic metrics.
pub fn client_session<R, W, G>(
    ch: &mut CountingChannel<R, W>,
    query: &EncodedSequence,
    config: &SessionConfig,
    rng: &mut G,
) -> Result<(Vec<MatchResult>, SessionMetrics), ProtocolError>
where
    R: Read,
    W: Write,
    G: RngCore + CryptoRng,
{
    config.validate()?;
    if query.alphabet_size() != config.n as usize {
        return Err(ProtocolError::InvalidConfig(format!(
            "query alphabet of size {} but n = {}",
            query.alphabet_size(),
            config.n
        )));
    }
    let start = Instant::now();
    let hs = client_handshake(ch, config, query.len(), rng)?;
    let k = config.threshold();

    let mut ext = None;
    let mut base_ots = 0;
    if hs.expected_ots > 0 {
        let params = GroupParams::modp(config.phi)?;
        let kdf = KeyDerivation::new(hs.session_id);
        let seeds = random_seed_pairs(config.kappa as usize, seed_len(config), rng);
        let batch = send_base_ots(ch, &params, &kdf, seeds, rng)?;
        base_ots = batch.len() as u64;
        let codebook = build_codebook(config.n as usize, config.kappa as usize)?;
        ext = Some(ExtensionReceiver::setup(&batch, codebook, &hs.session_id, hs.expected_ots)?);
    }

    let mut results = Vec::with_capacity(hs.target_lens.len());
    let mut per_entry = Vec::with_capacity(hs.target_lens.len());
    for (index, &target_len) in hs.target_lens.iter().enumerate() {
        let payload = ch.recv_expect(FrameType::EntryBegin, "ENTRY_BEGIN")?;
        let mut r = PayloadReader::new(FrameType::EntryBegin, &payload);
        let announced_index = r.u32()? as usize;
        let announced_len = r.u32()? as usize;
        let id = String::from_utf8_lossy(r.short_bytes()?).into_owned();
        r.finish()?;
        if announced_index != index || announced_len != target_len {
            return Err(ProtocolError::Violation(format!(
                "entry {announced_index} of length {announced_len} announced, expected {index} of length {target_len}"
            )));
        }

        let before = ch.stats().clone();
        let band = Band::new(query.len(), target_len, k);
        let mut cmp = OtComparator {
            ch: &mut *ch,
            ext: ext.as_mut(),
            query,
            band: &band,
            cursor: 0,
        };
        let outcome = ukkonen_banded(query.len(), target_len, k, config.batching, &mut cmp)?;
        let stripes = cmp.cursor;
        let (closing, ty) = if stripes < band.stripe_count() {
            ((stripes as u32).to_be_bytes(), FrameType::EntryAbort)
        } else {
            ((stripes as u32).to_be_bytes(), FrameType::EntryDone)
        };
        ch.send(ty, &closing)?;
        ch.flush()?;

        let (sent, received) = entry_payload(&before, ch.stats());
        per_entry.push(EntryMetrics {
            id: id.clone(),
            target_len,
            outcome: Some(metrics::outcome_label(outcome.result)),
            comparisons: outcome.comparisons as u64,
            stripes_executed: stripes as u64,
            stripes_total: band.stripe_count() as u64,
            aborted: outcome.aborted,
            payload_bytes_sent: sent,
            payload_bytes_received: received,
        });
        results.push(MatchResult {
            id,
            outcome: outcome.result,
        });
    }

    let payload = ch.recv_expect(FrameType::SessionDone, "SESSION_DONE")?;
    let mut r = PayloadReader::new(FrameType::SessionDone, &payload);
    if r.u32()? as usize != results.len() {
        return Err(ProtocolError::Violation("entry count mismatch at SESSION_DONE".into()));
    }
    r.finish()?;

    let metrics = SessionMetrics::from_stats(
        "client",
        start.elapsed().as_secs_f64(),
        config.kappa,
        config.n,
        base_ots,
        ch.stats(),
        per_entry,
    );
    Ok((results, metrics))
}

/// Runs the server side of a session over an established channel.
pub fn server_session<R, W, G>(
    ch: &mut CountingChannel<R, W>,
    db: &SequenceDatabase,
    config: &SessionConfig,
    rng: &mut G,
) -> Result<ServerReport, ProtocolError>
where
    R: Read,
    W: Write,
    G: RngCore + CryptoRng,
{
    config.validate()?;
    if db.alphabet().len() != config.n as usize {
        return Err(ProtocolError::InvalidConfig(format!(
            "database alphabet of size {} but n = {}",
            db.alphabet().len(),
            config.n
        )));
    }
    let start = Instant::now();
    let lens: Vec<usize> = db.entries().iter().map(EncodedSequence::len).collect();
    let hs = server_handshake(ch, config, &lens, rng)?;
    let k = hs.config.threshold();

    let mut ext = None;
    let mut base_ots = 0;
    if hs.expected_ots > 0 {
        let params = GroupParams::modp(config.phi)?;
        let kdf = KeyDerivation::new(hs.session_id);
        let choices: Vec<bool> = (0..config.kappa).map(|_| rng.gen()).collect();
        let batch = receive_base_ots(ch, &params, &kdf, choices, rng)?;
        base_ots = batch.len() as u64;
        let codebook = build_codebook(config.n as usize, config.kappa as usize)?;
        ext = Some(ExtensionSender::setup(&batch, codebook, &hs.session_id, hs.expected_ots)?);
    }

    let mut per_entry = Vec::with_capacity(db.len());
    for (index, entry) in db.entries().iter().enumerate() {
        let before = ch.stats().clone();
        let mut begin = Vec::with_capacity(10 + entry.id().len());
        begin.extend_from_slice(&(index as u32).to_be_bytes());
        begin.extend_from_slice(&(entry.len() as u32).to_be_bytes());
        crate::wire::put_short_bytes(&mut begin, entry.id().as_bytes());
        ch.send(FrameType::EntryBegin, &begin)?;
        ch.flush()?;

        let band = Band::new(hs.query_len, entry.len(), k);
        let mut cursor = 0usize;
        let mut comparisons = 0u64;
        let aborted = loop {
            let frame = ch.recv()?;
            match frame.ty {
                FrameType::StripeRequest => {
                    let mut r = PayloadReader::new(frame.ty, &frame.payload);
                    let stripes = r.u32()? as usize;
                    r.finish()?;
                    if stripes == 0 || cursor + stripes > band.stripe_count() {
                        return Err(ProtocolError::Violation(format!(
                            "request for {stripes} stripes at {cursor} of {}",
                            band.stripe_count()
                        )));
                    }
                    let pairs = band.pairs(cursor..cursor + stripes);
                    if stripes > 1 && pairs.len() > MAX_BATCH {
                        return Err(ProtocolError::Violation("batch exceeds transfer cap".into()));
                    }
                    let ext = ext
                        .as_mut()
                        .ok_or_else(|| ProtocolError::Violation("comparison without an extension".into()))?;
                    compare_batch_sender(entry, &pairs, ext, ch)?;
                    cursor += stripes;
                    comparisons += pairs.len() as u64;
                }
                FrameType::EntryDone | FrameType::EntryAbort => {
                    let mut r = PayloadReader::new(frame.ty, &frame.payload);
                    let executed = r.u32()? as usize;
                    r.finish()?;
                    if executed != cursor {
                        return Err(ProtocolError::Violation(format!(
                            "peer reports {executed} stripes, served {cursor}"
                        )));
                    }
                    break frame.ty == FrameType::EntryAbort;
                }
                other => {
                    return Err(ProtocolError::Violation(format!("unexpected {other:?} during entry")));
                }
            }
        };
        let (sent, received) = entry_payload(&before, ch.stats());
        per_entry.push(EntryMetrics {
            id: entry.id().to_owned(),
            target_len: entry.len(),
            outcome: None,
            comparisons,
            stripes_executed: cursor as u64,
            stripes_total: band.stripe_count() as u64,
            aborted,
            payload_bytes_sent: sent,
            payload_bytes_received: received,
        });
    }
    ch.send(FrameType::SessionDone, &(db.len() as u32).to_be_bytes())?;
    ch.flush()?;

    Ok(ServerReport {
        peer: None,
        config: hs.config,
        query_len: hs.query_len,
        metrics: SessionMetrics::from_stats(
            "server",
            start.elapsed().as_secs_f64(),
            config.kappa,
            config.n,
            base_ots,
            ch.stats(),
            per_entry,
        ),
        stats: ch.stats().clone(),
    })
}

/// Connects to `addr` and runs one query.
pub fn run_client(
    query: &EncodedSequence,
    config: &SessionConfig,
    addr: impl ToSocketAddrs,
) -> Result<(Vec<MatchResult>, SessionMetrics), ProtocolError> {
    let stream = TcpStream::connect(addr)?;
    let mut ch = CountingChannel::tcp(stream)?;
    let mut rng = ChaCha20Rng::from_entropy();
    client_session(&mut ch, query, config, &mut rng)
}

/// Serves one accepted connection.
pub fn serve_connection(
    stream: TcpStream,
    db: &SequenceDatabase,
    config: &SessionConfig,
) -> Result<ServerReport, ProtocolError> {
    let peer = stream.peer_addr().ok();
    let mut ch = CountingChannel::tcp(stream)?;
    let mut rng = ChaCha20Rng::from_entropy();
    let mut report = server_session(&mut ch, db, config, &mut rng)?;
    report.peer = peer;
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
pub struct ServerOptions {
    /// Sessions served concurrently; further connections wait.
    pub max_sessions: usize,
    /// Stop accepting after this many connections.
    pub session_limit: Option<usize>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            max_sessions: 4,
            session_limit: None,
        }
    }
}

/// Accepts connections and serves each on its own thread, at most
/// `options.max_sessions` at a time. `on_session` sees every session's
/// outcome. Returns after `session_limit` sessions have finished, or runs
/// forever.
pub fn run_server<F>(
    listener: TcpListener,
    db: Arc<SequenceDatabase>,
    config: SessionConfig,
    options: ServerOptions,
    on_session: F,
) -> Result<(), ProtocolError>
where
    F: Fn(Result<ServerReport, ProtocolError>) + Send + Sync + 'static,
{
    config.validate()?;
    let on_session = Arc::new(on_session);
    let slots = options.max_sessions.max(1);
    let (release, acquire) = mpsc::sync_channel::<()>(slots);
    for _ in 0..slots {
        release.send(()).expect("receiver alive");
    }
    let mut handles = Vec::new();
    for (served, stream) in listener.incoming().enumerate() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        acquire.recv().expect("sender alive");
        let (db, on_session, release) = (Arc::clone(&db), Arc::clone(&on_session), release.clone());
        handles.push(thread::spawn(move || {
            on_session(serve_connection(stream, &db, &config));
            let _ = release.send(());
        }));
        handles.retain(|h| !h.is_finished());
        if options.session_limit.is_some_and(|limit| served + 1 >= limit) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

/// Runs a complete session between an in-process client and server over a
/// loopback TCP connection.
pub fn run_loopback(
    query: &EncodedSequence,
    db: &SequenceDatabase,
    config: &SessionConfig,
) -> Result<(Vec<MatchResult>, SessionMetrics, ServerReport), ProtocolError> {
    let listener = TcpListener::bind(("127.0.0.1", 0))?;
    let addr = listener.local_addr()?;
    thread::scope(|s| {
        let server = s.spawn(|| -> Result<ServerReport, ProtocolError> {
            let (stream, _) = listener.accept()?;
            serve_connection(stream, db, config)
        });
        let client = run_client(query, config, addr);
        let server = server.join().expect("server thread panicked");
        let (results, metrics) = client?;
        Ok((results, metrics, server?))
    })
}
