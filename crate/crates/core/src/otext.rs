//! 1-out-of-n oblivious transfer extension for one-bit messages.
//!
//! IKNP-style extension generalized to n choices with a Walsh–Hadamard
//! codebook `C`. Roles are inverted relative to the base OTs: the extension
//! receiver offers κ pairs of seeds `(k_i^0, k_i^1)`, the extension sender
//! picks them with its secret κ-bit vector `s`.
//!
//! For extended transfer `j` with choice `r_j`, writing `G(k)[j]` for bit `j`
//! of the ChaCha20 stream keyed by `k`:
//!
//! * receiver row `T_j` has bit `i` = `G(k_i^0)[j]`, and the receiver sends
//!   the κ-bit correction `U_j = T_j ⊕ G1_j ⊕ C(r_j)`, where `G1_j` is the
//!   row of `G(k_i^1)[j]`;
//! * sender row `Q_j` has bit `i` = `G(k_i^{s_i})[j] ⊕ s_i·U_j[i]`, so that
//!   `Q_j = T_j ⊕ (s ∧ C(r_j))`;
//! * the sender masks message `v` with `lsb H(session ‖ j ‖ Q_j ⊕ (s ∧ C(v)))`,
//!   which equals `lsb H(session ‖ j ‖ T_j)` exactly when `v = r_j`.
//!
//! Per transfer the receiver sends κ bits and the sender n bits.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baseot::BaseOtBatch;

/// A κ-bit row of the extension matrices (κ ≤ 128), bit `i` = column `i`.
pub type Row = u128;

/// Upper bound on the transfers handled by one extension round.
pub const MAX_BATCH: usize = 1 << 20;

const PRG_DOMAIN: &[u8] = b"escot/otext/prg/v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OtExtError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("choice {choice} out of range for n = {n}")]
    ChoiceOutOfRange { choice: u32, n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("extension capacity of {capacity} transfers exceeded")]
    CapacityExceeded { capacity: u64 },
    #[error("base-OT batch has the wrong role for this side of the extension")]
    RoleMismatch,
    #[error("no extension round is pending")]
    NothingPending,
}

/// Walsh–Hadamard codewords of length κ.
///
/// With `L` the next power of two `>= n`, bit `c` of codeword `v` is the
/// parity of `v & (c mod L)`. Every codeword is a κ/L-fold repetition of a
/// Hadamard codeword of length `L`, so distinct codewords differ in exactly
/// κ/2 positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    n: usize,
    kappa: usize,
    words: Vec<Row>,
}

impl CodeBook {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn word(&self, v: usize) -> Row {
        self.words[v]
    }

    pub fn words(&self) -> &[Row] {
        &self.words
    }

    /// Smallest pairwise Hamming distance.
    pub fn min_distance(&self) -> u32 {
        let mut best = u32::MAX;
        for (a, wa) in self.words.iter().enumerate() {
            for wb in &self.words[a + 1..] {
                best = best.min((wa ^ wb).count_ones());
            }
        }
        best
    }
}

/// Builds the codebook for `n` choices and κ-bit rows.
///
/// κ must be a multiple of 8 in `8..=128`; the Hadamard block length (the
/// next power of two `>= n`) must divide κ.
pub fn build_codebook(n: usize, kappa: usize) -> Result<CodeBook, OtExtError> {
    if kappa == 0 || kappa > 128 || !kappa.is_multiple_of(8) {
        return Err(OtExtError::InvalidParameter(format!("unsupported κ = {kappa}")));
    }
    if n < 2 || n > kappa {
        return Err(OtExtError::InvalidParameter(format!("n = {n} outside 2..={kappa}")));
    }
    let block = n.next_power_of_two();
    if !kappa.is_multiple_of(block) {
        return Err(OtExtError::InvalidParameter(format!(
            "Hadamard block of {block} does not divide κ = {kappa}"
        )));
    }
    let words = (0..n)
        .map(|v| {
            (0..kappa).fold(0 as Row, |acc, c| {
                let bit = ((v & (c % block)).count_ones() & 1) as Row;
                acc | (bit << c)
            })
        })
        .collect();
    Ok(CodeBook { n, kappa, words })
}

/// Sequential reader over the bits of a ChaCha20 stream.
#[derive(Clone)]
struct BitStream {
    rng: ChaCha20Rng,
    buf: u64,
    avail: u32,
}

impl BitStream {
    fn new(seed: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(PRG_DOMAIN);
        h.update(seed);
        Self {
            rng: ChaCha20Rng::from_seed(h.finalize().into()),
            buf: 0,
            avail: 0,
        }
    }

    /// Next `n` bits (1..=64), first bit in the least significant position.
    fn take(&mut self, n: u32) -> u64 {
        debug_assert!((1..=64).contains(&n));
        if self.avail >= n {
            let v = self.buf & mask(n);
            self.buf = if n == 64 { 0 } else { self.buf >> n };
            self.avail -= n;
            return v;
        }
        let low = self.buf;
        let have = self.avail;
        let need = n - have;
        let next = self.rng.next_u64();
        let v = low | ((next & mask(need)) << have);
        self.buf = if need == 64 { 0 } else { next >> need };
        self.avail = 64 - need;
        v
    }
}

fn mask(n: u32) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// XORs the next `rows.len()` bits of `stream` into column `col` of `rows`.
fn xor_column(stream: &mut BitStream, col: usize, rows: &mut [Row]) {
    for chunk in rows.chunks_mut(64) {
        let bits = stream.take(chunk.len() as u32);
        for (r, row) in chunk.iter_mut().enumerate() {
            *row ^= (((bits >> r) & 1) as Row) << col;
        }
    }
}

/// One κ-bit correction row per extended transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionMatrix {
    kappa: usize,
    rows: Vec<Row>,
}

impl CorrectionMatrix {
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row-major, κ/8 bytes per row, bits least significant first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let w = self.kappa / 8;
        let mut out = Vec::with_capacity(self.rows.len() * w);
        for row in &self.rows {
            out.extend_from_slice(&row.to_le_bytes()[..w]);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], kappa: usize) -> Result<Self, OtExtError> {
        let w = kappa / 8;
        if w == 0 || !bytes.len().is_multiple_of(w) {
            return Err(OtExtError::DimensionMismatch(format!(
                "{} bytes is not a whole number of {w}-byte rows",
                bytes.len()
            )));
        }
        let rows = bytes
            .chunks(w)
            .map(|c| {
                let mut full = [0u8; 16];
                full[..w].copy_from_slice(c);
                Row::from_le_bytes(full)
            })
            .collect();
        Ok(Self { kappa, rows })
    }

    /// Logical payload in bits.
    pub fn bit_len(&self) -> u64 {
        (self.rows.len() * self.kappa) as u64
    }
}

/// n masked one-bit messages per extended transfer, packed: message `v` of
/// transfer `j` is bit `j·n + v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedMessageSet {
    n: usize,
    count: usize,
    bits: Vec<u8>,
}

impl MaskedMessageSet {
    fn zeroed(n: usize, count: usize) -> Self {
        Self {
            n,
            count,
            bits: vec![0; (n * count).div_ceil(8)],
        }
    }

    pub fn from_bytes(bytes: Vec<u8>, n: usize, count: usize) -> Result<Self, OtExtError> {
        if bytes.len() != (n * count).div_ceil(8) {
            return Err(OtExtError::DimensionMismatch(format!(
                "{} bytes for {count} transfers of {n} bits",
                bytes.len()
            )));
        }
        Ok(Self { n, count, bits: bytes })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn get(&self, j: usize, v: usize) -> bool {
        let t = j * self.n + v;
        (self.bits[t / 8] >> (t % 8)) & 1 == 1
    }

    fn set(&mut self, j: usize, v: usize, bit: bool) {
        let t = j * self.n + v;
        self.bits[t / 8] |= u8::from(bit) << (t % 8);
    }

    /// Logical payload in bits.
    pub fn bit_len(&self) -> u64 {
        (self.n * self.count) as u64
    }
}

/// Hash pad for transfer `j` and row value `row`.
#[derive(Clone)]
struct PadHasher {
    prefix: Sha256,
    row_bytes: usize,
}

impl PadHasher {
    fn new(session: &[u8], kappa: usize) -> Self {
        let mut prefix = Sha256::new();
        prefix.update(session);
        Self {
            prefix,
            row_bytes: kappa / 8,
        }
    }

    fn pad(&self, j: u64, row: Row) -> bool {
        let mut h = self.prefix.clone();
        h.update(j.to_be_bytes());
        h.update(&row.to_le_bytes()[..self.row_bytes]);
        h.finalize()[0] & 1 == 1
    }
}

fn check_batch(count: usize, next: u64, capacity: u64) -> Result<(), OtExtError> {
    if count > MAX_BATCH {
        return Err(OtExtError::DimensionMismatch(format!(
            "batch of {count} exceeds the {MAX_BATCH}-transfer cap"
        )));
    }
    if next + count as u64 > capacity {
        return Err(OtExtError::CapacityExceeded { capacity });
    }
    Ok(())
}

fn check_setup(codebook: &CodeBook, seed_count: usize, expected_ots: u64) -> Result<(), OtExtError> {
    if expected_ots == 0 {
        return Err(OtExtError::InvalidParameter("zero expected transfers".into()));
    }
    if seed_count != codebook.kappa {
        return Err(OtExtError::DimensionMismatch(format!(
            "{seed_count} base OTs for κ = {}",
            codebook.kappa
        )));
    }
    Ok(())
}

/// Extension receiver (the party with choices).
pub struct ExtensionReceiver {
    codebook: CodeBook,
    pads: PadHasher,
    streams: Vec<[BitStream; 2]>,
    next: u64,
    capacity: u64,
    pending: Option<(u64, Vec<u32>, Vec<Row>)>,
}

impl ExtensionReceiver {
    /// Requires the base-OT *sender* batch: both seeds of every base OT.
    pub fn setup(
        batch: &BaseOtBatch,
        codebook: CodeBook,
        session: &[u8],
        expected_ots: u64,
    ) -> Result<Self, OtExtError> {
        let BaseOtBatch::Sender { seeds } = batch else {
            return Err(OtExtError::RoleMismatch);
        };
        check_setup(&codebook, seeds.len(), expected_ots)?;
        Ok(Self {
            pads: PadHasher::new(session, codebook.kappa),
            streams: seeds
                .iter()
                .map(|[s0, s1]| [BitStream::new(s0), BitStream::new(s1)])
                .collect(),
            codebook,
            next: 0,
            capacity: expected_ots,
            pending: None,
        })
    }

    pub fn codebook(&self) -> &CodeBook {
        &self.codebook
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Transfers executed so far; the index of the next one.
    pub fn position(&self) -> u64 {
        self.next
    }

    /// Starts a round: returns the correction matrix for `choices`.
    pub fn extend(&mut self, choices: &[u32]) -> Result<CorrectionMatrix, OtExtError> {
        let n = self.codebook.n;
        if let Some(&choice) = choices.iter().find(|&&c| c as usize >= n) {
            return Err(OtExtError::ChoiceOutOfRange { choice, n });
        }
        check_batch(choices.len(), self.next, self.capacity)?;

        let count = choices.len();
        let mut t = vec![0 as Row; count];
        let mut u: Vec<Row> = choices.iter().map(|&c| self.codebook.word(c as usize)).collect();
        for (col, [s0, s1]) in self.streams.iter_mut().enumerate() {
            xor_column(s0, col, &mut t);
            xor_column(s1, col, &mut u);
        }
        for (u_row, t_row) in u.iter_mut().zip(&t) {
            *u_row ^= t_row;
        }
        let start = self.next;
        self.next += count as u64;
        self.pending = Some((start, choices.to_vec(), t));
        Ok(CorrectionMatrix {
            kappa: self.codebook.kappa,
            rows: u,
        })
    }

    /// Finishes the pending round: the chosen message of every transfer.
    pub fn unmask(&mut self, masked: &MaskedMessageSet) -> Result<Vec<bool>, OtExtError> {
        let (start, choices, t) = self.pending.take().ok_or(OtExtError::NothingPending)?;
        if masked.count != choices.len() || masked.n != self.codebook.n {
            return Err(OtExtError::DimensionMismatch(format!(
                "masked set of {}×{} for {} pending transfers",
                masked.count,
                masked.n,
                choices.len()
            )));
        }
        Ok(choices
            .iter()
            .zip(&t)
            .enumerate()
            .map(|(j, (&c, &row))| masked.get(j, c as usize) ^ self.pads.pad(start + j as u64, row))
            .collect())
    }
}

/// Extension sender (the party with messages).
pub struct ExtensionSender {
    codebook: CodeBook,
    pads: PadHasher,
    secret: Row,
    streams: Vec<BitStream>,
    next: u64,
    capacity: u64,
}

impl ExtensionSender {
    /// Requires the base-OT *receiver* batch; its choice bits become `s`.
    pub fn setup(
        batch: &BaseOtBatch,
        codebook: CodeBook,
        session: &[u8],
        expected_ots: u64,
    ) -> Result<Self, OtExtError> {
        let BaseOtBatch::Receiver { choices, seeds } = batch else {
            return Err(OtExtError::RoleMismatch);
        };
        check_setup(&codebook, seeds.len(), expected_ots)?;
        let secret = choices
            .iter()
            .enumerate()
            .fold(0 as Row, |acc, (i, &b)| acc | ((b as Row) << i));
        Ok(Self {
            pads: PadHasher::new(session, codebook.kappa),
            streams: seeds.iter().map(|s| BitStream::new(s)).collect(),
            codebook,
            secret,
            next: 0,
            capacity: expected_ots,
        })
    }

    pub fn codebook(&self) -> &CodeBook {
        &self.codebook
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn position(&self) -> u64 {
        self.next
    }

    /// Answers a correction matrix. `messages[j]` holds the n one-bit
    /// messages of transfer `j`, message `v` in bit `v`.
    pub fn extend(&mut self, u: &CorrectionMatrix, messages: &[u128]) -> Result<MaskedMessageSet, OtExtError> {
        if u.rows.len() != messages.len() {
            return Err(OtExtError::DimensionMismatch(format!(
                "{} correction rows for {} message sets",
                u.rows.len(),
                messages.len()
            )));
        }
        if u.kappa != self.codebook.kappa {
            return Err(OtExtError::DimensionMismatch(format!(
                "κ = {} rows for κ = {}",
                u.kappa, self.codebook.kappa
            )));
        }
        let n = self.codebook.n;
        if n < 128 && messages.iter().any(|&m| m >> n != 0) {
            return Err(OtExtError::DimensionMismatch(format!("message set wider than n = {n}")));
        }
        check_batch(messages.len(), self.next, self.capacity)?;

        let count = messages.len();
        let mut q = vec![0 as Row; count];
        for (col, stream) in self.streams.iter_mut().enumerate() {
            xor_column(stream, col, &mut q);
        }
        let mut out = MaskedMessageSet::zeroed(n, count);
        for (j, (q_row, u_row)) in q.iter_mut().zip(&u.rows).enumerate() {
            *q_row ^= self.secret & u_row;
            let index = self.next + j as u64;
            for v in 0..n {
                let key = *q_row ^ (self.secret & self.codebook.word(v));
                let bit = (messages[j] >> v) & 1 == 1;
                out.set(j, v, bit ^ self.pads.pad(index, key));
            }
        }
        self.next += count as u64;
        Ok(out)
    }
}

/// Either side of an extension.
pub enum ExtensionState {
    Sender(ExtensionSender),
    Receiver(ExtensionReceiver),
}

/// Sets up the side of the extension matching the base-OT batch: a base-OT
/// sender becomes the extension receiver and vice versa.
pub fn extension_setup(
    batch: &BaseOtBatch,
    codebook: CodeBook,
    session: &[u8],
    expected_ots: u64,
) -> Result<ExtensionState, OtExtError> {
    match batch {
        BaseOtBatch::Sender { .. } => {
            ExtensionReceiver::setup(batch, codebook, session, expected_ots).map(ExtensionState::Receiver)
        }
        BaseOtBatch::Receiver { .. } => {
            ExtensionSender::setup(batch, codebook, session, expected_ots).map(ExtensionState::Sender)
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Base-OT batches as they would come out of a honest run, without the
    /// public-key work.
    pub(crate) fn fake_base_ots(kappa: usize, seed: u64) -> (BaseOtBatch, BaseOtBatch) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pairs: Vec<[Vec<u8>; 2]> = (0..kappa)
            .map(|_| {
                let mut a = vec![0u8; kappa / 8];
                let mut b = vec![0u8; kappa / 8];
                rng.fill_bytes(&mut a);
                rng.fill_bytes(&mut b);
                [a, b]
            })
            .collect();
        let choices: Vec<bool> = (0..kappa).map(|_| rng.gen()).collect();
        let chosen = pairs
            .iter()
            .zip(&choices)
            .map(|(p, &c)| p[c as usize].clone())
            .collect();
        (
            BaseOtBatch::Sender { seeds: pairs },
            BaseOtBatch::Receiver { choices, seeds: chosen },
        )
    }

    fn pair(n: usize, kappa: usize, capacity: u64) -> (ExtensionSender, ExtensionReceiver) {
        let (bs, br) = fake_base_ots(kappa, 42);
        let cb = build_codebook(n, kappa).unwrap();
        (
            ExtensionSender::setup(&br, cb.clone(), b"session", capacity).unwrap(),
            ExtensionReceiver::setup(&bs, cb, b"session", capacity).unwrap(),
        )
    }

    #[test]
    fn codebook_distances() {
        for (n, kappa) in [(4, 80), (4, 128), (2, 128), (16, 80), (128, 128), (3, 80)] {
            let cb = build_codebook(n, kappa).unwrap();
            assert_eq!(cb.words().len(), n);
            assert_eq!(cb.min_distance(), kappa as u32 / 2, "n={n} κ={kappa}");
            for a in 0..n {
                for b in a + 1..n {
                    assert_eq!((cb.word(a) ^ cb.word(b)).count_ones(), kappa as u32 / 2);
                }
                assert_eq!(cb.word(a).checked_shr(kappa as u32).unwrap_or(0), 0);
            }
        }
        assert!(build_codebook(256, 80).is_err());
        assert!(build_codebook(32, 80).is_err());
        assert!(build_codebook(4, 81).is_err());
        assert!(build_codebook(1, 80).is_err());
    }

    #[test]
    fn bit_stream_is_chunking_independent() {
        let mut a = BitStream::new(b"seed");
        let mut b = BitStream::new(b"seed");
        let whole: Vec<u64> = (0..10).map(|_| a.take(64)).collect();
        let mut bits = Vec::new();
        for n in [1u32, 7, 64, 13, 63, 2, 64, 64, 64, 64, 64, 64, 64, 40] {
            let v = b.take(n);
            for i in 0..n {
                bits.push((v >> i) & 1);
            }
        }
        for (t, bit) in bits.iter().enumerate() {
            assert_eq!(*bit, (whole[t / 64] >> (t % 64)) & 1, "bit {t}");
        }
    }

    #[test]
    fn chosen_messages_are_recovered() {
        let (mut s, mut r) = pair(4, 80, 1000);
        // one-hot vectors
        let u = r.extend(&[2, 3]).unwrap();
        let masked = s.extend(&u, &[0b0100, 0b0001]).unwrap();
        assert_eq!(r.unmask(&masked).unwrap(), vec![true, false]);
    }

    #[test]
    fn payload_sizes() {
        let (mut s, mut r) = pair(4, 80, 2000);
        let u = r.extend(&[1]).unwrap();
        assert_eq!(u.bit_len(), 80);
        assert_eq!(u.to_bytes().len(), 10);
        let masked = s.extend(&u, &[0]).unwrap();
        assert_eq!(masked.bit_len(), 4);
        r.unmask(&masked).unwrap();

        let choices: Vec<u32> = (0..1000).map(|i| i % 4).collect();
        let u = r.extend(&choices).unwrap();
        assert_eq!(u.len(), 1000);
        assert_eq!(u.bit_len(), 80_000);
        assert_eq!(CorrectionMatrix::from_bytes(&u.to_bytes(), 80).unwrap(), u);
    }

    #[test]
    fn zero_messages_expose_raw_pads() {
        let (mut s, mut r) = pair(4, 80, 10);
        let u = r.extend(&[0, 1, 2]).unwrap();
        let start = s.position();
        let masked = s.extend(&u, &[0, 0, 0]).unwrap();
        let mut q = vec![0 as Row; 3];
        let (_, br) = fake_base_ots(80, 42);
        let BaseOtBatch::Receiver { seeds, .. } = br else { unreachable!() };
        for (col, seed) in seeds.iter().enumerate() {
            xor_column(&mut BitStream::new(seed), col, &mut q);
        }
        for j in 0..3 {
            let qj = q[j] ^ (s.secret & u.rows[j]);
            for v in 0..4 {
                let pad = s.pads.pad(start + j as u64, qj ^ (s.secret & s.codebook.word(v)));
                assert_eq!(masked.get(j, v), pad);
            }
        }
    }

    #[test]
    fn error_paths() {
        let (mut s, mut r) = pair(4, 80, 5);
        assert_eq!(
            r.extend(&[4]).unwrap_err(),
            OtExtError::ChoiceOutOfRange { choice: 4, n: 4 }
        );
        let u = r.extend(&[0, 1]).unwrap();
        assert!(matches!(s.extend(&u, &[0]), Err(OtExtError::DimensionMismatch(_))));
        assert!(matches!(s.extend(&u, &[0, 0b10000]), Err(OtExtError::DimensionMismatch(_))));
        let masked = s.extend(&u, &[1, 2]).unwrap();
        let wrong = MaskedMessageSet::zeroed(4, 3);
        assert!(matches!(r.unmask(&wrong), Err(OtExtError::DimensionMismatch(_))));
        assert!(matches!(r.unmask(&masked), Err(OtExtError::NothingPending)));
        assert_eq!(
            r.extend(&[0, 0, 0, 0]).unwrap_err(),
            OtExtError::CapacityExceeded { capacity: 5 }
        );

        let (bs, br) = fake_base_ots(80, 1);
        let cb = build_codebook(4, 80).unwrap();
        assert!(ExtensionSender::setup(&bs, cb.clone(), b"", 1).is_err());
        assert!(ExtensionReceiver::setup(&br, cb.clone(), b"", 1).is_err());
        assert!(matches!(
            ExtensionReceiver::setup(&bs, cb, b"", 0),
            Err(OtExtError::InvalidParameter(_))
        ));
    }

    #[test]
    fn mismatched_capacity_aborts() {
        let (bs, br) = fake_base_ots(80, 3);
        let cb = build_codebook(4, 80).unwrap();
        let mut s = ExtensionSender::setup(&br, cb.clone(), b"x", 4).unwrap();
        let mut r = ExtensionReceiver::setup(&bs, cb, b"x", 8).unwrap();
        let u = r.extend(&[0; 6]).unwrap();
        assert!(matches!(s.extend(&u, &[0; 6]), Err(OtExtError::CapacityExceeded { .. })));
    }

    #[test]
    fn setup_is_deterministic() {
        let run = || {
            let (mut s, mut r) = pair(4, 128, 10_000);
            assert_eq!(r.capacity(), 10_000);
            let u = r.extend(&(0..500).map(|i| (i * 7 % 4) as u32).collect::<Vec<_>>()).unwrap();
            let m = s.extend(&u, &vec![0b1010; 500]).unwrap();
            (u, m)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn random_transfers_across_rounds() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for (n, kappa) in [(4, 80), (4, 128), (2, 80), (8, 128)] {
            let (mut s, mut r) = pair(n, kappa, 3000);
            for round in [1usize, 63, 64, 65, 700, 1000] {
                let choices: Vec<u32> = (0..round).map(|_| rng.gen_range(0..n as u32)).collect();
                let msgs: Vec<u128> = (0..round).map(|_| rng.gen::<u128>() & ((1 << n) - 1)).collect();
                let u = r.extend(&choices).unwrap();
                let masked = s.extend(&u, &msgs).unwrap();
                let got = r.unmask(&masked).unwrap();
                for j in 0..round {
                    assert_eq!(got[j], (msgs[j] >> choices[j]) & 1 == 1);
                }
            }
        }
    }
}
