//! Secure equality of single characters through 1-out-of-n OT.
//!
//! For a database character `y` the sender offers the n one-bit messages
//! `M_k = 1` iff `(k - y) mod n = 0`, i.e. a one-hot vector at `y`. The
//! receiver selects with its own character `x` and obtains `M_x`, which is 1
//! exactly when `x = y`. The sender learns nothing; the receiver learns one
//! equality bit per comparison.

use std::io::{Read, Write};

use thiserror::Error;

use crate::alphabet::EncodedSequence;
use crate::otext::{CorrectionMatrix, ExtensionReceiver, ExtensionSender, MaskedMessageSet, OtExtError};
use crate::wire::{CountingChannel, FrameType, WireError};

#[derive(Debug, Error)]
pub enum EscotError {
    #[error("symbol code {code} out of range for alphabet of size {n}")]
    CodeOutOfRange { code: u32, n: usize },
    #[error("pair index {index} outside sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("peer sent {got} correction rows for {expected} comparisons")]
    BatchMismatch { expected: usize, got: usize },
    #[error(transparent)]
    OtExt(#[from] OtExtError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// The n sender messages for one database character; bit `k` is `M_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtMessageVector {
    bits: u128,
    n: usize,
}

impl OtMessageVector {
    pub fn bit(&self, k: usize) -> bool {
        (self.bits >> k) & 1 == 1
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.n).map(|k| u8::from(self.bit(k))).collect()
    }

    /// Packed form handed to the OT extension.
    pub fn mask(&self) -> u128 {
        self.bits
    }
}

/// Evaluates `M_k = [(k - y) mod n = 0]` for `k` in `0..n`.
pub fn build_messages(y: u32, n: usize) -> Result<OtMessageVector, EscotError> {
    if y as usize >= n || n > 128 {
        return Err(EscotError::CodeOutOfRange { code: y, n });
    }
    let bits = (0..n)
        .filter(|&k| (k + n - y as usize).is_multiple_of(n))
        .fold(0u128, |acc, k| acc | (1 << k));
    Ok(OtMessageVector { bits, n })
}

/// A set of comparisons with both parties' views, aligned by position.
/// Only used where one process holds both sides (tests, simulations).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComparisonBatch {
    pub pairs: Vec<(usize, usize)>,
    pub choices: Vec<u32>,
    pub vectors: Vec<OtMessageVector>,
    pub results: Vec<bool>,
}

/// Sender side of one batch: answers the receiver's correction matrix with
/// masked one-hot vectors for `y[j]` of every pair.
pub fn compare_batch_sender<R: Read, W: Write>(
    y: &EncodedSequence,
    pairs: &[(usize, usize)],
    ext: &mut ExtensionSender,
    ch: &mut CountingChannel<R, W>,
) -> Result<(), EscotError> {
    let n = ext.codebook().n();
    let messages = pairs
        .iter()
        .map(|&(_, j)| {
            let code = *y.codes().get(j).ok_or(EscotError::IndexOutOfRange {
                index: j,
                len: y.len(),
            })?;
            build_messages(code as u32, n).map(|m| m.mask())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let payload = ch.recv_expect(FrameType::ExtendCorrection, "EXTEND_CORRECTION")?;
    let u = CorrectionMatrix::from_bytes(&payload, ext.codebook().kappa())?;
    if u.len() != pairs.len() {
        return Err(EscotError::BatchMismatch {
            expected: pairs.len(),
            got: u.len(),
        });
    }
    ch.add_logical_bits_in(u.bit_len());

    let masked = ext.extend(&u, &messages)?;
    ch.add_logical_bits_out(masked.bit_len());
    ch.send(FrameType::ExtendMasked, masked.as_bytes())?;
    ch.flush()?;
    Ok(())
}

/// Receiver side of one batch: returns `x[i] == y[j]` for every pair.
pub fn compare_batch_receiver<R: Read, W: Write>(
    x: &EncodedSequence,
    pairs: &[(usize, usize)],
    ext: &mut ExtensionReceiver,
    ch: &mut CountingChannel<R, W>,
) -> Result<Vec<bool>, EscotError> {
    let choices = pairs
        .iter()
        .map(|&(i, _)| {
            x.codes().get(i).map(|&c| c as u32).ok_or(EscotError::IndexOutOfRange {
                index: i,
                len: x.len(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let u = ext.extend(&choices)?;
    ch.add_logical_bits_out(u.bit_len());
    ch.send(FrameType::ExtendCorrection, &u.to_bytes())?;
    ch.flush()?;

    let payload = ch.recv_expect(FrameType::ExtendMasked, "EXTEND_MASKED")?;
    let masked = MaskedMessageSet::from_bytes(payload, ext.codebook().n(), pairs.len())?;
    ch.add_logical_bits_in(masked.bit_len());
    Ok(ext.unmask(&masked)?)
}

/// Runs both sides of one batch in-process, without a transport.
pub fn compare_in_process(
    x: &EncodedSequence,
    y: &EncodedSequence,
    pairs: &[(usize, usize)],
    sender: &mut ExtensionSender,
    receiver: &mut ExtensionReceiver,
) -> Result<ComparisonBatch, EscotError> {
    let n = sender.codebook().n();
    let mut batch = ComparisonBatch {
        pairs: pairs.to_vec(),
        ..Default::default()
    };
    for &(i, j) in pairs {
        let xi = *x.codes().get(i).ok_or(EscotError::IndexOutOfRange { index: i, len: x.len() })?;
        let yj = *y.codes().get(j).ok_or(EscotError::IndexOutOfRange { index: j, len: y.len() })?;
        batch.choices.push(xi as u32);
        batch.vectors.push(build_messages(yj as u32, n)?);
    }
    let u = receiver.extend(&batch.choices)?;
    let masks: Vec<u128> = batch.vectors.iter().map(OtMessageVector::mask).collect();
    let masked = sender.extend(&u, &masks)?;
    batch.results = receiver.unmask(&masked)?;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_vectors() {
        assert_eq!(build_messages(2, 4).unwrap().to_vec(), vec![0, 0, 1, 0]);
        assert_eq!(build_messages(0, 4).unwrap().to_vec(), vec![1, 0, 0, 0]);
        assert!(matches!(
            build_messages(4, 4),
            Err(EscotError::CodeOutOfRange { code: 4, n: 4 })
        ));
        for n in [2usize, 4, 16, 128] {
            for y in 0..n as u32 {
                let m = build_messages(y, n).unwrap();
                assert_eq!(m.mask().count_ones(), 1);
                assert!(m.bit(y as usize));
            }
        }
    }

    #[test]
    fn in_process_matches_cleartext() {
        use crate::otext::{build_codebook, tests::fake_base_ots};
        let (bs, br) = fake_base_ots(80, 5);
        let cb = build_codebook(4, 80).unwrap();
        let mut s = ExtensionSender::setup(&br, cb.clone(), b"t", 100).unwrap();
        let mut r = ExtensionReceiver::setup(&bs, cb, b"t", 100).unwrap();
        let x = EncodedSequence::new("x", vec![0, 1, 2, 3], 4).unwrap();
        let y = EncodedSequence::new("y", vec![3, 1, 2, 0], 4).unwrap();
        let pairs: Vec<_> = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        let batch = compare_in_process(&x, &y, &pairs, &mut s, &mut r).unwrap();
        for (t, &(i, j)) in pairs.iter().enumerate() {
            assert_eq!(batch.results[t], x.codes()[i] == y.codes()[j]);
        }
        assert!(compare_in_process(&x, &y, &[(4, 0)], &mut s, &mut r).is_err());
    }
}
