//! 1-out-of-2 base oblivious transfers from Diffie–Hellman key agreement
//! over a prime-order subgroup of `Z_p^*`.
//!
//! The sender publishes `A = g^a`. For choice `r` the receiver answers with
//! `B = g^b` (r = 0) or `B = A·g^b` (r = 1) and derives `k_R = H(A^b)`. The
//! sender derives `k_0 = H(B^a)` and `k_1 = H((B/A)^a)`, encrypts `x_0`
//! under `k_0` and `x_1` under `k_1`, and the receiver can open exactly
//! `x_r`.
//!
//! `H` is SHA-256 over a domain tag, the session id, the transfer index, `A`
//! and the shared element. Ciphertexts use ChaCha20-Poly1305, so a wrong key
//! or a corrupted ciphertext surfaces as [`BaseOtError::AuthFailure`].

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{CryptoRng, Rng, RngCore};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use thiserror::Error;

use crate::wire::{put_short_bytes, CountingChannel, FrameType, PayloadReader, WireError};

/// 1024-bit MODP group (Oakley group 2), generator 2.
const MODP_1024: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1\
29024E088A67CC74020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7EDEE386BFB5A899FA5\
AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF";

/// 2048-bit MODP group (group 14), generator 2.
const MODP_2048: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1\
29024E088A67CC74020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7EDEE386BFB5A899FA5\
AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F\
83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA18217C\
32905E462E36CE3BE39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

const KEY_DOMAIN: &[u8] = b"escot/base-ot/key/v1";

#[derive(Debug, Error)]
pub enum BaseOtError {
    #[error("invalid group element")]
    InvalidGroupElement,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("authenticated decryption failed")]
    AuthFailure,
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Symmetric key derived from a shared group element.
pub type SymmetricKey = [u8; 32];

/// A cyclic group `<g>` of order `q` inside `Z_p^*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    g: BigUint,
    order: BigUint,
    element_len: usize,
}

impl GroupParams {
    /// The standard safe-prime group for a modulus size of `phi` bits
    /// (1024 or 2048). `g = 2` generates the subgroup of quadratic residues,
    /// of prime order `(p - 1) / 2`.
    pub fn modp(phi: u32) -> Result<Self, BaseOtError> {
        let hex = match phi {
            1024 => MODP_1024,
            2048 => MODP_2048,
            other => {
                return Err(BaseOtError::InvalidParameter(format!(
                    "unsupported modulus size {other}"
                )))
            }
        };
        let p = BigUint::parse_bytes(hex.as_bytes(), 16).expect("static prime");
        let order = (&p - 1u32) >> 1;
        Ok(Self::custom(p, BigUint::from(2u32), order))
    }

    /// An arbitrary group; `order` must be the multiplicative order of `g`.
    pub fn custom(p: BigUint, g: BigUint, order: BigUint) -> Self {
        let element_len = (p.bits() as usize).div_ceil(8);
        Self {
            p,
            g,
            order,
            element_len,
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    /// Modulus size in bits.
    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    /// Serialized size of one element.
    pub fn element_len(&self) -> usize {
        self.element_len
    }

    pub fn pow_g(&self, e: &BigUint) -> BigUint {
        self.g.modpow(e, &self.p)
    }

    /// Rejects 0, 1, `p - 1`, values `>= p` and anything outside `<g>`.
    pub fn validate(&self, x: &BigUint) -> Result<(), BaseOtError> {
        let p_minus_1 = &self.p - 1u32;
        if x <= &BigUint::one() || x >= &p_minus_1 {
            return Err(BaseOtError::InvalidGroupElement);
        }
        if !x.modpow(&self.order, &self.p).is_one() {
            return Err(BaseOtError::InvalidGroupElement);
        }
        Ok(())
    }

    /// Uniform exponent in `[1, q - 1]`.
    pub fn random_exponent<R: RngCore>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.order)
    }

    /// Fixed-width big-endian encoding.
    pub fn encode(&self, x: &BigUint) -> Vec<u8> {
        let raw = x.to_bytes_be();
        let mut out = vec![0u8; self.element_len - raw.len()];
        out.extend_from_slice(&raw);
        out
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<BigUint, BaseOtError> {
        if bytes.len() != self.element_len {
            return Err(BaseOtError::InvalidGroupElement);
        }
        Ok(BigUint::from_bytes_be(bytes))
    }

    fn inverse(&self, x: &BigUint) -> BigUint {
        x.modpow(&(&self.p - 2u32), &self.p)
    }
}

/// Key derivation for base OTs of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyDerivation {
    pub session: [u8; 16],
}

impl KeyDerivation {
    pub fn new(session: [u8; 16]) -> Self {
        Self { session }
    }

    /// `H(session ‖ index ‖ A ‖ element)`.
    pub fn key(&self, params: &GroupParams, index: u64, sender_key: &BigUint, element: &BigUint) -> SymmetricKey {
        let mut h = Sha256::new();
        h.update(KEY_DOMAIN);
        h.update(self.session);
        h.update(index.to_be_bytes());
        h.update(params.encode(sender_key));
        h.update(params.encode(element));
        h.finalize().into()
    }
}

fn nonce_for(index: u64) -> Nonce {
    let mut n = [0u8; 12];
    n[4..].copy_from_slice(&index.to_be_bytes());
    Nonce::from(n)
}

fn seal(key: &SymmetricKey, index: u64, slot: u8, msg: &[u8]) -> Vec<u8> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .encrypt(&nonce_for(index), Payload { msg, aad: &[slot] })
        .expect("encryption of in-memory buffer")
}

fn open(key: &SymmetricKey, index: u64, slot: u8, ct: &[u8]) -> Result<Vec<u8>, BaseOtError> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .decrypt(&nonce_for(index), Payload { msg: ct, aad: &[slot] })
        .map_err(|_| BaseOtError::AuthFailure)
}

/// Sender side: one secret exponent `a` shared by a batch of transfers.
#[derive(Debug, Clone)]
pub struct BaseOtSender {
    params: GroupParams,
    a: BigUint,
    public: BigUint,
    public_inv: BigUint,
}

impl BaseOtSender {
    /// First move: sample `a`, publish `A = g^a`.
    pub fn new<R: RngCore + CryptoRng>(params: &GroupParams, rng: &mut R) -> Self {
        let a = params.random_exponent(rng);
        Self::with_exponent(params, a).expect("sampled exponent is non-degenerate")
    }

    /// Deterministic first move. Rejects exponents with `A = 1`.
    pub fn with_exponent(params: &GroupParams, a: BigUint) -> Result<Self, BaseOtError> {
        if (&a % &params.order).is_zero() {
            return Err(BaseOtError::InvalidParameter("degenerate exponent".into()));
        }
        let public = params.pow_g(&a);
        let public_inv = params.inverse(&public);
        Ok(Self {
            params: params.clone(),
            a,
            public,
            public_inv,
        })
    }

    /// `A`.
    pub fn public_key(&self) -> &BigUint {
        &self.public
    }

    /// `(k_0, k_1) = (H(B^a), H((B/A)^a))` for transfer `index`.
    pub fn derive_keys(
        &self,
        kdf: &KeyDerivation,
        index: u64,
        b: &BigUint,
    ) -> Result<(SymmetricKey, SymmetricKey), BaseOtError> {
        self.params.validate(b)?;
        let p = &self.params.p;
        let s0 = b.modpow(&self.a, p);
        let s1 = (b * &self.public_inv % p).modpow(&self.a, p);
        Ok((
            kdf.key(&self.params, index, &self.public, &s0),
            kdf.key(&self.params, index, &self.public, &s1),
        ))
    }

    /// Third move: encrypt `x_0` and `x_1` under the derived keys.
    pub fn encrypt(
        &self,
        kdf: &KeyDerivation,
        index: u64,
        b: &BigUint,
        x0: &[u8],
        x1: &[u8],
    ) -> Result<(Vec<u8>, Vec<u8>), BaseOtError> {
        let (k0, k1) = self.derive_keys(kdf, index, b)?;
        Ok((seal(&k0, index, 0, x0), seal(&k1, index, 1, x1)))
    }
}

/// Receiver side of one transfer.
#[derive(Debug, Clone)]
pub struct BaseOtReceiver {
    index: u64,
    choice: bool,
    message: BigUint,
    key: SymmetricKey,
}

impl BaseOtReceiver {
    /// Second move: sample `b` and answer `A` according to `choice`.
    pub fn new<R: RngCore + CryptoRng>(
        params: &GroupParams,
        kdf: &KeyDerivation,
        index: u64,
        sender_key: &BigUint,
        choice: bool,
        rng: &mut R,
    ) -> Result<Self, BaseOtError> {
        let b = params.random_exponent(rng);
        Self::with_exponent(params, kdf, index, sender_key, choice, b)
    }

    pub fn with_exponent(
        params: &GroupParams,
        kdf: &KeyDerivation,
        index: u64,
        sender_key: &BigUint,
        choice: bool,
        b: BigUint,
    ) -> Result<Self, BaseOtError> {
        params.validate(sender_key)?;
        let gb = params.pow_g(&b);
        let message = if choice {
            sender_key * gb % &params.p
        } else {
            gb
        };
        let shared = sender_key.modpow(&b, &params.p);
        Ok(Self {
            index,
            choice,
            message,
            key: kdf.key(params, index, sender_key, &shared),
        })
    }

    /// `B`.
    pub fn message(&self) -> &BigUint {
        &self.message
    }

    /// `k_R`.
    pub fn key(&self) -> &SymmetricKey {
        &self.key
    }

    pub fn choice(&self) -> bool {
        self.choice
    }

    /// Final step: open `e_r`.
    pub fn decrypt(&self, e0: &[u8], e1: &[u8]) -> Result<Vec<u8>, BaseOtError> {
        let (ct, slot) = if self.choice { (e1, 1) } else { (e0, 0) };
        open(&self.key, self.index, slot, ct)
    }
}

/// Outcome of a batch of base OTs, by role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaseOtBatch {
    /// Both messages of every transfer.
    Sender { seeds: Vec<[Vec<u8>; 2]> },
    /// The chosen message of every transfer.
    Receiver { choices: Vec<bool>, seeds: Vec<Vec<u8>> },
}

impl BaseOtBatch {
    pub fn len(&self) -> usize {
        match self {
            Self::Sender { seeds } => seeds.len(),
            Self::Receiver { seeds, .. } => seeds.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sender half of a batched run: one `A`, then all `B`s, then all
/// ciphertext pairs in a single frame.
pub fn send_base_ots<R, W, G>(
    ch: &mut CountingChannel<R, W>,
    params: &GroupParams,
    kdf: &KeyDerivation,
    seeds: Vec<[Vec<u8>; 2]>,
    rng: &mut G,
) -> Result<BaseOtBatch, BaseOtError>
where
    R: Read,
    W: Write,
    G: RngCore + CryptoRng,
{
    if seeds.is_empty() {
        return Err(BaseOtError::InvalidParameter("zero base OTs".into()));
    }
    let sender = BaseOtSender::new(params, rng);
    ch.send(FrameType::BaseOtSenderKey, &params.encode(sender.public_key()))?;
    ch.flush()?;

    let payload = ch.recv_expect(FrameType::BaseOtReceiverKeys, "BASEOT_RECEIVER_KEYS")?;
    if payload.len() != seeds.len() * params.element_len() {
        return Err(WireError::Malformed {
            frame: FrameType::BaseOtReceiverKeys,
            reason: format!("expected {} elements", seeds.len()),
        }
        .into());
    }
    let mut out = Vec::new();
    for (index, (chunk, pair)) in payload.chunks(params.element_len()).zip(&seeds).enumerate() {
        let b = params.decode(chunk)?;
        let (e0, e1) = sender.encrypt(kdf, index as u64, &b, &pair[0], &pair[1])?;
        put_short_bytes(&mut out, &e0);
        put_short_bytes(&mut out, &e1);
    }
    ch.send(FrameType::BaseOtCiphertexts, &out)?;
    ch.flush()?;
    Ok(BaseOtBatch::Sender { seeds })
}

/// Receiver half of a batched run.
pub fn receive_base_ots<R, W, G>(
    ch: &mut CountingChannel<R, W>,
    params: &GroupParams,
    kdf: &KeyDerivation,
    choices: Vec<bool>,
    rng: &mut G,
) -> Result<BaseOtBatch, BaseOtError>
where
    R: Read,
    W: Write,
    G: RngCore + CryptoRng,
{
    if choices.is_empty() {
        return Err(BaseOtError::InvalidParameter("zero base OTs".into()));
    }
    let payload = ch.recv_expect(FrameType::BaseOtSenderKey, "BASEOT_SENDER_KEY")?;
    let sender_key = params.decode(&payload)?;
    params.validate(&sender_key)?;

    let receivers = choices
        .iter()
        .enumerate()
        .map(|(i, &c)| BaseOtReceiver::new(params, kdf, i as u64, &sender_key, c, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(receivers.len() * params.element_len());
    for r in &receivers {
        out.extend_from_slice(&params.encode(r.message()));
    }
    ch.send(FrameType::BaseOtReceiverKeys, &out)?;
    ch.flush()?;

    let payload = ch.recv_expect(FrameType::BaseOtCiphertexts, "BASEOT_CIPHERTEXTS")?;
    let mut reader = PayloadReader::new(FrameType::BaseOtCiphertexts, &payload);
    let mut seeds = Vec::with_capacity(receivers.len());
    for r in &receivers {
        let e0 = reader.short_bytes()?;
        let e1 = reader.short_bytes()?;
        seeds.push(r.decrypt(e0, e1)?);
    }
    reader.finish()?;
    Ok(BaseOtBatch::Receiver { choices, seeds })
}

/// Role-specific input to [`run_base_ots`].
#[derive(Debug, Clone)]
pub enum BaseOtInput {
    /// Message pairs to offer.
    Sender(Vec<[Vec<u8>; 2]>),
    /// Choice bits.
    Receiver(Vec<bool>),
}

pub fn run_base_ots<R, W, G>(
    ch: &mut CountingChannel<R, W>,
    params: &GroupParams,
    kdf: &KeyDerivation,
    input: BaseOtInput,
    rng: &mut G,
) -> Result<BaseOtBatch, BaseOtError>
where
    R: Read,
    W: Write,
    G: RngCore + CryptoRng,
{
    match input {
        BaseOtInput::Sender(seeds) => send_base_ots(ch, params, kdf, seeds, rng),
        BaseOtInput::Receiver(choices) => receive_base_ots(ch, params, kdf, choices, rng),
    }
}

/// `count` random message pairs of `len` bytes.
pub fn random_seed_pairs<R: Rng>(count: usize, len: usize, rng: &mut R) -> Vec<[Vec<u8>; 2]> {
    (0..count)
        .map(|_| {
            let mut a = vec![0u8; len];
            let mut b = vec![0u8; len];
            rng.fill_bytes(&mut a);
            rng.fill_bytes(&mut b);
            [a, b]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> GroupParams {
        GroupParams::custom(23u32.into(), 5u32.into(), 22u32.into())
    }

    fn big(v: u32) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn toy_group_vectors() {
        let g = toy();
        let kdf = KeyDerivation::new([7; 16]);
        // 5^6 mod 23 = 8
        let sender = BaseOtSender::with_exponent(&g, big(6)).unwrap();
        assert_eq!(sender.public_key(), &big(8));

        // r = 0: B = 5^3 = 10, shared 8^3 = 6
        let r0 = BaseOtReceiver::with_exponent(&g, &kdf, 0, &big(8), false, big(3)).unwrap();
        assert_eq!(r0.message(), &big(10));
        assert_eq!(r0.key(), &kdf.key(&g, 0, &big(8), &big(6)));
        let (k0, k1) = sender.derive_keys(&kdf, 0, &big(10)).unwrap();
        assert_eq!(&k0, r0.key());
        assert_ne!(&k1, r0.key());

        // r = 1: B = 8 * 10 = 11; 8^-1 = 3, 11 * 3 = 10, 10^6 = 6
        let r1 = BaseOtReceiver::with_exponent(&g, &kdf, 0, &big(8), true, big(3)).unwrap();
        assert_eq!(r1.message(), &big(11));
        assert_eq!(g.inverse(&big(8)), big(3));
        let (k0, k1) = sender.derive_keys(&kdf, 0, &big(11)).unwrap();
        assert_eq!(&k1, r1.key());
        assert_eq!(k1, kdf.key(&g, 0, &big(8), &big(6)));
        assert_ne!(&k0, r1.key());
    }

    #[test]
    fn toy_end_to_end() {
        let g = toy();
        let kdf = KeyDerivation::new([1; 16]);
        let sender = BaseOtSender::with_exponent(&g, big(6)).unwrap();
        for (choice, expected) in [(false, 0xABu8), (true, 0xCD)] {
            let r = BaseOtReceiver::with_exponent(&g, &kdf, 3, &big(8), choice, big(3)).unwrap();
            let (e0, e1) = sender.encrypt(&kdf, 3, r.message(), &[0xAB], &[0xCD]).unwrap();
            assert_eq!(r.decrypt(&e0, &e1).unwrap(), vec![expected]);

            let (mut e0, mut e1) = (e0, e1);
            if choice {
                e1[0] ^= 1;
            } else {
                e0[0] ^= 1;
            }
            assert!(matches!(r.decrypt(&e0, &e1), Err(BaseOtError::AuthFailure)));
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let g = toy();
        let kdf = KeyDerivation::new([0; 16]);
        assert!(BaseOtSender::with_exponent(&g, big(0)).is_err());
        assert!(BaseOtSender::with_exponent(&g, big(22)).is_err());
        assert!(matches!(
            BaseOtReceiver::with_exponent(&g, &kdf, 0, &big(1), false, big(3)),
            Err(BaseOtError::InvalidGroupElement)
        ));
        assert!(GroupParams::modp(512).is_err());
    }

    #[test]
    fn membership_rejects_small_subgroup_elements() {
        let g = GroupParams::modp(1024).unwrap();
        let p = g.modulus().clone();
        for bad in [big(0), big(1), &p - 1u32, p.clone()] {
            assert!(g.validate(&bad).is_err());
        }
        // -4 = p - 4 is a non-residue since -1 is one (p = 3 mod 4)
        assert!(g.validate(&(&p - 4u32)).is_err());
        assert!(g.validate(&big(4)).is_ok());
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let x = g.pow_g(&g.random_exponent(&mut rng));
        assert!(g.validate(&x).is_ok());
    }

    /// Fermat test with a handful of bases; enough to catch a mistyped
    /// constant.
    fn probably_prime(n: &BigUint) -> bool {
        let n1 = n - 1u32;
        [2u32, 3, 5, 7, 11, 13].iter().all(|&a| big(a).modpow(&n1, n).is_one())
    }

    #[test]
    fn modp_constants_are_safe_primes() {
        for phi in [1024, 2048] {
            let g = GroupParams::modp(phi).unwrap();
            assert_eq!(g.bits(), phi as u64);
            assert_eq!(g.element_len(), phi as usize / 8);
            assert!(probably_prime(g.modulus()));
            assert!(probably_prime(g.order()));
            assert!(g.pow_g(g.order()).is_one());
        }
    }

    #[test]
    fn distinct_rng_states_give_distinct_exponents() {
        let g = GroupParams::modp(1024).unwrap();
        let a = BaseOtSender::new(&g, &mut ChaCha20Rng::seed_from_u64(1));
        let b = BaseOtSender::new(&g, &mut ChaCha20Rng::seed_from_u64(2));
        assert_ne!(a.public_key(), b.public_key());
    }

    #[test]
    fn equal_messages_encrypt_differently() {
        let g = GroupParams::modp(1024).unwrap();
        let kdf = KeyDerivation::new([2; 16]);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let s = BaseOtSender::new(&g, &mut rng);
        let r = BaseOtReceiver::new(&g, &kdf, 0, s.public_key(), false, &mut rng).unwrap();
        let (e0, e1) = s.encrypt(&kdf, 0, r.message(), b"same", b"same").unwrap();
        assert_ne!(e0, e1);
        assert_eq!(g.decode(&g.encode(r.message())).unwrap(), *r.message());
    }

    #[test]
    fn keys_agree_and_separate_at_1024() {
        let g = GroupParams::modp(1024).unwrap();
        let kdf = KeyDerivation::new([3; 16]);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for trial in 0..20u64 {
            let s = BaseOtSender::new(&g, &mut rng);
            let choice = rng.gen::<bool>();
            let r = BaseOtReceiver::new(&g, &kdf, trial, s.public_key(), choice, &mut rng).unwrap();
            let (k0, k1) = s.derive_keys(&kdf, trial, r.message()).unwrap();
            let (kr, other) = if choice { (k1, k0) } else { (k0, k1) };
            assert_eq!(&kr, r.key());
            assert_ne!(&other, r.key());
        }
    }
}
