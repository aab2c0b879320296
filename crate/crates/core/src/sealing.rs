//! Randomized hybrid encryption of ballot payloads under the sealing key.
//!
//! A fresh random `x ∈ [1, n)` is wrapped as `x^e mod n`; the symmetric key is
//! `SHA-256(tag ‖ x)` and the ballot is sealed with ChaCha20-Poly1305 under a random nonce.
//! Layout: `wrapped (byte length of n, big-endian) ‖ nonce (12) ‖ ciphertext ‖ tag (16)`.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blindsig::{KeyPair, PublicKey};

const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SealError {
    #[error("sealed payload is truncated")]
    Truncated,
    #[error("sealed payload failed authentication")]
    Authentication,
}

fn width(key: &PublicKey) -> usize {
    key.bits().div_ceil(8) as usize
}

fn symmetric_key(x: &BigUint, width: usize) -> Key {
    let mut hasher = Sha256::new();
    hasher.update(b"blindvote/seal");
    hasher.update(to_fixed(x, width));
    hasher.finalize()
}

fn to_fixed(x: &BigUint, width: usize) -> Vec<u8> {
    let raw = x.to_bytes_be();
    let mut out = vec![0u8; width.saturating_sub(raw.len())];
    out.extend_from_slice(&raw);
    out
}

pub fn seal<R: Rng + ?Sized>(plaintext: &[u8], key: &PublicKey, rng: &mut R) -> Vec<u8> {
    let width = width(key);
    let x = rng.gen_biguint_range(&BigUint::one(), key.modulus());
    let nonce: [u8; NONCE_LEN] = rng.gen();
    let cipher = ChaCha20Poly1305::new(&symmetric_key(&x, width));
    let body = cipher.encrypt(Nonce::from_slice(&nonce), plaintext).expect("in-memory encryption does not fail");
    let mut out = to_fixed(&key.apply(&x), width);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    out
}

pub fn open(sealed: &[u8], key: &KeyPair) -> Result<Vec<u8>, SealError> {
    let width = width(key.public());
    if sealed.len() < width + NONCE_LEN + TAG_LEN {
        return Err(SealError::Truncated);
    }
    let (wrapped, rest) = sealed.split_at(width);
    let (nonce, body) = rest.split_at(NONCE_LEN);
    let x = key.apply_private(&BigUint::from_bytes_be(wrapped));
    ChaCha20Poly1305::new(&symmetric_key(&x, width))
        .decrypt(Nonce::from_slice(nonce), body)
        .map_err(|_| SealError::Authentication)
}
