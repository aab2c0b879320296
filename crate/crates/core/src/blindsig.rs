//! Chaum-style RSA blind signatures over a full-domain hash.
//!
//! A ballot is committed to as `SHA-256(ballot) ‖ uuid` ([`BallotDigest`]), mapped into
//! the signing domain with [`fdh`], blinded by `r^e`, signed with the private exponent,
//! and unblinded by `r⁻¹`. The unblinded value is an ordinary RSA-FDH signature on the
//! digest, so anyone holding the public key can [`verify`] it.

use std::sync::OnceLock;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hexfmt::{self, HexError};

/// Length of a [`hash_ballot`] digest in bytes.
pub const HASH_LEN: usize = 32;
/// Length of a [`Uuid`] in bytes.
pub const UUID_LEN: usize = 16;
/// Length of a [`BallotDigest`] in bytes.
pub const BALLOT_DIGEST_LEN: usize = HASH_LEN + UUID_LEN;

/// Smallest modulus [`keygen`] will produce.
pub const MIN_KEY_BITS: u64 = 16;
/// Modulus size used outside of enumeration tests.
pub const DEFAULT_KEY_BITS: u64 = 2048;
/// Bit length of the fixed toy modulus 3233.
pub const TOY_KEY_BITS: u64 = 12;

const TOY_P: u32 = 61;
const TOY_Q: u32 = 53;
const TOY_E: u32 = 17;
const TOY_D: u32 = 2753;
const DEFAULT_E: u32 = 65537;
const MILLER_RABIN_ROUNDS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlindSigError {
    #[error("key size of {0} bits is below the {MIN_KEY_BITS}-bit minimum")]
    KeyTooSmall(u64),
    #[error("value is not a unit modulo n")]
    NonUnit,
    #[error("signed blinded ballot is the refusal sentinel 0")]
    RefusalSentinel,
    #[error("value is outside [1, n)")]
    OutOfRange,
    #[error("invalid key: {0}")]
    InvalidKey(&'static str),
    #[error("malformed key file: {0}")]
    KeyFile(String),
    #[error(transparent)]
    Hex(#[from] HexError),
}

/// The verifying half of a signing key: modulus `n` and public exponent `e`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PublicKey {
    modulus: BigUint,
    public_exponent: BigUint,
}

impl PublicKey {
    pub fn new(modulus: BigUint, public_exponent: BigUint) -> Result<Self, BlindSigError> {
        if modulus < BigUint::from(4u32) || public_exponent < BigUint::from(3u32) {
            return Err(BlindSigError::InvalidKey("modulus or exponent too small"));
        }
        Ok(Self { modulus, public_exponent })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn public_exponent(&self) -> &BigUint {
        &self.public_exponent
    }

    pub fn bits(&self) -> u64 {
        self.modulus.bits()
    }

    /// `x^e mod n`.
    pub fn apply(&self, x: &BigUint) -> BigUint {
        x.modpow(&self.public_exponent, &self.modulus)
    }

    pub fn is_unit(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.modulus && x.gcd(&self.modulus).is_one()
    }

    pub fn to_key_file(&self) -> String {
        KeyFile { n: hexfmt::int_to_hex(&self.modulus), e: hexfmt::int_to_hex(&self.public_exponent), d: None }.render()
    }

    /// Reads the public part of a key file; a private exponent, if present, is ignored.
    pub fn from_key_file(text: &str) -> Result<Self, BlindSigError> {
        let file = KeyFile::parse(text)?;
        Self::new(hexfmt::int_from_hex(&file.n)?, hexfmt::int_from_hex(&file.e)?)
    }
}

/// RSA signing key. `n` is a product of two distinct primes and `e·d ≡ 1 (mod λ(n))`.
///
/// Equality compares `(n, e, d)`; the factors are kept only when known.
#[derive(Debug, Clone)]
pub struct KeyPair {
    public: PublicKey,
    private_exponent: BigUint,
    factors: Option<(BigUint, BigUint)>,
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.private_exponent == other.private_exponent
    }
}

impl Eq for KeyPair {}

impl KeyPair {
    /// Builds a key from its prime factors. `d` is taken modulo `λ(n) = lcm(p−1, q−1)`.
    pub fn from_primes(p: BigUint, q: BigUint, e: BigUint) -> Result<Self, BlindSigError> {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        if p == q {
            return Err(BlindSigError::InvalidKey("p and q must be distinct"));
        }
        if !is_probable_prime(&p, MILLER_RABIN_ROUNDS, &mut rng)
            || !is_probable_prime(&q, MILLER_RABIN_ROUNDS, &mut rng)
        {
            return Err(BlindSigError::InvalidKey("factors must be prime"));
        }
        let lambda = carmichael(&p, &q);
        let d = e.modinv(&lambda).ok_or(BlindSigError::InvalidKey("e is not invertible modulo λ(n)"))?;
        let public = PublicKey::new(&p * &q, e)?;
        Ok(Self { public, private_exponent: d, factors: Some((p, q)) })
    }

    /// Builds a key from `(n, e, d)` alone, as read back from a key file. The exponent pair
    /// is checked by a round trip on small witnesses since `λ(n)` is not available.
    pub fn from_parts(
        modulus: BigUint,
        public_exponent: BigUint,
        private_exponent: BigUint,
    ) -> Result<Self, BlindSigError> {
        let public = PublicKey::new(modulus, public_exponent)?;
        let key = Self { public, private_exponent, factors: None };
        for witness in [2u32, 3, 5, 7] {
            let x = BigUint::from(witness) % key.public.modulus();
            if key.public.apply(&key.apply_private(&x)) != x {
                return Err(BlindSigError::InvalidKey("e and d are not inverse exponents"));
            }
        }
        Ok(key)
    }

    /// The enumeration-test parameter set: p = 61, q = 53, e = 17, giving n = 3233, d = 2753.
    ///
    /// Uses the textbook exponent `d = e⁻¹ mod φ(n) = 2753`; the minimal `e⁻¹ mod λ(n)` is 413
    /// and both sign identically.
    pub fn toy() -> Self {
        let mut key = Self::from_primes(TOY_P.into(), TOY_Q.into(), TOY_E.into()).expect("toy parameters are valid");
        key.private_exponent = BigUint::from(TOY_D);
        key
    }

    /// Generates a key whose modulus has exactly `bits` bits.
    pub fn generate<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, BlindSigError> {
        if bits < MIN_KEY_BITS {
            return Err(BlindSigError::KeyTooSmall(bits));
        }
        let e = BigUint::from(DEFAULT_E);
        loop {
            let p = random_prime(bits - bits / 2, rng);
            let q = random_prime(bits / 2, rng);
            if p == q || !e.gcd(&carmichael(&p, &q)).is_one() {
                continue;
            }
            return Self::from_primes(p, q, e.clone());
        }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.private_exponent
    }

    /// `λ(n)`, when the key was built from its factors.
    pub fn carmichael(&self) -> Option<BigUint> {
        self.factors.as_ref().map(|(p, q)| carmichael(p, q))
    }

    /// `x^d mod n`.
    pub fn apply_private(&self, x: &BigUint) -> BigUint {
        x.modpow(&self.private_exponent, self.public.modulus())
    }

    pub fn to_key_file(&self) -> String {
        KeyFile {
            n: hexfmt::int_to_hex(self.public.modulus()),
            e: hexfmt::int_to_hex(self.public.public_exponent()),
            d: Some(hexfmt::int_to_hex(&self.private_exponent)),
        }
        .render()
    }

    pub fn from_key_file(text: &str) -> Result<Self, BlindSigError> {
        let file = KeyFile::parse(text)?;
        let d = file.d.as_deref().ok_or_else(|| BlindSigError::KeyFile("missing private exponent d".into()))?;
        Self::from_parts(hexfmt::int_from_hex(&file.n)?, hexfmt::int_from_hex(&file.e)?, hexfmt::int_from_hex(d)?)
    }
}

/// Deterministic [`KeyPair::generate`] from a 64-bit seed.
pub fn keygen(bits: u64, seed: u64) -> Result<KeyPair, BlindSigError> {
    KeyPair::generate(bits, &mut ChaCha20Rng::seed_from_u64(seed))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    n: String,
    e: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<String>,
}

impl KeyFile {
    fn render(&self) -> String {
        toml::to_string(self).expect("key file fields are plain strings")
    }

    fn parse(text: &str) -> Result<Self, BlindSigError> {
        toml::from_str(text).map_err(|e| BlindSigError::KeyFile(e.message().to_owned()))
    }
}

fn carmichael(p: &BigUint, q: &BigUint) -> BigUint {
    let one = BigUint::one();
    (p - &one).lcm(&(q - &one))
}

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        const LIMIT: usize = 2000;
        let mut composite = vec![false; LIMIT];
        let mut primes = Vec::new();
        for i in 2..LIMIT {
            if !composite[i] {
                primes.push(i as u32);
                (i * i..LIMIT).step_by(i).for_each(|j| composite[j] = true);
            }
        }
        primes
    })
}

/// Trial division by small primes followed by Miller–Rabin with random bases.
pub(crate) fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in small_primes() {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().expect("n - 1 is even and non-zero");
    let d = &n_minus_one >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A random prime with exactly `bits` bits and its top two bits set, so that the product
/// of two such primes has exactly the sum of their lengths.
fn random_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return candidate;
        }
    }
}

/// The voter's blinding factor `r`, a unit modulo `n`. Never leaves the voter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindingFactor(BigUint);

impl BlindingFactor {
    pub fn new(r: BigUint, key: &PublicKey) -> Result<Self, BlindSigError> {
        if r.is_zero() || &r >= key.modulus() {
            return Err(BlindSigError::OutOfRange);
        }
        if !key.is_unit(&r) {
            return Err(BlindSigError::NonUnit);
        }
        Ok(Self(r))
    }

    /// Draws uniformly from the units of `Z/nZ` by rejection.
    pub fn random<R: Rng + ?Sized>(key: &PublicKey, rng: &mut R) -> Self {
        let one = BigUint::one();
        loop {
            let r = rng.gen_biguint_range(&one, key.modulus());
            if key.is_unit(&r) {
                return Self(r);
            }
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

/// 128-bit ballot identifier; doubles as the contract's double-vote nullifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Uuid([u8; UUID_LEN]);

impl Uuid {
    pub fn from_bytes(bytes: [u8; UUID_LEN]) -> Self {
        Self(bytes)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.gen())
    }

    pub fn as_bytes(&self) -> &[u8; UUID_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, HexError> {
        hexfmt::fixed_from_hex(text).map(Self)
    }
}

impl std::fmt::Display for Uuid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// `Hash(ballot) ‖ uuid`: the byte string the organizer ends up signing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BallotDigest([u8; BALLOT_DIGEST_LEN]);

impl BallotDigest {
    pub fn new(ballot: &[u8], uuid: &Uuid) -> Self {
        Self::from_parts(&hash_ballot(ballot), uuid)
    }

    pub fn from_parts(hash: &[u8; HASH_LEN], uuid: &Uuid) -> Self {
        let mut bytes = [0u8; BALLOT_DIGEST_LEN];
        bytes[..HASH_LEN].copy_from_slice(hash);
        bytes[HASH_LEN..].copy_from_slice(uuid.as_bytes());
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; BALLOT_DIGEST_LEN] {
        &self.0
    }
}

macro_rules! residue {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(BigUint);

        impl $name {
            pub fn from_value(value: BigUint) -> Self {
                Self(value)
            }

            pub fn value(&self) -> &BigUint {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hexfmt::int_to_hex(&self.0)
            }

            pub fn from_hex(text: &str) -> Result<Self, HexError> {
                hexfmt::int_from_hex(text).map(Self)
            }
        }
    };
}

residue!(
    /// `fdh(digest) · r^e mod n`, the only form of the ballot the organizer sees.
    BlindedBallot
);
residue!(
    /// `blinded^d mod n`, or `0` when the organizer refuses.
    SignedBlindedBallot
);
residue!(
    /// `fdh(digest)^d mod n`; cast together with the ballot and uuid.
    SignedBallot
);

impl SignedBlindedBallot {
    pub fn refusal() -> Self {
        Self(BigUint::zero())
    }

    pub fn is_refusal(&self) -> bool {
        self.0.is_zero()
    }
}

/// SHA-256 of the ballot bytes.
pub fn hash_ballot(ballot: &[u8]) -> [u8; HASH_LEN] {
    Sha256::digest(ballot).into()
}

/// Full-domain hash of a ballot digest into the units of `Z/nZ`.
///
/// SHA-256 is expanded in counter mode to the byte length of `n`, masked to its bit length,
/// and re-drawn under an incremented outer counter until the value lies in `[1, n)` and is
/// coprime to `n`.
pub fn fdh(digest: &BallotDigest, modulus: &BigUint) -> BigUint {
    let bits = modulus.bits();
    let len = bits.div_ceil(8) as usize;
    let excess = (len as u64 * 8 - bits) as u32;
    for attempt in 0u32.. {
        let mut out = Vec::with_capacity(len + HASH_LEN);
        for block in 0u32.. {
            if out.len() >= len {
                break;
            }
            let mut hasher = Sha256::new();
            hasher.update(b"blindvote/fdh");
            hasher.update(attempt.to_be_bytes());
            hasher.update(block.to_be_bytes());
            hasher.update(digest.as_bytes());
            out.extend_from_slice(&hasher.finalize());
        }
        out.truncate(len);
        out[0] &= 0xff >> excess;
        let candidate = BigUint::from_bytes_be(&out);
        if !candidate.is_zero() && &candidate < modulus && candidate.gcd(modulus).is_one() {
            return candidate;
        }
    }
    unreachable!("fdh counter exhausted")
}

pub fn blind(digest: &BallotDigest, r: &BlindingFactor, key: &PublicKey) -> Result<BlindedBallot, BlindSigError> {
    if !key.is_unit(r.value()) {
        return Err(BlindSigError::NonUnit);
    }
    let masked = fdh(digest, key.modulus()) * key.apply(r.value()) % key.modulus();
    Ok(BlindedBallot(masked))
}

pub fn sign_blinded(blinded: &BlindedBallot, key: &KeyPair) -> SignedBlindedBallot {
    SignedBlindedBallot(key.apply_private(blinded.value()))
}

/// Signs a digest directly, without blinding.
pub fn sign_digest(digest: &BallotDigest, key: &KeyPair) -> SignedBallot {
    SignedBallot(key.apply_private(&fdh(digest, key.public().modulus())))
}

pub fn unblind(
    signed_blinded: &SignedBlindedBallot,
    r: &BlindingFactor,
    key: &PublicKey,
) -> Result<SignedBallot, BlindSigError> {
    if signed_blinded.is_refusal() {
        return Err(BlindSigError::RefusalSentinel);
    }
    let inverse = r.value().modinv(key.modulus()).ok_or(BlindSigError::NonUnit)?;
    Ok(SignedBallot(signed_blinded.value() * inverse % key.modulus()))
}

pub fn verify(signed: &SignedBallot, digest: &BallotDigest, key: &PublicKey) -> bool {
    signed.value() < key.modulus() && key.apply(signed.value()) == fdh(digest, key.modulus())
}
