//! The election contract: immutable parameters, the blind-signature check, the judge
//! function over the ballot box, tallying, and the sealed-result publish option.
//!
//! The sign/check window is `[st, ct)`, the vote window is `[ct, et)`, and tallying
//! opens at `et`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blindsig::{self, BallotDigest, BlindedBallot, KeyPair, PublicKey, SignedBallot, SignedBlindedBallot, Uuid};
use crate::hexfmt::{self, HexError};
use crate::ledger::Address;
use crate::sealing::{self, SealError};

/// Which contract operation a window check guarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Sign,
    Cast,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Sign => "sign",
            Phase::Cast => "cast",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("phase boundaries must satisfy st < ct < et (got {st}, {ct}, {et})")]
    BadWindow { st: u64, ct: u64, et: u64 },
    #[error("a contract is already deployed at {0}")]
    Redeploy(Address),
    #[error("no contract is deployed at {0}")]
    UnknownContract(Address),
    #[error("{phase} is only accepted in [{start}, {end}), clock is {now}")]
    OutOfWindow { phase: Phase, now: u64, start: u64, end: u64 },
    #[error("the election is open until {et}, clock is {now}")]
    ElectionOpen { now: u64, et: u64 },
    #[error("the result is sealed until the sealing key is published")]
    ResultSealed,
    #[error("the published key does not match the sealing key")]
    KeyMismatch,
    #[error("the election was deployed without a sealing key")]
    NotSealed,
    #[error("stored ballot for uuid {0} could not be unsealed")]
    Unseal(Uuid),
}

impl ContractError {
    /// Stable identifier recorded in transcripts.
    pub fn code(&self) -> &'static str {
        match self {
            ContractError::BadWindow { .. } => "bad-window",
            ContractError::Redeploy(_) => "redeploy",
            ContractError::UnknownContract(_) => "unknown-contract",
            ContractError::OutOfWindow { .. } => "out-of-window",
            ContractError::ElectionOpen { .. } => "election-open",
            ContractError::ResultSealed => "result-sealed",
            ContractError::KeyMismatch => "key-mismatch",
            ContractError::NotSealed => "not-sealed",
            ContractError::Unseal(_) => "unseal",
        }
    }
}

/// Vote-start, vote-check and vote-end times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Windows {
    st: u64,
    ct: u64,
    et: u64,
}

impl Windows {
    pub fn new(st: u64, ct: u64, et: u64) -> Result<Self, ContractError> {
        if st < ct && ct < et {
            Ok(Self { st, ct, et })
        } else {
            Err(ContractError::BadWindow { st, ct, et })
        }
    }

    pub fn st(&self) -> u64 {
        self.st
    }

    pub fn ct(&self) -> u64 {
        self.ct
    }

    pub fn et(&self) -> u64 {
        self.et
    }

    pub fn in_sign_window(&self, now: u64) -> bool {
        (self.st..self.ct).contains(&now)
    }

    pub fn in_vote_window(&self, now: u64) -> bool {
        (self.ct..self.et).contains(&now)
    }

    pub fn require(&self, phase: Phase, now: u64) -> Result<(), ContractError> {
        let (start, end) = match phase {
            Phase::Sign => (self.st, self.ct),
            Phase::Cast => (self.ct, self.et),
        };
        if (start..end).contains(&now) {
            Ok(())
        } else {
            Err(ContractError::OutOfWindow { phase, now, start, end })
        }
    }

    pub fn require_closed(&self, now: u64) -> Result<(), ContractError> {
        if now >= self.et {
            Ok(())
        } else {
            Err(ContractError::ElectionOpen { now, et: self.et })
        }
    }
}

/// Fixed at deployment; there is no operation that changes them afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionParams {
    pk: PublicKey,
    windows: Windows,
    sealing_pk: Option<PublicKey>,
}

impl ElectionParams {
    pub fn new(pk: PublicKey, windows: Windows, sealing_pk: Option<PublicKey>) -> Self {
        Self { pk, windows, sealing_pk }
    }

    pub fn pk(&self) -> &PublicKey {
        &self.pk
    }

    pub fn windows(&self) -> &Windows {
        &self.windows
    }

    pub fn sealed(&self) -> bool {
        self.sealing_pk.is_some()
    }

    pub fn sealing_pk(&self) -> Option<&PublicKey> {
        self.sealing_pk.as_ref()
    }
}

/// uuid → accepted ballot payload. Keys double as the set of spent uuids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BallotBox {
    entries: BTreeMap<Uuid, Vec<u8>>,
}

impl BallotBox {
    pub fn contains(&self, uuid: &Uuid) -> bool {
        self.entries.contains_key(uuid)
    }

    pub fn get(&self, uuid: &Uuid) -> Option<&[u8]> {
        self.entries.get(uuid).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Uuid, &[u8])> {
        self.entries.iter().map(|(uuid, ballot)| (uuid, ballot.as_slice()))
    }

    fn insert_fresh(&mut self, uuid: Uuid, ballot: Vec<u8>) -> bool {
        use std::collections::btree_map::Entry;
        match self.entries.entry(uuid) {
            Entry::Occupied(_) => false,
            Entry::Vacant(slot) => {
                slot.insert(ballot);
                true
            }
        }
    }
}

/// Multiset of ballot payloads. Serializes as a map from ballot hex to count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, u64>", into = "BTreeMap<String, u64>")]
pub struct Tally {
    counts: BTreeMap<Vec<u8>, u64>,
}

impl Tally {
    pub fn add(&mut self, ballot: &[u8]) {
        *self.counts.entry(ballot.to_vec()).or_default() += 1;
    }

    pub fn count(&self, ballot: &[u8]) -> u64 {
        self.counts.get(ballot).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u64)> {
        self.counts.iter().map(|(ballot, count)| (ballot.as_slice(), *count))
    }

    /// Hash of [`Tally::render`], recorded in transcripts in place of the full tally.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    /// `<ballot hex> <count>` per line, sorted by ballot hex.
    pub fn render(&self) -> String {
        self.counts.iter().map(|(ballot, count)| format!("{} {count}\n", hexfmt::bytes_to_hex(ballot))).collect()
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut tally = Tally::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (ballot, count) = line.split_once(' ').ok_or_else(|| format!("malformed tally line {line:?}"))?;
            let ballot = hexfmt::bytes_from_hex(ballot).map_err(|e| e.to_string())?;
            let count: u64 = count.parse().map_err(|_| format!("bad count in {line:?}"))?;
            tally.counts.insert(ballot, count);
        }
        Ok(tally)
    }
}

impl TryFrom<BTreeMap<String, u64>> for Tally {
    type Error = HexError;

    fn try_from(map: BTreeMap<String, u64>) -> Result<Self, HexError> {
        let mut counts = BTreeMap::new();
        for (ballot, count) in map {
            counts.insert(hexfmt::bytes_from_hex(&ballot)?, count);
        }
        Ok(Self { counts })
    }
}

impl From<Tally> for BTreeMap<String, u64> {
    fn from(tally: Tally) -> Self {
        tally.counts.into_iter().map(|(ballot, count)| (hexfmt::bytes_to_hex(&ballot), count)).collect()
    }
}

impl<B: AsRef<[u8]>> FromIterator<B> for Tally {
    fn from_iter<I: IntoIterator<Item = B>>(iter: I) -> Self {
        let mut tally = Tally::default();
        iter.into_iter().for_each(|b| tally.add(b.as_ref()));
        tally
    }
}

/// Live state of one deployed election.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionContract {
    params: ElectionParams,
    ballot_box: BallotBox,
    published_key: Option<KeyPair>,
}

impl ElectionContract {
    pub fn deploy(params: ElectionParams) -> Self {
        Self { params, ballot_box: BallotBox::default(), published_key: None }
    }

    pub fn params(&self) -> &ElectionParams {
        &self.params
    }

    pub fn ballot_box(&self) -> &BallotBox {
        &self.ballot_box
    }

    pub fn published_key(&self) -> Option<&KeyPair> {
        self.published_key.as_ref()
    }

    /// Whether `signed_blinded` is the organizer's signature on `blinded`. Stateless.
    pub fn check_signature(
        &self,
        signed_blinded: &SignedBlindedBallot,
        blinded: &BlindedBallot,
        now: u64,
    ) -> Result<bool, ContractError> {
        self.params.windows.require(Phase::Sign, now)?;
        let pk = &self.params.pk;
        Ok(signed_blinded.value() < pk.modulus() && &pk.apply(signed_blinded.value()) == blinded.value())
    }

    /// The judge function: accepts the ballot iff the signature verifies on
    /// `Hash(ballot) ‖ uuid` and the uuid is unspent. Invalid ballots return `false`.
    pub fn cast(&mut self, signed: &SignedBallot, ballot: &[u8], uuid: &Uuid, now: u64) -> Result<bool, ContractError> {
        self.params.windows.require(Phase::Cast, now)?;
        let digest = BallotDigest::new(ballot, uuid);
        if !blindsig::verify(signed, &digest, &self.params.pk) || self.ballot_box.contains(uuid) {
            return Ok(false);
        }
        Ok(self.ballot_box.insert_fresh(*uuid, ballot.to_vec()))
    }

    pub fn publish_key(&mut self, key: &KeyPair, now: u64) -> Result<(), ContractError> {
        let sealing_pk = self.params.sealing_pk.as_ref().ok_or(ContractError::NotSealed)?;
        self.params.windows.require_closed(now)?;
        if key.public() != sealing_pk {
            return Err(ContractError::KeyMismatch);
        }
        self.published_key = Some(key.clone());
        Ok(())
    }

    pub fn tally(&self, now: u64) -> Result<Tally, ContractError> {
        self.params.windows.require_closed(now)?;
        match (&self.params.sealing_pk, &self.published_key) {
            (None, _) => Ok(self.ballot_box.iter().map(|(_, ballot)| ballot).collect()),
            (Some(_), None) => Err(ContractError::ResultSealed),
            (Some(_), Some(key)) => {
                let mut tally = Tally::default();
                for (uuid, sealed) in self.ballot_box.iter() {
                    let ballot = sealing::open(sealed, key).map_err(|_: SealError| ContractError::Unseal(*uuid))?;
                    tally.add(&ballot);
                }
                Ok(tally)
            }
        }
    }
}
